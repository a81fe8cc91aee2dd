//! Relation paths and their reliability.
//!
//! A relation path is a sequence of at most two edge ids (forward relations
//! in `0..|R|`, reversed relations in `|R|..2|R|`). Reliability follows the
//! resource-allocation reading: one unit of resource starts at the head,
//! splits equally among successors at each step, and the mass arriving at the
//! tail is the path's reliability. Entities without successors along the next
//! edge leak their resource.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{CkrlError, Result};
use crate::kg::{EdgeId, EntityId, KnowledgeGraph, RelationId, Triple};

/// A relation path of length 1 or 2 over the doubled edge space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationPath {
    Single(EdgeId),
    Pair(EdgeId, EdgeId),
}

impl RelationPath {
    pub fn len(&self) -> usize {
        match self {
            RelationPath::Single(_) => 1,
            RelationPath::Pair(_, _) => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> {
        let (a, b) = match *self {
            RelationPath::Single(e) => (e, None),
            RelationPath::Pair(e1, e2) => (e1, Some(e2)),
        };
        std::iter::once(a).chain(b)
    }
}

impl fmt::Display for RelationPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationPath::Single(e) => write!(f, "{e}"),
            RelationPath::Pair(e1, e2) => write!(f, "{e1},{e2}"),
        }
    }
}

impl FromStr for RelationPath {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.split(',');
        let first = parts
            .next()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| format!("empty path {s:?}"))?;
        let e1: EdgeId = first.parse().map_err(|_| format!("bad edge id {first:?}"))?;
        match parts.next() {
            None => Ok(RelationPath::Single(e1)),
            Some(second) => {
                let e2: EdgeId = second
                    .parse()
                    .map_err(|_| format!("bad edge id {second:?}"))?;
                if parts.next().is_some() {
                    return Err(format!("path {s:?} is longer than 2 edges"));
                }
                Ok(RelationPath::Pair(e1, e2))
            }
        }
    }
}

/// A path together with the resource mass it delivers for one entity pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathIndexEntry {
    pub path: RelationPath,
    pub reliability: f64,
}

/// Knobs for path precomputation.
#[derive(Debug, Clone, Copy)]
pub struct PathConfig {
    /// Maximum path length; 1 or 2.
    pub max_len: usize,
    /// At most this many neighbors are expanded per (entity, edge) group
    /// during two-step enumeration (taken in sorted-id order). Bounds work on
    /// hub entities; resource denominators still use true out-degrees, so
    /// truncated flow leaks.
    pub fanout_cap: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            max_len: 2,
            fanout_cap: 200,
        }
    }
}

/// Co-occurrence statistics of relations and paths over the training graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    /// Ordered entity pairs connected by each path.
    pair_count: HashMap<RelationPath, u64>,
    /// Training triples (h, r, t) whose path set contains the path.
    co_count: HashMap<(RelationId, RelationPath), u64>,
    pub epsilon: f64,
}

impl PathStats {
    pub fn pair_count(&self, p: RelationPath) -> u64 {
        self.pair_count.get(&p).copied().unwrap_or(0)
    }

    pub fn co_count(&self, r: RelationId, p: RelationPath) -> u64 {
        self.co_count.get(&(r, p)).copied().unwrap_or(0)
    }

    #[cfg(test)]
    pub(crate) fn from_raw(
        pair_count: HashMap<RelationPath, u64>,
        co_count: HashMap<(RelationId, RelationPath), u64>,
        epsilon: f64,
    ) -> Self {
        PathStats {
            pair_count,
            co_count,
            epsilon,
        }
    }
}

/// All edge sequences of length ≤ `max_len` from `h` to `t`.
///
/// When the query is issued on behalf of a triple `(h, r, t)`, pass
/// `excluded = Some(r)` so the triple's own edge cannot certify it.
pub fn enumerate_paths(
    kg: &KnowledgeGraph,
    h: EntityId,
    t: EntityId,
    max_len: usize,
    excluded: Option<EdgeId>,
) -> BTreeSet<RelationPath> {
    assert!((1..=2).contains(&max_len), "paths are capped at 2 steps");
    let mut out = BTreeSet::new();
    for (e1, targets) in kg.edge_groups(h) {
        if targets.binary_search(&t).is_ok() && excluded != Some(*e1) {
            out.insert(RelationPath::Single(*e1));
        }
        if max_len < 2 {
            continue;
        }
        for &mid in targets.iter() {
            for (e2, second) in kg.edge_groups(mid) {
                if second.binary_search(&t).is_ok() {
                    out.insert(RelationPath::Pair(*e1, *e2));
                }
            }
        }
    }
    out
}

/// Resource mass reaching `t` from a unit source at `h` along `p`; zero when
/// `p` does not connect the pair. Exact (no fan-out cap).
pub fn pcra_reliability(kg: &KnowledgeGraph, h: EntityId, p: RelationPath, t: EntityId) -> f64 {
    match p {
        RelationPath::Single(e) => {
            let succ = kg.neighbors(h, e);
            if succ.binary_search(&t).is_ok() {
                1.0 / succ.len() as f64
            } else {
                0.0
            }
        }
        RelationPath::Pair(e1, e2) => {
            let first = kg.neighbors(h, e1);
            if first.is_empty() {
                return 0.0;
            }
            let step_mass = 1.0 / first.len() as f64;
            let mut total = 0.0;
            for &mid in first {
                let second = kg.neighbors(mid, e2);
                if second.binary_search(&t).is_ok() {
                    total += step_mass / second.len() as f64;
                }
            }
            total
        }
    }
}

/// Paths from `h` to `t` with their reliabilities, honoring the fan-out cap.
/// Shared engine behind the index and the statistics.
fn paths_between(
    kg: &KnowledgeGraph,
    h: EntityId,
    t: EntityId,
    excluded: Option<EdgeId>,
    cfg: &PathConfig,
) -> Vec<PathIndexEntry> {
    let mut acc: BTreeMap<RelationPath, f64> = BTreeMap::new();
    for (e1, targets) in kg.edge_groups(h) {
        if targets.binary_search(&t).is_ok() && excluded != Some(*e1) {
            acc.insert(RelationPath::Single(*e1), 1.0 / targets.len() as f64);
        }
        if cfg.max_len < 2 {
            continue;
        }
        let step_mass = 1.0 / targets.len() as f64;
        for &mid in targets.iter().take(cfg.fanout_cap) {
            for (e2, second) in kg.edge_groups(mid) {
                if second.binary_search(&t).is_ok() {
                    *acc.entry(RelationPath::Pair(*e1, *e2)).or_insert(0.0) +=
                        step_mass / second.len() as f64;
                }
            }
        }
    }
    acc.into_iter()
        .map(|(path, reliability)| PathIndexEntry { path, reliability })
        .collect()
}

/// Per-triple path sets with reliabilities, the triple's own relation edge
/// excluded. Triples whose entity pair is otherwise disconnected get an empty
/// list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathIndex {
    entries: HashMap<Triple, Vec<PathIndexEntry>>,
}

impl PathIndex {
    pub fn get(&self, t: &Triple) -> &[PathIndexEntry] {
        self.entries.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Builds the per-triple path index in parallel over the training triples.
pub fn build_path_index(kg: &KnowledgeGraph, train: &[Triple], cfg: &PathConfig) -> PathIndex {
    let computed: Vec<(Triple, Vec<PathIndexEntry>)> = train
        .par_iter()
        .map(|&t| {
            (
                t,
                paths_between(kg, t.head, t.tail, Some(t.relation), cfg),
            )
        })
        .collect();
    let mut entries = HashMap::with_capacity(train.len());
    for (t, paths) in computed {
        entries.entry(t).or_insert(paths);
    }
    PathIndex { entries }
}

/// Counts path/pair and relation-path co-occurrences over the training graph.
pub fn build_path_stats(
    kg: &KnowledgeGraph,
    train: &[Triple],
    epsilon: f64,
    cfg: &PathConfig,
) -> PathStats {
    // pair_count: distinct ordered pairs connected by each path, enumerated
    // per head entity and merged by summation (order-independent).
    let pair_count: HashMap<RelationPath, u64> = (0..kg.num_entities() as u32)
        .into_par_iter()
        .map(|h| {
            let mut local: HashMap<RelationPath, BTreeSet<EntityId>> = HashMap::new();
            for (e1, targets) in kg.edge_groups(h) {
                local
                    .entry(RelationPath::Single(*e1))
                    .or_default()
                    .extend(targets.iter().copied());
                if cfg.max_len < 2 {
                    continue;
                }
                for &mid in targets.iter().take(cfg.fanout_cap) {
                    for (e2, second) in kg.edge_groups(mid) {
                        local
                            .entry(RelationPath::Pair(*e1, *e2))
                            .or_default()
                            .extend(second.iter().copied());
                    }
                }
            }
            local
                .into_iter()
                .map(|(p, tails)| (p, tails.len() as u64))
                .collect::<HashMap<_, _>>()
        })
        .reduce(HashMap::new, merge_counts);

    // co_count: per training triple, which paths (own edge excluded) connect
    // its entity pair.
    let co_count: HashMap<(RelationId, RelationPath), u64> = train
        .par_iter()
        .map(|&t| {
            let mut local: HashMap<(RelationId, RelationPath), u64> = HashMap::new();
            for entry in paths_between(kg, t.head, t.tail, Some(t.relation), cfg) {
                *local.entry((t.relation, entry.path)).or_insert(0) += 1;
            }
            local
        })
        .reduce(HashMap::new, merge_counts);

    PathStats {
        pair_count,
        co_count,
        epsilon,
    }
}

fn merge_counts<K: std::hash::Hash + Eq>(
    mut a: HashMap<K, u64>,
    b: HashMap<K, u64>,
) -> HashMap<K, u64> {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

// ---------------------------------------------------------------------------
// Cache files
// ---------------------------------------------------------------------------

const INDEX_MAGIC: &str = "ckrl-path-index";
const STATS_MAGIC: &str = "ckrl-path-stats";
const CACHE_VERSION: &str = "v1";

/// Writes the path index as TSV: `h⇥r⇥t⇥edges⇥reliability`, one line per
/// entry, triples in `order`. The header records a caller-supplied digest of
/// the source data so stale caches can be detected.
pub fn write_path_index<W: Write>(
    mut w: W,
    index: &PathIndex,
    order: &[Triple],
    source_digest: &str,
) -> std::io::Result<()> {
    writeln!(w, "#{INDEX_MAGIC}\t{CACHE_VERSION}\t{source_digest}")?;
    for t in order {
        for entry in index.get(t) {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                t.head, t.relation, t.tail, entry.path, entry.reliability
            )?;
        }
    }
    Ok(())
}

/// Reads a path index cache, returning `(index, source_digest)`.
pub fn read_path_index<R: BufRead>(reader: R, path: &Path) -> Result<(PathIndex, String)> {
    let mut lines = reader.lines();
    let digest = parse_header(lines.next(), INDEX_MAGIC, path)?;
    let mut entries: HashMap<Triple, Vec<PathIndexEntry>> = HashMap::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| CkrlError::io(path, e))?;
        let lineno = idx + 2;
        let bad = |msg: String| CkrlError::CacheFormat {
            path: path.to_owned(),
            msg: format!("line {lineno}: {msg}"),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let parse_id =
            |s: &str| -> Result<u32> { s.parse().map_err(|_| bad(format!("bad id {s:?}"))) };
        let triple = Triple::new(parse_id(fields[0])?, parse_id(fields[1])?, parse_id(fields[2])?);
        let path_edges: RelationPath = fields[3].parse().map_err(&bad)?;
        let reliability: f64 = fields[4]
            .parse()
            .map_err(|_| bad(format!("bad reliability {:?}", fields[4])))?;
        entries.entry(triple).or_default().push(PathIndexEntry {
            path: path_edges,
            reliability,
        });
    }
    Ok((PathIndex { entries }, digest))
}

/// Writes path statistics as TSV with `P` (pair-count) and `C` (co-count)
/// records in sorted order.
pub fn write_path_stats<W: Write>(
    mut w: W,
    stats: &PathStats,
    source_digest: &str,
) -> std::io::Result<()> {
    writeln!(
        w,
        "#{STATS_MAGIC}\t{CACHE_VERSION}\t{source_digest}\tepsilon={}",
        stats.epsilon
    )?;
    let pairs: BTreeMap<_, _> = stats.pair_count.iter().collect();
    for (p, count) in pairs {
        writeln!(w, "P\t{p}\t{count}")?;
    }
    let cos: BTreeMap<_, _> = stats.co_count.iter().collect();
    for ((r, p), count) in cos {
        writeln!(w, "C\t{r}\t{p}\t{count}")?;
    }
    Ok(())
}

/// Reads a path statistics cache, returning `(stats, source_digest)`.
pub fn read_path_stats<R: BufRead>(reader: R, path: &Path) -> Result<(PathStats, String)> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| CkrlError::io(path, e))?
        .ok_or_else(|| CkrlError::CacheFormat {
            path: path.to_owned(),
            msg: "empty file".to_owned(),
        })?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 4 || fields[0] != format!("#{STATS_MAGIC}") || fields[1] != CACHE_VERSION {
        return Err(CkrlError::CacheFormat {
            path: path.to_owned(),
            msg: format!("unrecognized header {header:?}"),
        });
    }
    let digest = fields[2].to_owned();
    let epsilon: f64 = fields[3]
        .strip_prefix("epsilon=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CkrlError::CacheFormat {
            path: path.to_owned(),
            msg: format!("bad epsilon field {:?}", fields[3]),
        })?;

    let mut pair_count = HashMap::new();
    let mut co_count = HashMap::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| CkrlError::io(path, e))?;
        let lineno = idx + 2;
        let bad = |msg: String| CkrlError::CacheFormat {
            path: path.to_owned(),
            msg: format!("line {lineno}: {msg}"),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["P", p, count] => {
                let p: RelationPath = p.parse().map_err(bad)?;
                let count: u64 = count
                    .parse()
                    .map_err(|_| bad(format!("bad count {count:?}")))?;
                pair_count.insert(p, count);
            }
            ["C", r, p, count] => {
                let r: RelationId = r.parse().map_err(|_| bad(format!("bad relation {r:?}")))?;
                let p: RelationPath = p.parse().map_err(bad)?;
                let count: u64 = count
                    .parse()
                    .map_err(|_| bad(format!("bad count {count:?}")))?;
                co_count.insert((r, p), count);
            }
            _ => return Err(bad(format!("unrecognized record {line:?}"))),
        }
    }
    Ok((
        PathStats {
            pair_count,
            co_count,
            epsilon,
        },
        digest,
    ))
}

fn parse_header(
    line: Option<std::io::Result<String>>,
    magic: &str,
    path: &Path,
) -> Result<String> {
    let header = line
        .transpose()
        .map_err(|e| CkrlError::io(path, e))?
        .ok_or_else(|| CkrlError::CacheFormat {
            path: path.to_owned(),
            msg: "empty file".to_owned(),
        })?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 3 || fields[0] != format!("#{magic}") || fields[1] != CACHE_VERSION {
        return Err(CkrlError::CacheFormat {
            path: path.to_owned(),
            msg: format!("unrecognized header {header:?}"),
        });
    }
    Ok(fields[2].to_owned())
}
