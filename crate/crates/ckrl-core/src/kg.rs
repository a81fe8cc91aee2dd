//! Triple storage and indexing.
//!
//! Triples are kept as dense integer ids. The graph exposes adjacency over an
//! edge-id space of size `2 * |R|`: edge `r` walks relation `r` head-to-tail
//! and edge `r + |R|` walks it tail-to-head, so relation paths can traverse
//! edges in both directions without materializing reverse triples.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{CkrlError, Result};

pub type EntityId = u32;
pub type RelationId = u32;

/// Edge id: `r` in `0..|R|` is relation `r` forward, `r + |R|` is its reverse.
pub type EdgeId = u32;

/// An atomic fact `(head, relation, tail)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// Column layout of a triple file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnOrder {
    /// head, relation, tail
    Hrt,
    /// head, tail, relation — FB15K's native layout, hence the default.
    #[default]
    Htr,
}

impl ColumnOrder {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hrt" => Ok(ColumnOrder::Hrt),
            "htr" => Ok(ColumnOrder::Htr),
            other => Err(CkrlError::InvalidConfig(format!(
                "unknown column order {other:?} (expected \"hrt\" or \"htr\")"
            ))),
        }
    }
}

/// Bidirectional map between raw strings and contiguous ids.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    /// Returns the id for `name`, interning it on first sight.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Writes `id⇥name` lines, one per entry, in id order.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, name) in self.names.iter().enumerate() {
            writeln!(w, "{id}\t{name}")?;
        }
        Ok(())
    }
}

/// Parses triple files into id space, sharing one vocabulary across files so
/// that ids stay stable when train/valid/test are loaded in a fixed order.
#[derive(Debug, Default)]
pub struct TripleLoader {
    pub entities: Vocab,
    pub relations: Vocab,
}

impl TripleLoader {
    pub fn new() -> Self {
        TripleLoader::default()
    }

    /// Loads one tab-separated triple file, assigning ids in first-appearance
    /// order. Returns triples in file order, duplicates included.
    pub fn load(&mut self, path: &Path, order: ColumnOrder) -> Result<Vec<Triple>> {
        let file = File::open(path).map_err(|e| CkrlError::io(path, e))?;
        self.load_reader(BufReader::new(file), order, path)
    }

    pub fn load_reader<R: BufRead>(
        &mut self,
        reader: R,
        order: ColumnOrder,
        path: &Path,
    ) -> Result<Vec<Triple>> {
        let mut triples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CkrlError::io(path, e))?;
            let lineno = idx + 1;
            if line.is_empty() {
                return Err(CkrlError::Parse {
                    path: path.to_owned(),
                    line: lineno,
                    msg: "empty line".to_owned(),
                });
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(CkrlError::Parse {
                    path: path.to_owned(),
                    line: lineno,
                    msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let (h, r, t) = match order {
                ColumnOrder::Hrt => (fields[0], fields[1], fields[2]),
                ColumnOrder::Htr => (fields[0], fields[2], fields[1]),
            };
            triples.push(Triple {
                head: self.entities.intern(h),
                relation: self.relations.intern(r),
                tail: self.entities.intern(t),
            });
        }
        if triples.is_empty() {
            return Err(CkrlError::EmptyInput {
                path: path.to_owned(),
            });
        }
        Ok(triples)
    }

    /// Maps an already-loaded vocabulary entry; unknown strings are an error.
    pub fn resolve(&self, h: &str, r: &str, t: &str, path: &Path, line: usize) -> Result<Triple> {
        let miss = |token: &str| CkrlError::UnknownToken {
            path: path.to_owned(),
            line,
            token: token.to_owned(),
        };
        Ok(Triple {
            head: self.entities.get(h).ok_or_else(|| miss(h))?,
            relation: self.relations.get(r).ok_or_else(|| miss(r))?,
            tail: self.entities.get(t).ok_or_else(|| miss(t))?,
        })
    }
}

/// Immutable indexed triple store.
///
/// `triples` holds the deduplicated training set in first-occurrence order;
/// `known` additionally holds every triple from the splits passed as
/// `extra_known` (validation/test), which ranking filters and negative
/// sampling check against.
#[derive(Debug)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<Triple>,
    known: HashSet<Triple>,
    /// Per entity: `(edge, sorted targets)` groups, sorted by edge id.
    adjacency: Vec<Vec<(EdgeId, Vec<EntityId>)>>,
    /// Per relation: sorted entities observed as head / as tail in training.
    head_domain: Vec<Vec<EntityId>>,
    tail_domain: Vec<Vec<EntityId>>,
}

impl KnowledgeGraph {
    /// Indexes `train`, recording `extra_known` splits in the membership set
    /// only. Duplicate training triples are dropped with a warning.
    pub fn build(
        entities: Vocab,
        relations: Vocab,
        train: &[Triple],
        extra_known: &[&[Triple]],
    ) -> KnowledgeGraph {
        let ne = entities.len();
        let nr = relations.len();

        let mut known: HashSet<Triple> = HashSet::with_capacity(train.len());
        let mut triples = Vec::with_capacity(train.len());
        let mut duplicates = 0usize;
        for &t in train {
            if known.insert(t) {
                triples.push(t);
            } else {
                duplicates += 1;
            }
        }
        if duplicates > 0 {
            log::warn!("dropped {duplicates} duplicate training triples");
        }
        for split in extra_known {
            for &t in *split {
                known.insert(t);
            }
        }

        let mut adjacency: Vec<Vec<(EdgeId, Vec<EntityId>)>> = vec![Vec::new(); ne];
        let mut head_domain: Vec<HashSet<EntityId>> = vec![HashSet::new(); nr];
        let mut tail_domain: Vec<HashSet<EntityId>> = vec![HashSet::new(); nr];

        // Group edges per entity via (entity, edge, target) sort.
        let mut edges: Vec<(EntityId, EdgeId, EntityId)> = Vec::with_capacity(triples.len() * 2);
        for t in &triples {
            edges.push((t.head, t.relation, t.tail));
            edges.push((t.tail, t.relation + nr as u32, t.head));
            head_domain[t.relation as usize].insert(t.head);
            tail_domain[t.relation as usize].insert(t.tail);
        }
        edges.sort_unstable();
        for (src, edge, dst) in edges {
            let groups = &mut adjacency[src as usize];
            match groups.last_mut() {
                Some((e, targets)) if *e == edge => targets.push(dst),
                _ => groups.push((edge, vec![dst])),
            }
        }

        let sorted = |set: HashSet<EntityId>| {
            let mut v: Vec<EntityId> = set.into_iter().collect();
            v.sort_unstable();
            v
        };

        KnowledgeGraph {
            entities,
            relations,
            triples,
            known,
            adjacency,
            head_domain: head_domain.into_iter().map(sorted).collect(),
            tail_domain: tail_domain.into_iter().map(sorted).collect(),
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// Size of the edge-id space: `2 * |R|`.
    pub fn num_edges(&self) -> usize {
        self.relations.len() * 2
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    /// Deduplicated training triples in first-occurrence order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// True iff `t` occurs anywhere in train ∪ extra splits.
    pub fn contains(&self, t: Triple) -> bool {
        self.known.contains(&t)
    }

    pub fn num_known(&self) -> usize {
        self.known.len()
    }

    /// Reverse of an edge id.
    pub fn reverse_edge(&self, edge: EdgeId) -> EdgeId {
        let nr = self.relations.len() as u32;
        if edge < nr {
            edge + nr
        } else {
            edge - nr
        }
    }

    /// Sorted targets reachable from `e` along `edge`; empty when none.
    pub fn neighbors(&self, e: EntityId, edge: EdgeId) -> &[EntityId] {
        let groups = &self.adjacency[e as usize];
        match groups.binary_search_by_key(&edge, |(ed, _)| *ed) {
            Ok(i) => &groups[i].1,
            Err(_) => &[],
        }
    }

    /// All `(edge, targets)` groups of `e`, sorted by edge id.
    pub fn edge_groups(&self, e: EntityId) -> &[(EdgeId, Vec<EntityId>)] {
        &self.adjacency[e as usize]
    }

    /// Entities observed as head of `r` in training, sorted.
    pub fn head_domain(&self, r: RelationId) -> &[EntityId] {
        &self.head_domain[r as usize]
    }

    /// Entities observed as tail of `r` in training, sorted.
    pub fn tail_domain(&self, r: RelationId) -> &[EntityId] {
        &self.tail_domain[r as usize]
    }

    /// Bounds-checks a triple against the vocabularies.
    pub fn check_ids(&self, t: Triple) -> Result<()> {
        let ne = self.num_entities();
        let nr = self.num_relations();
        if t.head as usize >= ne {
            return Err(CkrlError::IdOutOfRange {
                what: "entity",
                id: t.head,
                size: ne,
            });
        }
        if t.tail as usize >= ne {
            return Err(CkrlError::IdOutOfRange {
                what: "entity",
                id: t.tail,
                size: ne,
            });
        }
        if t.relation as usize >= nr {
            return Err(CkrlError::IdOutOfRange {
                what: "relation",
                id: t.relation,
                size: nr,
            });
        }
        Ok(())
    }

    /// Writes the training triples as raw strings, one per line.
    pub fn dump_triples<W: Write>(&self, mut w: W, order: ColumnOrder) -> std::io::Result<()> {
        for t in &self.triples {
            let h = self.entities.name(t.head);
            let r = self.relations.name(t.relation);
            let tl = self.entities.name(t.tail);
            match order {
                ColumnOrder::Hrt => writeln!(w, "{h}\t{r}\t{tl}")?,
                ColumnOrder::Htr => writeln!(w, "{h}\t{tl}\t{r}")?,
            }
        }
        Ok(())
    }
}
