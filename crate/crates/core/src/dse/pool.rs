//! The sorted circuit pool and its on-disk layout.
//!
//! A saved pool is a directory holding one `.spcr` file per circuit plus
//! `index.json`, which lists every entry in insertion order with its
//! canonical key, metrics and the iteration that found it. Reloading
//! replays the inserts in that order, so fronts come back identical.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{Metrics, PrefixCircuit};
use crate::proposer::DigestEntry;
use crate::spcr::{self, Constraint, Variant};
use crate::verify::{verify_adder, EXHAUSTIVE_MAX_WIDTH};

use super::sort::{hypervolume, non_dominated_sort};

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntry {
    pub circuit: PrefixCircuit,
    pub metrics: Metrics,
    pub key: String,
    /// DSE iteration that produced the circuit; `None` for seeds.
    pub iteration: Option<usize>,
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InsertOutcome {
    Inserted,
    DuplicateSkipped,
    RejectedConstraint,
    /// Not a valid circuit of the pool's width, or failed the carry check.
    RejectedInvalid,
}

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: malformed index", path.display())]
    Index {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: bad circuit file", path.display())]
    Spcr {
        path: PathBuf,
        source: spcr::ParseError,
    },
    #[error("{}: index says {expected} but the circuit has {actual}", path.display())]
    MetricsMismatch {
        path: PathBuf,
        expected: Metrics,
        actual: Metrics,
    },
    #[error("{}: entry was not accepted on reload ({outcome:?})", path.display())]
    Rejected {
        path: PathBuf,
        outcome: InsertOutcome,
    },
}

/// Deduplicated archive of valid circuits ordered by Pareto fronts.
#[derive(Debug, Clone)]
pub struct CircuitPool {
    width: usize,
    constraint: Constraint,
    entries: Vec<PoolEntry>,
    keys: HashSet<String>,
    fronts: Vec<Vec<usize>>,
}

impl CircuitPool {
    pub fn new(width: usize, constraint: Constraint) -> Self {
        CircuitPool {
            width,
            constraint,
            entries: Vec::new(),
            keys: HashSet::new(),
            fronts: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// Front membership as indices into [`Self::entries`].
    pub fn fronts(&self) -> &[Vec<usize>] {
        &self.fronts
    }

    pub fn insert(&mut self, circuit: PrefixCircuit, iteration: Option<usize>, origin: &str) -> InsertOutcome {
        if circuit.width() != self.width || !circuit.is_valid() {
            return InsertOutcome::RejectedInvalid;
        }
        let metrics = circuit.metrics();
        if !self.constraint.admits(metrics) {
            return InsertOutcome::RejectedConstraint;
        }
        let key = circuit.canonical_key();
        if self.keys.contains(&key) {
            return InsertOutcome::DuplicateSkipped;
        }
        if self.width <= EXHAUSTIVE_MAX_WIDTH {
            match verify_adder(&circuit, 0, 0) {
                Ok(v) if v.passed() => {}
                _ => return InsertOutcome::RejectedInvalid,
            }
        }
        self.keys.insert(key.clone());
        self.entries.push(PoolEntry {
            circuit,
            metrics,
            key,
            iteration,
            origin: origin.to_string(),
        });
        let metrics: Vec<Metrics> = self.entries.iter().map(|e| e.metrics).collect();
        self.fronts = non_dominated_sort(&metrics);
        InsertOutcome::Inserted
    }

    /// Entries best first: by front, then by the within-front order.
    pub fn ordered(&self) -> impl Iterator<Item = &PoolEntry> {
        self.fronts.iter().flatten().map(move |&i| &self.entries[i])
    }

    pub fn best(&self) -> Option<&PoolEntry> {
        self.ordered().next()
    }

    pub fn front(&self, k: usize) -> Vec<&PoolEntry> {
        self.fronts
            .get(k)
            .map(|f| f.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// SPCR variant shown to proposers: per-node levels under a delay bound.
    pub fn digest_variant(&self) -> Variant {
        match self.constraint {
            Constraint::MaxDelay(_) => Variant::WithDelay,
            _ => Variant::Plain,
        }
    }

    /// The `k` best circuits as (SPCR, area, delay).
    pub fn top_k(&self, k: usize) -> Vec<DigestEntry> {
        let variant = self.digest_variant();
        self.ordered()
            .take(k)
            .map(|e| DigestEntry {
                spcr: spcr::serialize(&e.circuit, variant),
                area: e.metrics.area,
                delay: e.metrics.delay,
            })
            .collect()
    }

    pub fn hypervolume(&self, reference: Metrics) -> f64 {
        let front: Vec<Metrics> = self.front(0).iter().map(|e| e.metrics).collect();
        hypervolume(&front, reference)
    }

    pub fn save(&self, dir: &Path) -> Result<(), PoolError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| PoolError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut index = PoolIndex {
            width: self.width,
            constraint: self.constraint.into(),
            entries: Vec::new(),
        };
        for e in &self.entries {
            let file = format!("{}.spcr", &e.key[..16]);
            let path = dir.join(&file);
            fs::write(&path, spcr::serialize(&e.circuit, Variant::WithDelay)).map_err(io(&path))?;
            index.entries.push(IndexEntry {
                key: e.key.clone(),
                file,
                area: e.metrics.area,
                delay: e.metrics.delay,
                iteration: e.iteration,
                origin: e.origin.clone(),
            });
        }
        let path = dir.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        fs::write(&path, text + "\n").map_err(io(&path))
    }

    pub fn load(dir: &Path) -> Result<Self, PoolError> {
        let index_path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&index_path).map_err(|source| PoolError::Io {
            path: index_path.clone(),
            source,
        })?;
        let index: PoolIndex = serde_json::from_str(&text).map_err(|source| PoolError::Index {
            path: index_path.clone(),
            source,
        })?;
        let mut pool = CircuitPool::new(index.width, index.constraint.into());
        for entry in index.entries {
            let path = dir.join(&entry.file);
            let text = fs::read_to_string(&path).map_err(|source| PoolError::Io {
                path: path.clone(),
                source,
            })?;
            let circuit = spcr::parse(&text).map_err(|source| PoolError::Spcr {
                path: path.clone(),
                source,
            })?;
            let expected = Metrics::new(entry.area, entry.delay);
            if circuit.metrics() != expected {
                return Err(PoolError::MetricsMismatch {
                    path,
                    expected,
                    actual: circuit.metrics(),
                });
            }
            match pool.insert(circuit, entry.iteration, &entry.origin) {
                InsertOutcome::Inserted => {}
                outcome => return Err(PoolError::Rejected { path, outcome }),
            }
        }
        Ok(pool)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ConstraintRecord {
    None,
    MaxDelay(u32),
    MaxArea(usize),
}

impl From<Constraint> for ConstraintRecord {
    fn from(c: Constraint) -> Self {
        match c {
            Constraint::None => ConstraintRecord::None,
            Constraint::MaxDelay(l) => ConstraintRecord::MaxDelay(l),
            Constraint::MaxArea(a) => ConstraintRecord::MaxArea(a),
        }
    }
}

impl From<ConstraintRecord> for Constraint {
    fn from(c: ConstraintRecord) -> Self {
        match c {
            ConstraintRecord::None => Constraint::None,
            ConstraintRecord::MaxDelay(l) => Constraint::MaxDelay(l),
            ConstraintRecord::MaxArea(a) => Constraint::MaxArea(a),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PoolIndex {
    width: usize,
    constraint: ConstraintRecord,
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    key: String,
    file: String,
    area: usize,
    delay: u32,
    iteration: Option<usize>,
    origin: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{brent_kung, kogge_stone, sklansky};

    #[test]
    fn seed_is_sole_front() {
        let mut pool = CircuitPool::new(8, Constraint::MaxDelay(4));
        assert_eq!(pool.insert(kogge_stone(8).unwrap(), None, "kogge-stone"), InsertOutcome::Inserted);
        assert_eq!(pool.fronts(), &[vec![0]]);
        assert_eq!(pool.best().unwrap().metrics, Metrics::new(25, 4));
    }

    #[test]
    fn duplicates_and_constraints() {
        let mut pool = CircuitPool::new(8, Constraint::MaxDelay(4));
        pool.insert(kogge_stone(8).unwrap(), None, "seed");
        assert_eq!(pool.insert(kogge_stone(8).unwrap(), Some(0), "x"), InsertOutcome::DuplicateSkipped);
        // Brent-Kung(8) has delay 5
        assert_eq!(pool.insert(brent_kung(8).unwrap(), Some(0), "x"), InsertOutcome::RejectedConstraint);
        assert_eq!(pool.insert(PrefixCircuit::new(8).unwrap(), Some(0), "x"), InsertOutcome::RejectedInvalid);
        assert_eq!(pool.insert(kogge_stone(4).unwrap(), Some(0), "x"), InsertOutcome::RejectedInvalid);
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn top_k_follows_front_order() {
        let mut pool = CircuitPool::new(8, Constraint::None);
        pool.insert(sklansky(8).unwrap(), None, "s");
        pool.insert(brent_kung(8).unwrap(), None, "b");
        pool.insert(kogge_stone(8).unwrap(), None, "k");
        let top: Vec<_> = pool.top_k(10).iter().map(|d| (d.area, d.delay)).collect();
        assert_eq!(top, vec![(19, 5), (20, 4), (25, 4)]);
        let top2: Vec<_> = pool.top_k(2).iter().map(|d| (d.area, d.delay)).collect();
        assert_eq!(top2, vec![(19, 5), (20, 4)]);
        assert_eq!(pool.top_k(1).len(), 1);
        assert_eq!(pool.top_k(1)[0].area, 19);
        assert!(!pool.top_k(1)[0].spcr.contains("level="));
    }

    #[test]
    fn delay_limited_digest_uses_levels() {
        let mut pool = CircuitPool::new(8, Constraint::MaxDelay(4));
        pool.insert(kogge_stone(8).unwrap(), None, "seed");
        assert!(pool.top_k(1)[0].spcr.lines().all(|l| l.contains("level=")));
    }

    #[test]
    fn save_and_load_reproduce_fronts() {
        let dir = tempfile::tempdir().unwrap();
        let mut pool = CircuitPool::new(8, Constraint::None);
        pool.insert(kogge_stone(8).unwrap(), None, "kogge-stone");
        pool.insert(sklansky(8).unwrap(), Some(3), "offline");
        pool.insert(brent_kung(8).unwrap(), Some(5), "llm");
        pool.save(dir.path()).unwrap();
        let back = CircuitPool::load(dir.path()).unwrap();
        assert_eq!(back.fronts(), pool.fronts());
        assert_eq!(back.entries(), pool.entries());
        assert_eq!(back.constraint(), Constraint::None);
    }

    #[test]
    fn load_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut pool = CircuitPool::new(8, Constraint::MaxDelay(4));
        pool.insert(kogge_stone(8).unwrap(), None, "seed");
        pool.save(dir.path()).unwrap();
        let index = dir.path().join(INDEX_FILE);
        let text = fs::read_to_string(&index).unwrap().replace("\"area\": 25", "\"area\": 24");
        fs::write(&index, text).unwrap();
        assert!(matches!(CircuitPool::load(dir.path()), Err(PoolError::MetricsMismatch { .. })));
        assert!(matches!(
            CircuitPool::load(&dir.path().join("nope")),
            Err(PoolError::Io { .. })
        ));
    }
}
