//! Generators and brute-force oracles shared by the property tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::HashSet;

use prefixforge_core::circuit::{BitRange, CircuitError, Metrics, PrefixCircuit};
use prefixforge_core::spcr::{Constraint, RejectReason};
use proptest::prelude::*;

/// Builds a circuit from raw choices: each pair picks a left node and then a
/// right node among those starting right after it. When `complete` is set,
/// missing outputs are filled with a ripple chain afterwards.
pub fn build_circuit(width: usize, choices: &[(u32, u32)], complete: bool) -> PrefixCircuit {
    let mut c = PrefixCircuit::new(width).unwrap();
    for &(a, b) in choices {
        let left = a as usize % c.len();
        let hi = c.nodes()[left].range.hi;
        let rights: Vec<usize> = c
            .nodes()
            .iter()
            .filter(|n| n.range.lo == hi + 1)
            .map(|n| n.id)
            .collect();
        if rights.is_empty() {
            continue;
        }
        c.add_prefix_node(left, rights[b as usize % rights.len()]).unwrap();
    }
    if complete {
        for i in 1..width {
            if c.find_range(BitRange::new(0, i)).is_none() {
                let prev = c.find_range(BitRange::new(0, i - 1)).unwrap();
                c.add_prefix_node(prev, i).unwrap();
            }
        }
    }
    c
}

pub fn circuit_strategy(max_width: usize) -> impl Strategy<Value = PrefixCircuit> {
    (2..=max_width, prop::collection::vec((any::<u32>(), any::<u32>()), 0..48), any::<bool>())
        .prop_map(|(w, choices, complete)| build_circuit(w, &choices, complete))
}

pub fn valid_circuit_strategy(max_width: usize) -> impl Strategy<Value = PrefixCircuit> {
    (2..=max_width, prop::collection::vec((any::<u32>(), any::<u32>()), 0..48))
        .prop_map(|(w, choices)| build_circuit(w, &choices, true))
}

/// One line of a synthetic proposer response.
#[derive(Debug, Clone)]
pub enum Item {
    Node {
        claim: Option<usize>,
        left: usize,
        right: usize,
    },
    /// A node-shaped line the extractor cannot read.
    Malformed(String),
    /// Prose the extractor skips.
    Noise(String),
}

impl Item {
    pub fn render(&self) -> String {
        match self {
            Item::Node {
                claim: Some(k),
                left,
                right,
            } => format!("{k}: connectedNodes=({left},{right})"),
            Item::Node {
                claim: None,
                left,
                right,
            } => format!("connectedNodes=({left},{right})"),
            Item::Malformed(s) | Item::Noise(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub base: PrefixCircuit,
    pub constraint: Constraint,
    pub items: Vec<Item>,
}

impl Batch {
    pub fn response(&self) -> String {
        let mut s = String::from("Here are the nodes:\n```\n");
        for item in &self.items {
            s.push_str(&item.render());
            s.push('\n');
        }
        s.push_str("```\n");
        s
    }
}

const MALFORMED: [&str; 4] = [
    "9: connectedNodes=(x,3)",
    "connectedNodes=(1,",
    "10: connectedNodes=(None,2)",
    "7: connectedNodes=(3,3)",
];

const NOISE: [&str; 3] = ["Sure, adding the next level.", "", "## step 2"];

pub fn batch_strategy() -> impl Strategy<Value = Batch> {
    let constraint = prop_oneof![
        Just(None::<(bool, u32)>),
        (any::<bool>(), 2u32..6).prop_map(Some),
    ];
    (
        2usize..=12,
        prop::collection::vec((any::<u32>(), any::<u32>()), 0..16),
        constraint,
        prop::collection::vec((0u8..10, any::<u32>(), any::<u32>(), any::<u32>()), 0..24),
    )
        .prop_map(|(width, choices, constraint, raw)| {
            let base = build_circuit(width, &choices, false);
            let constraint = match constraint {
                None => Constraint::None,
                Some((true, d)) => Constraint::MaxDelay(d),
                Some((false, extra)) => Constraint::MaxArea(base.len() + extra as usize),
            };
            let n = base.len();
            let mut next = n;
            let mut items = Vec::new();
            for (kind, x, y, z) in raw {
                let span = n + items.len() + 1;
                let item = match kind {
                    // well-behaved: fresh sequential claim, left among known
                    // nodes, right chosen to fit next to it where possible
                    0..=4 => {
                        let left = x as usize % span;
                        let right = if left < n {
                            let hi = base.nodes()[left].range.hi;
                            base.nodes()
                                .iter()
                                .filter(|m| m.range.lo == hi + 1)
                                .map(|m| m.id)
                                .nth(y as usize % 3)
                                .unwrap_or(y as usize % span)
                        } else {
                            y as usize % span
                        };
                        next += 1;
                        Item::Node {
                            claim: Some(next - 1),
                            left,
                            right,
                        }
                    }
                    // arbitrary pair, claim may collide or be missing
                    5..=6 => Item::Node {
                        claim: match z % 3 {
                            0 => None,
                            1 => Some(z as usize % (span + 4)),
                            _ => Some(next),
                        },
                        left: x as usize % (span + 2),
                        right: y as usize % (span + 2),
                    },
                    // exact repeat of an existing base pair
                    7 => {
                        let pairs: Vec<(usize, usize)> =
                            base.nodes().iter().filter_map(|m| m.children()).collect();
                        match pairs.get(x as usize % pairs.len().max(1)) {
                            Some(&(left, right)) => Item::Node {
                                claim: Some(next),
                                left,
                                right,
                            },
                            None => Item::Noise(NOISE[0].into()),
                        }
                    }
                    8 => Item::Malformed(MALFORMED[x as usize % MALFORMED.len()].into()),
                    _ => Item::Noise(NOISE[x as usize % NOISE.len()].into()),
                };
                items.push(item);
            }
            Batch {
                base,
                constraint,
                items,
            }
        })
}

/// Reference pruning semantics built only on `add_prefix_node`: lines are
/// tried in order on a scratch copy; the first line claiming a new index
/// decides what that index refers to for the rest of the batch.
pub fn oracle_prune(batch: &Batch) -> (Vec<Option<RejectReason>>, PrefixCircuit) {
    let base_len = batch.base.len();
    let mut c = batch.base.clone();
    let mut binding: Vec<(usize, Option<usize>)> = Vec::new();
    let mut verdicts = Vec::new();
    let lookup = |binding: &[(usize, Option<usize>)], k: usize| binding.iter().find(|(c, _)| *c == k).map(|b| b.1);

    for item in &batch.items {
        let (claim, left, right) = match item {
            Item::Noise(_) => continue,
            Item::Malformed(_) => {
                verdicts.push(Some(RejectReason::Unparseable));
                continue;
            }
            Item::Node { claim, left, right } => (*claim, *left, *right),
        };
        if left == right {
            verdicts.push(Some(RejectReason::Unparseable));
            continue;
        }
        let resolve = |x: usize| {
            if x < base_len {
                Some(x)
            } else {
                lookup(&binding, x).flatten()
            }
        };
        let fresh = claim.filter(|&k| k >= base_len && lookup(&binding, k).is_none());
        let (verdict, bound_to) = match (resolve(left), resolve(right)) {
            (Some(l), Some(r)) => {
                let mut trial = c.clone();
                match trial.add_prefix_node(l, r) {
                    Err(CircuitError::InvalidPrefixNode { .. }) => (Some(RejectReason::NonAdjacent), None),
                    Err(_) => (Some(RejectReason::UnknownPredecessor), None),
                    Ok(id) if trial.len() == c.len() => (Some(RejectReason::Duplicate), Some(id)),
                    Ok(id) => {
                        let level = trial.nodes()[id].level;
                        if batch.constraint.delay_bound().is_some_and(|d| level > d) {
                            (Some(RejectReason::DelayBoundExceeded), None)
                        } else if batch.constraint.area_bound().is_some_and(|a| trial.len() > a) {
                            (Some(RejectReason::AreaBoundExceeded), None)
                        } else {
                            c = trial;
                            (None, Some(id))
                        }
                    }
                }
            }
            _ => (Some(RejectReason::UnknownPredecessor), None),
        };
        if let Some(k) = fresh {
            binding.push((k, bound_to));
        }
        verdicts.push(verdict);
    }
    (verdicts, c)
}

/// Fronts by repeated peeling: each front is everything no remaining item
/// dominates, ordered by area, delay, then position.
pub fn oracle_fronts(items: &[Metrics]) -> Vec<Vec<usize>> {
    let dominates = |a: Metrics, b: Metrics| a.area <= b.area && a.delay <= b.delay && (a.area < b.area || a.delay < b.delay);
    let mut left: HashSet<usize> = (0..items.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let mut front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(items[j], items[i])))
            .collect();
        front.sort_by_key(|&i| (items[i].area, items[i].delay, i));
        for i in &front {
            left.remove(i);
        }
        fronts.push(front);
    }
    fronts
}

pub fn metrics_strategy() -> impl Strategy<Value = Vec<Metrics>> {
    prop::collection::vec((1usize..40, 1u32..12), 0..=64)
        .prop_map(|v| v.into_iter().map(|(a, d)| Metrics::new(a, d)).collect())
}
