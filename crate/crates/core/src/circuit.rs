//! Prefix circuits: construction, validity, metrics and functional semantics.
//!
//! A prefix circuit over `n` bit positions is a DAG whose first `n` nodes are
//! the input nodes (one per bit, range `[i:i]`). Every later node combines two
//! earlier nodes whose bit ranges are adjacent: the left child covers the
//! less-significant part `[i:j]`, the right child covers `[j+1:l]`, and the
//! node covers `[i:l]`. Bit 0 is the least significant bit.
//!
//! A circuit is *valid* once it holds a node for every output range `[0:i]`;
//! the generate signal of such a node is the carry out of bit `i`.

use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};

/// Widest circuit the word-level evaluator accepts.
pub const MAX_EVAL_WIDTH: usize = 128;

/// Dense node index within one circuit.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("invalid width {0}: a prefix circuit needs at least 2 bits")]
    InvalidWidth(usize),
    #[error("node {0} does not exist")]
    MissingNode(NodeId),
    #[error(
        "invalid prefix node ({left},{right}): right child starts at bit {right_lo}, expected {expected}"
    )]
    InvalidPrefixNode {
        left: NodeId,
        right: NodeId,
        right_lo: usize,
        expected: usize,
    },
    #[error("circuit is not a valid prefix circuit; missing output ranges {0}")]
    NotValid(String),
    #[error("operand {value:#x} does not fit in {width} bits")]
    OperandRange { value: u128, width: usize },
    #[error("width {0} exceeds the evaluator limit of {MAX_EVAL_WIDTH} bits")]
    WidthTooLarge(usize),
    #[error("delay {delay} is infeasible for width {width}; at least {min} logic levels are needed")]
    InfeasibleDelay {
        width: usize,
        delay: u32,
        min: u32,
    },
}

/// An inclusive bit range `[lo:hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitRange {
    pub lo: usize,
    pub hi: usize,
}

impl BitRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi, "bit range [{lo}:{hi}] is reversed");
        BitRange { lo, hi }
    }

    pub fn single(bit: usize) -> Self {
        BitRange { lo: bit, hi: bit }
    }

    /// Range of the carry out of bit `hi`.
    pub fn output(hi: usize) -> Self {
        BitRange { lo: 0, hi }
    }

    pub fn is_output(&self) -> bool {
        self.lo == 0
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for BitRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}:{}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Input,
    Prefix { left: NodeId, right: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeRecord {
    pub id: NodeId,
    pub kind: NodeKind,
    pub range: BitRange,
    /// Logic level; input nodes sit at level 1.
    pub level: u32,
}

impl NodeRecord {
    pub fn children(&self) -> Option<(NodeId, NodeId)> {
        match self.kind {
            NodeKind::Input => None,
            NodeKind::Prefix { left, right } => Some((left, right)),
        }
    }

    pub fn is_input(&self) -> bool {
        matches!(self.kind, NodeKind::Input)
    }
}

/// Area (node count, inputs included) and delay (maximum logic level).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Metrics {
    pub area: usize,
    pub delay: u32,
}

impl Metrics {
    pub fn new(area: usize, delay: u32) -> Self {
        Metrics { area, delay }
    }

    /// Pareto dominance on (area, delay), both minimized.
    pub fn dominates(&self, other: &Metrics) -> bool {
        self.area <= other.area
            && self.delay <= other.delay
            && (self.area < other.area || self.delay < other.delay)
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "area={} delay={}", self.area, self.delay)
    }
}

/// A (possibly partial) prefix circuit. Nodes are append-only, so indices
/// stay stable for the life of the value.
#[derive(Debug, Clone)]
pub struct PrefixCircuit {
    width: usize,
    nodes: Vec<NodeRecord>,
    pairs: HashMap<(NodeId, NodeId), NodeId>,
}

impl PartialEq for PrefixCircuit {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.nodes == other.nodes
    }
}

impl Eq for PrefixCircuit {}

impl PrefixCircuit {
    /// A partial circuit holding only the `width` input nodes.
    pub fn new(width: usize) -> Result<Self, CircuitError> {
        if width < 2 {
            return Err(CircuitError::InvalidWidth(width));
        }
        let nodes = (0..width)
            .map(|i| NodeRecord {
                id: i,
                kind: NodeKind::Input,
                range: BitRange::single(i),
                level: 1,
            })
            .collect();
        Ok(PrefixCircuit {
            width,
            nodes,
            pairs: HashMap::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn prefix_count(&self) -> usize {
        self.nodes.len() - self.width
    }

    /// Index of the node built from exactly this `(left, right)` pair.
    pub fn find_pair(&self, left: NodeId, right: NodeId) -> Option<NodeId> {
        self.pairs.get(&(left, right)).copied()
    }

    /// Range and level the node `(left, right)` would get, without adding it.
    pub fn probe(&self, left: NodeId, right: NodeId) -> Result<(BitRange, u32), CircuitError> {
        let l = self.nodes.get(left).ok_or(CircuitError::MissingNode(left))?;
        let r = self
            .nodes
            .get(right)
            .ok_or(CircuitError::MissingNode(right))?;
        if r.range.lo != l.range.hi + 1 {
            return Err(CircuitError::InvalidPrefixNode {
                left,
                right,
                right_lo: r.range.lo,
                expected: l.range.hi + 1,
            });
        }
        Ok((
            BitRange::new(l.range.lo, r.range.hi),
            l.level.max(r.level) + 1,
        ))
    }

    /// Appends the prefix node combining `left` (less significant) with
    /// `right` (more significant). Re-adding an existing pair returns the
    /// existing node.
    pub fn add_prefix_node(&mut self, left: NodeId, right: NodeId) -> Result<NodeId, CircuitError> {
        let (range, level) = self.probe(left, right)?;
        if let Some(existing) = self.find_pair(left, right) {
            return Ok(existing);
        }
        let id = self.nodes.len();
        self.nodes.push(NodeRecord {
            id,
            kind: NodeKind::Prefix { left, right },
            range,
            level,
        });
        self.pairs.insert((left, right), id);
        Ok(id)
    }

    /// First node (lowest index) covering `range`, if any.
    pub fn find_range(&self, range: BitRange) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.range == range).map(|n| n.id)
    }

    /// Output ranges `[0:i]` no node covers yet, in ascending `i`.
    pub fn missing_output_ranges(&self) -> Vec<BitRange> {
        let mut covered = vec![false; self.width];
        for node in &self.nodes {
            if node.range.lo == 0 {
                covered[node.range.hi] = true;
            }
        }
        covered
            .iter()
            .enumerate()
            .filter(|(_, &c)| !c)
            .map(|(i, _)| BitRange::output(i))
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        self.missing_output_ranges().is_empty()
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            area: self.nodes.len(),
            delay: self.nodes.iter().map(|n| n.level).max().unwrap_or(1),
        }
    }

    /// For each bit `i`, the lowest-level node with range `[0:i]`.
    pub fn output_nodes(&self) -> Vec<Option<NodeId>> {
        let mut out: Vec<Option<NodeId>> = vec![None; self.width];
        for node in &self.nodes {
            if node.range.lo == 0 {
                let slot = &mut out[node.range.hi];
                match slot {
                    Some(prev) if self.nodes[*prev].level <= node.level => {}
                    _ => *slot = Some(node.id),
                }
            }
        }
        out
    }

    /// Carries `c_0..c_{n-1}` as a bit mask (bit `i` = carry out of bit `i`).
    ///
    /// Every node computes `(p, g)` over its range; a prefix node combines
    /// the more-significant child `(P_hi, G_hi)` with the less-significant
    /// child `(P_lo, G_lo)` as `G = G_hi | P_hi & G_lo`, `P = P_hi & P_lo`.
    pub fn evaluate_carries(&self, a: u128, b: u128) -> Result<u128, CircuitError> {
        if self.width > MAX_EVAL_WIDTH {
            return Err(CircuitError::WidthTooLarge(self.width));
        }
        for v in [a, b] {
            if self.width < 128 && v >> self.width != 0 {
                return Err(CircuitError::OperandRange {
                    value: v,
                    width: self.width,
                });
            }
        }
        let outputs = self.output_nodes();
        if outputs.iter().any(Option::is_none) {
            return Err(CircuitError::NotValid(format_ranges(
                &self.missing_output_ranges(),
            )));
        }
        let signals = self.propagate_generate(a, b);
        let mut carries = 0u128;
        for (i, node) in outputs.iter().enumerate() {
            let (_, g) = signals[node.expect("checked above")];
            if g {
                carries |= 1 << i;
            }
        }
        Ok(carries)
    }

    /// `(p, g)` of every node for one operand pair. No validity requirement.
    pub fn propagate_generate(&self, a: u128, b: u128) -> Vec<(bool, bool)> {
        let mut signals = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let pg = match node.kind {
                NodeKind::Input => {
                    let ai = (a >> node.id) & 1 == 1;
                    let bi = (b >> node.id) & 1 == 1;
                    (ai ^ bi, ai & bi)
                }
                NodeKind::Prefix { left, right } => {
                    let (p_lo, g_lo) = signals[left];
                    let (p_hi, g_hi) = signals[right];
                    (p_hi & p_lo, g_hi | (p_hi & g_lo))
                }
            };
            signals.push(pg);
        }
        signals
    }

    /// Sum word and carry-out computed through the prefix network.
    pub fn add(&self, a: u128, b: u128) -> Result<(u128, bool), CircuitError> {
        let carries = self.evaluate_carries(a, b)?;
        let propagate = a ^ b;
        let sum = propagate ^ (carries << 1);
        let sum = if self.width < 128 {
            sum & ((1u128 << self.width) - 1)
        } else {
            sum
        };
        Ok((sum, (carries >> (self.width - 1)) & 1 == 1))
    }

    /// Key shared by circuits that differ only in node numbering.
    pub fn canonical_key(&self) -> String {
        let mut tuples: Vec<(BitRange, Option<(BitRange, BitRange)>, u32)> = self
            .nodes
            .iter()
            .map(|n| {
                let kids = n
                    .children()
                    .map(|(l, r)| (self.nodes[l].range, self.nodes[r].range));
                (n.range, kids, n.level)
            })
            .collect();
        tuples.sort();
        let mut hasher = Sha256::new();
        hasher.update(format!("n={};", self.width));
        for (range, kids, level) in tuples {
            match kids {
                Some((l, r)) => hasher.update(format!("{range}<{l}{r}@{level};")),
                None => hasher.update(format!("{range}@{level};")),
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Swaps the children of a prefix node without re-deriving ranges. The
    /// result breaks the significance order and exists for mutation tests.
    #[doc(hidden)]
    pub fn swap_children_unchecked(&mut self, id: NodeId) {
        if let NodeKind::Prefix { left, right } = self.nodes[id].kind {
            self.pairs.remove(&(left, right));
            self.pairs.insert((right, left), id);
            self.nodes[id].kind = NodeKind::Prefix {
                left: right,
                right: left,
            };
        }
    }
}

pub(crate) fn format_ranges(ranges: &[BitRange]) -> String {
    ranges
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// `⌈log2 n⌉`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Smallest delay any valid circuit of this width can reach.
pub fn min_delay(width: usize) -> u32 {
    ceil_log2(width) + 1
}

/// Carries by grade-school ripple propagation, independent of any circuit.
pub fn ripple_oracle(a: u128, b: u128, width: usize) -> u128 {
    let mut carry = false;
    let mut carries = 0u128;
    for i in 0..width.min(128) {
        let ai = (a >> i) & 1 == 1;
        let bi = (b >> i) & 1 == 1;
        carry = (ai & bi) | (ai & carry) | (bi & carry);
        if carry {
            carries |= 1 << i;
        }
    }
    carries
}

/// Theoretical minimum area (nodes, inputs included) of a width-`n`
/// circuit with the given delay: `3n - 2 - delay`.
pub fn area_lower_bound(width: usize, delay: u32) -> Result<usize, CircuitError> {
    let min = min_delay(width);
    if delay < min {
        return Err(CircuitError::InfeasibleDelay {
            width,
            delay,
            min,
        });
    }
    Ok((3 * width).saturating_sub(2 + delay as usize))
}
