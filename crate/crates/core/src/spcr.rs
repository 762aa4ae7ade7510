//! Structured Prefix Circuit Representation (SPCR).
//!
//! One line per node, in index order:
//!
//! ```text
//! 0: connectedNodes=(None,None), range=[0:0], left_bound=0, right_bound=0
//! 4: connectedNodes=(0,1), range=[0:1], left_bound=0, right_bound=1
//! ```
//!
//! The Delay-SPCR variant appends `, level=<k>` to every line. Files use
//! UTF-8 with LF line endings and the `.spcr` extension.
//!
//! Besides the strict file grammar this module holds the tolerant extractor
//! for proposer responses and the pruner that filters proposed nodes.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;

use crate::circuit::{BitRange, CircuitError, NodeId, NodeKind, PrefixCircuit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    WithDelay,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty SPCR document")]
    EmptyDocument,
    #[error("line {line}: syntax error: {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: expected node index {expected}, found {found}")]
    NonDenseIndex {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: input node {index} after the first prefix node")]
    MisplacedInput { line: usize, index: usize },
    #[error("line {line}: predecessor {node} is not defined on an earlier line")]
    UnknownPredecessor { line: usize, node: NodeId },
    #[error("line {line}: ({left},{right}) violates adjacency, right child starts at {right_lo} but left child ends at {left_hi}")]
    NonAdjacent {
        line: usize,
        left: NodeId,
        right: NodeId,
        left_hi: usize,
        right_lo: usize,
    },
    #[error("line {line}: claimed range {claimed} but predecessors give {actual}")]
    InconsistentRange {
        line: usize,
        claimed: BitRange,
        actual: BitRange,
    },
    #[error("line {line}: left_bound/right_bound disagree with range {range}")]
    InconsistentBounds { line: usize, range: BitRange },
    #[error("line {line}: claimed level {claimed} but predecessors give {actual}")]
    InconsistentLevel {
        line: usize,
        claimed: u32,
        actual: u32,
    },
    #[error("line {line}: duplicate of node {existing}")]
    DuplicateNode { line: usize, existing: NodeId },
    #[error("document has {0} input node(s); at least 2 are required")]
    TooFewInputs(usize),
}

/// Renders one node as an SPCR line (no trailing newline).
pub fn node_line(c: &PrefixCircuit, id: NodeId, variant: Variant) -> String {
    let node = &c.nodes()[id];
    let mut line = match node.kind {
        NodeKind::Input => format!("{id}: connectedNodes=(None,None)"),
        NodeKind::Prefix { left, right } => format!("{id}: connectedNodes=({left},{right})"),
    };
    let r = node.range;
    write!(
        line,
        ", range=[{}:{}], left_bound={}, right_bound={}",
        r.lo, r.hi, r.lo, r.hi
    )
    .expect("writing to a String");
    if variant == Variant::WithDelay {
        write!(line, ", level={}", node.level).expect("writing to a String");
    }
    line
}

/// Serializes the whole circuit, one LF-terminated line per node.
pub fn serialize(c: &PrefixCircuit, variant: Variant) -> String {
    let mut out = String::new();
    for id in 0..c.len() {
        out.push_str(&node_line(c, id, variant));
        out.push('\n');
    }
    out
}

fn file_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*(\d+)\s*:\s*connectedNodes\s*=\s*\(\s*(None|\d+)\s*,\s*(None|\d+)\s*\)\s*,\s*range\s*=\s*\[\s*(\d+)\s*:\s*(\d+)\s*\]\s*,\s*left_bound\s*=\s*(\d+)\s*,\s*right_bound\s*=\s*(\d+)\s*(?:,\s*level\s*=\s*(\d+)\s*)?$",
        )
        .expect("static regex")
    })
}

/// A parsed document: the circuit plus the variant its lines used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpcrDocument {
    pub circuit: PrefixCircuit,
    pub variant: Variant,
}

/// Parses an SPCR file into a circuit, re-deriving every range and level
/// from the predecessors and rejecting lines that claim otherwise.
pub fn parse(text: &str) -> Result<PrefixCircuit, ParseError> {
    parse_document(text).map(|d| d.circuit)
}

pub fn parse_document(text: &str) -> Result<SpcrDocument, ParseError> {
    struct Line {
        no: usize,
        index: usize,
        kids: Option<(usize, usize)>,
        range: BitRange,
        level: Option<u32>,
    }

    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let syntax = || ParseError::Syntax {
            line: no,
            text: raw.to_string(),
        };
        let caps = file_line_re().captures(raw).ok_or_else(syntax)?;
        let num = |k: usize| -> Result<usize, ParseError> {
            caps[k].parse::<usize>().map_err(|_| syntax())
        };
        let index = num(1)?;
        let kids = match (&caps[2], &caps[3]) {
            ("None", "None") => None,
            ("None", _) | (_, "None") => return Err(syntax()),
            _ => Some((num(2)?, num(3)?)),
        };
        let (lo, hi) = (num(4)?, num(5)?);
        if lo > hi {
            return Err(syntax());
        }
        let range = BitRange::new(lo, hi);
        if num(6)? != lo || num(7)? != hi {
            return Err(ParseError::InconsistentBounds { line: no, range });
        }
        let level = match caps.get(8) {
            Some(m) => Some(m.as_str().parse::<u32>().map_err(|_| syntax())?),
            None => None,
        };
        lines.push(Line {
            no,
            index,
            kids,
            range,
            level,
        });
    }
    if lines.is_empty() {
        return Err(ParseError::EmptyDocument);
    }

    for (expected, l) in lines.iter().enumerate() {
        if l.index != expected {
            return Err(ParseError::NonDenseIndex {
                line: l.no,
                expected,
                found: l.index,
            });
        }
    }
    let width = lines.iter().take_while(|l| l.kids.is_none()).count();
    if width < 2 {
        return Err(ParseError::TooFewInputs(width));
    }
    let mut circuit = PrefixCircuit::new(width).map_err(|_| ParseError::TooFewInputs(width))?;
    let variant = if lines.iter().all(|l| l.level.is_some()) {
        Variant::WithDelay
    } else {
        Variant::Plain
    };

    for l in &lines {
        let (range, level) = match l.kids {
            None if l.index < width => (BitRange::single(l.index), 1),
            None => {
                return Err(ParseError::MisplacedInput {
                    line: l.no,
                    index: l.index,
                })
            }
            Some((left, right)) => {
                let (range, level) = circuit.probe(left, right).map_err(|e| match e {
                    CircuitError::MissingNode(node) => ParseError::UnknownPredecessor {
                        line: l.no,
                        node,
                    },
                    CircuitError::InvalidPrefixNode {
                        right_lo, expected, ..
                    } => ParseError::NonAdjacent {
                        line: l.no,
                        left,
                        right,
                        left_hi: expected - 1,
                        right_lo,
                    },
                    _ => unreachable!("probe only reports missing or invalid nodes"),
                })?;
                if let Some(existing) = circuit.find_pair(left, right) {
                    return Err(ParseError::DuplicateNode {
                        line: l.no,
                        existing,
                    });
                }
                circuit
                    .add_prefix_node(left, right)
                    .expect("probed successfully");
                (range, level)
            }
        };
        if l.range != range {
            return Err(ParseError::InconsistentRange {
                line: l.no,
                claimed: l.range,
                actual: range,
            });
        }
        if let Some(claimed) = l.level {
            if claimed != level {
                return Err(ParseError::InconsistentLevel {
                    line: l.no,
                    claimed,
                    actual: level,
                });
            }
        }
    }
    Ok(SpcrDocument { circuit, variant })
}

/// A node addition proposed in free-form text, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateNode {
    /// Index the proposer gave the node, if the line carried one.
    pub claimed_index: Option<usize>,
    pub left: usize,
    pub right: usize,
    pub claimed_range: Option<BitRange>,
    pub claimed_level: Option<u32>,
    pub source_line: String,
}

/// One node-shaped line of a proposer response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateLine {
    Parsed(CandidateNode),
    /// Mentions `connectedNodes` but not as two distinct node indices.
    Unparseable(String),
}

impl CandidateLine {
    pub fn source_line(&self) -> &str {
        match self {
            CandidateLine::Parsed(c) => &c.source_line,
            CandidateLine::Unparseable(s) => s,
        }
    }
}

fn pair_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"connectedNodes\s*[=:]\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)").expect("static regex")
    })
}

fn index_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^[\s>*#`-]*(?:\*\*)?(?:[Nn]ode\s*(?:[Ii]ndex\s*)?)?[:=]?\s*(\d+)(?:\*\*)?\s*[:.)\-]")
            .expect("static regex")
    })
}

fn range_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"range\s*[=:]\s*\[\s*(\d+)\s*:\s*(\d+)\s*\]").expect("static regex")
    })
}

fn level_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\blevel\s*[=:]\s*(\d+)").expect("static regex"))
}

/// Scans a proposer response for node-shaped lines, in order. Prose, code
/// fences and blank lines are skipped.
pub fn extract_candidates(response: &str) -> Vec<CandidateLine> {
    let mut out = Vec::new();
    for raw in response.lines() {
        if !raw.contains("connectedNodes") {
            continue;
        }
        let line = raw.trim().to_string();
        let Some(caps) = pair_re().captures(raw) else {
            out.push(CandidateLine::Unparseable(line));
            continue;
        };
        let (Ok(left), Ok(right)) = (caps[1].parse::<usize>(), caps[2].parse::<usize>()) else {
            out.push(CandidateLine::Unparseable(line));
            continue;
        };
        if left == right {
            out.push(CandidateLine::Unparseable(line));
            continue;
        }
        let claimed_index = index_re()
            .captures(raw)
            .and_then(|c| c[1].parse::<usize>().ok());
        let claimed_range = range_re().captures(raw).and_then(|c| {
            let lo = c[1].parse::<usize>().ok()?;
            let hi = c[2].parse::<usize>().ok()?;
            (lo <= hi).then(|| BitRange::new(lo, hi))
        });
        let claimed_level = level_re()
            .captures(raw)
            .and_then(|c| c[1].parse::<u32>().ok());
        out.push(CandidateLine::Parsed(CandidateNode {
            claimed_index,
            left,
            right,
            claimed_range,
            claimed_level,
            source_line: line,
        }));
    }
    out
}

/// Limit applied to every node the pruner accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Constraint {
    #[default]
    None,
    /// No node may exceed this logic level.
    MaxDelay(u32),
    /// The circuit may not grow beyond this many nodes.
    MaxArea(usize),
}

impl Constraint {
    pub fn delay_bound(&self) -> Option<u32> {
        match self {
            Constraint::MaxDelay(l) => Some(*l),
            _ => None,
        }
    }

    pub fn area_bound(&self) -> Option<usize> {
        match self {
            Constraint::MaxArea(a) => Some(*a),
            _ => None,
        }
    }

    pub fn admits(&self, metrics: crate::circuit::Metrics) -> bool {
        match *self {
            Constraint::None => true,
            Constraint::MaxDelay(l) => metrics.delay <= l,
            Constraint::MaxArea(a) => metrics.area <= a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    NonAdjacent,
    UnknownPredecessor,
    Duplicate,
    DelayBoundExceeded,
    AreaBoundExceeded,
    Unparseable,
}

/// A candidate that passed the pruner, with references resolved against
/// the circuit and the earlier accepted candidates of the same batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptedNode {
    /// Position of the line among the pruned candidates.
    pub position: usize,
    pub candidate: CandidateNode,
    pub left: NodeId,
    pub right: NodeId,
    /// Index the node receives when the batch is applied in order.
    pub index: NodeId,
    pub range: BitRange,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub position: usize,
    pub line: CandidateLine,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub accepted: Vec<AcceptedNode>,
    pub rejected: Vec<Rejection>,
}

impl PruneReport {
    /// Adds the accepted nodes to `c`, which must be the circuit the report
    /// was computed against.
    pub fn apply(&self, c: &mut PrefixCircuit) -> Result<(), CircuitError> {
        for a in &self.accepted {
            let id = c.add_prefix_node(a.left, a.right)?;
            debug_assert_eq!(id, a.index);
        }
        Ok(())
    }

    /// Per candidate line, in input order: `None` if accepted, otherwise the
    /// rejection reason.
    pub fn verdicts(&self) -> Vec<Option<RejectReason>> {
        let mut out = vec![None; self.accepted.len() + self.rejected.len()];
        for r in &self.rejected {
            out[r.position] = Some(r.reason);
        }
        out
    }
}

/// Filters a batch of candidates against `c`.
///
/// Candidates are considered left to right as if each accepted one were
/// added immediately. A reference to an index the circuit does not have is
/// resolved through the indices claimed by earlier lines of the batch, so a
/// response can build chains of new nodes.
pub fn prune(c: &PrefixCircuit, candidates: &[CandidateLine], constraint: Constraint) -> PruneReport {
    let base_len = c.len();
    let mut work = c.clone();
    let mut claimed: HashMap<usize, NodeId> = HashMap::new();
    let mut poisoned: HashSet<usize> = HashSet::new();
    let mut report = PruneReport::default();

    for (position, line) in candidates.iter().enumerate() {
        let cand = match line {
            CandidateLine::Parsed(cand) => cand,
            CandidateLine::Unparseable(_) => {
                report.rejected.push(Rejection {
                    position,
                    line: line.clone(),
                    reason: RejectReason::Unparseable,
                });
                continue;
            }
        };
        let fresh_claim = cand.claimed_index.filter(|&k| k >= base_len);
        let resolve = |r: usize| -> Option<NodeId> {
            if r < base_len {
                Some(r)
            } else {
                claimed.get(&r).copied()
            }
        };
        let verdict = match (resolve(cand.left), resolve(cand.right)) {
            (Some(left), Some(right)) => match work.probe(left, right) {
                Err(CircuitError::InvalidPrefixNode { .. }) => Err(RejectReason::NonAdjacent),
                Err(_) => Err(RejectReason::UnknownPredecessor),
                Ok((range, level)) => {
                    if let Some(existing) = work.find_pair(left, right) {
                        if let Some(k) = fresh_claim.filter(|k| !poisoned.contains(k)) {
                            claimed.entry(k).or_insert(existing);
                        }
                        Err(RejectReason::Duplicate)
                    } else if constraint.delay_bound().is_some_and(|l| level > l) {
                        Err(RejectReason::DelayBoundExceeded)
                    } else if constraint.area_bound().is_some_and(|a| work.len() + 1 > a) {
                        Err(RejectReason::AreaBoundExceeded)
                    } else {
                        Ok((left, right, range, level))
                    }
                }
            },
            _ => Err(RejectReason::UnknownPredecessor),
        };
        match verdict {
            Ok((left, right, range, level)) => {
                let index = work
                    .add_prefix_node(left, right)
                    .expect("probed successfully");
                if let Some(k) = fresh_claim {
                    if !poisoned.contains(&k) {
                        claimed.entry(k).or_insert(index);
                    }
                }
                report.accepted.push(AcceptedNode {
                    position,
                    candidate: cand.clone(),
                    left,
                    right,
                    index,
                    range,
                    level,
                });
            }
            Err(reason) => {
                // a rejected line's claimed index must not bind later references
                if let Some(k) = fresh_claim {
                    if reason != RejectReason::Duplicate && !claimed.contains_key(&k) {
                        poisoned.insert(k);
                    }
                }
                report.rejected.push(Rejection {
                    position,
                    line: line.clone(),
                    reason,
                });
            }
        }
    }
    report
}
