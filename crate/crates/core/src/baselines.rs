//! Classical prefix topologies used as baselines and as pool seeds.

use std::fmt;
use std::str::FromStr;

use crate::circuit::{CircuitError, NodeId, PrefixCircuit};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BaselineError {
    #[error("{topology} needs a power-of-two width of at least 2, got {width}")]
    UnsupportedWidth { topology: Topology, width: usize },
    #[error("unknown topology {0:?} (expected sklansky, kogge-stone or brent-kung)")]
    UnknownTopology(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Topology {
    Sklansky,
    KoggeStone,
    BrentKung,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Sklansky, Topology::KoggeStone, Topology::BrentKung];

    pub fn name(&self) -> &'static str {
        match self {
            Topology::Sklansky => "sklansky",
            Topology::KoggeStone => "kogge-stone",
            Topology::BrentKung => "brent-kung",
        }
    }

    pub fn build(&self, width: usize) -> Result<PrefixCircuit, BaselineError> {
        match self {
            Topology::Sklansky => sklansky(width),
            Topology::KoggeStone => kogge_stone(width),
            Topology::BrentKung => brent_kung(width),
        }
    }

    /// Closed-form (prefix node count, delay) for a power-of-two width.
    pub fn expected_shape(&self, width: usize) -> (usize, u32) {
        let log = width.trailing_zeros();
        let l = log as usize;
        match self {
            Topology::Sklansky => (width / 2 * l, log + 1),
            Topology::KoggeStone => (width * l - width + 1, log + 1),
            // the down-sweep is empty at n=2, so the depth formula bottoms out at 2
            Topology::BrentKung => (2 * width - 2 - l, (2 * log).saturating_sub(1).max(2)),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topology {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sklansky" => Ok(Topology::Sklansky),
            "kogge-stone" | "koggestone" => Ok(Topology::KoggeStone),
            "brent-kung" | "brentkung" => Ok(Topology::BrentKung),
            _ => Err(BaselineError::UnknownTopology(s.to_string())),
        }
    }
}

fn check_width(topology: Topology, width: usize) -> Result<PrefixCircuit, BaselineError> {
    if width < 2 || !width.is_power_of_two() {
        return Err(BaselineError::UnsupportedWidth { topology, width });
    }
    Ok(PrefixCircuit::new(width)?)
}

/// Divide and conquer: at each stage the upper half of every block combines
/// with the node spanning the lower half of that block.
pub fn sklansky(width: usize) -> Result<PrefixCircuit, BaselineError> {
    let mut c = check_width(Topology::Sklansky, width)?;
    // span[i] = node currently covering [block base : i]
    let mut span: Vec<NodeId> = (0..width).collect();
    let mut half = 1;
    while half < width {
        let block = half * 2;
        for base in (0..width).step_by(block) {
            let mid = base + half - 1;
            for i in base + half..base + block {
                span[i] = c.add_prefix_node(span[mid], span[i])?;
            }
        }
        half = block;
    }
    Ok(c)
}

/// Recursive doubling: at distance `d` every position `i >= d` extends its
/// span with the span ending at `i - d`.
pub fn kogge_stone(width: usize) -> Result<PrefixCircuit, BaselineError> {
    let mut c = check_width(Topology::KoggeStone, width)?;
    let mut span: Vec<NodeId> = (0..width).collect();
    let mut dist = 1;
    while dist < width {
        let prev = span.clone();
        for i in dist..width {
            span[i] = c.add_prefix_node(prev[i - dist], prev[i])?;
        }
        dist *= 2;
    }
    Ok(c)
}

/// Up-sweep reduction tree followed by the down-sweep that fills in the
/// remaining outputs.
pub fn brent_kung(width: usize) -> Result<PrefixCircuit, BaselineError> {
    let mut c = check_width(Topology::BrentKung, width)?;
    let mut span: Vec<NodeId> = (0..width).collect();
    let mut stride = 2;
    while stride <= width {
        let half = stride / 2;
        for i in (stride - 1..width).step_by(stride) {
            span[i] = c.add_prefix_node(span[i - half], span[i])?;
        }
        stride *= 2;
    }
    let mut stride = width / 2;
    while stride >= 2 {
        let half = stride / 2;
        for i in (stride + half - 1..width).step_by(stride) {
            span[i] = c.add_prefix_node(span[i - half], span[i])?;
        }
        stride /= 2;
    }
    Ok(c)
}
