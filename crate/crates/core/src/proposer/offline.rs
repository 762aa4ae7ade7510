//! Deterministic proposer used offline, as a baseline, and as the fallback
//! that guarantees the synthesis loop terminates.
//!
//! Each call closes the smallest lacking output range `[0:t]`. It plans the
//! cheapest way to build a node for that range out of existing nodes (new
//! intermediate nodes are planned recursively) and emits the planned nodes
//! as SPCR lines in dependency order. Under a delay bound every planned node
//! stays within the bound; a plan always exists once the bound reaches
//! `ceil(log2 n) + 1`, since a balanced tree over the inputs fits.

use std::collections::HashMap;

use crate::circuit::{min_delay, BitRange, NodeId, PrefixCircuit};

use super::{Proposer, ProposerContext, ProposerError, SearchMode};

/// What the planner minimizes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// New nodes first, then level.
    FewestNodes,
    /// Level first, then new nodes.
    LowestLevel,
}

/// Tie-break between equally good split points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitPreference {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OfflineStrategy {
    pub objective: Objective,
    pub split: SplitPreference,
}

impl OfflineStrategy {
    /// Lowest level, smaller split point first under a delay bound; fewest
    /// new nodes, longest reusable prefix first otherwise.
    pub fn for_mode(mode: SearchMode) -> Self {
        match mode {
            SearchMode::DelayLimited { .. } => OfflineStrategy {
                objective: Objective::LowestLevel,
                split: SplitPreference::Low,
            },
            _ => OfflineStrategy {
                objective: Objective::FewestNodes,
                split: SplitPreference::High,
            },
        }
    }

    /// All four strategies, mode default first.
    pub fn rotation(mode: SearchMode) -> [OfflineStrategy; 4] {
        let first = Self::for_mode(mode);
        let mut all = [first; 4];
        let mut i = 1;
        for objective in [Objective::FewestNodes, Objective::LowestLevel] {
            for split in [SplitPreference::High, SplitPreference::Low] {
                let s = OfflineStrategy { objective, split };
                if s != first {
                    all[i] = s;
                    i += 1;
                }
            }
        }
        all
    }
}

#[derive(Debug, Clone, Copy)]
enum Choice {
    Existing(NodeId),
    /// Left child covers `[lo:split]`, right child `[split+1:hi]`.
    Split(usize),
}

#[derive(Debug, Clone, Copy)]
struct Plan {
    cost: usize,
    level: u32,
    choice: Choice,
}

struct Planner<'a> {
    circuit: &'a PrefixCircuit,
    strategy: OfflineStrategy,
    /// Lowest-level existing node for each range.
    existing: HashMap<BitRange, (NodeId, u32)>,
    memo: HashMap<(usize, usize, u32), Option<Plan>>,
}

impl<'a> Planner<'a> {
    fn new(circuit: &'a PrefixCircuit, strategy: OfflineStrategy) -> Self {
        let mut existing: HashMap<BitRange, (NodeId, u32)> = HashMap::new();
        for n in circuit.nodes() {
            let e = existing.entry(n.range).or_insert((n.id, n.level));
            if n.level < e.1 {
                *e = (n.id, n.level);
            }
        }
        Planner {
            circuit,
            strategy,
            existing,
            memo: HashMap::new(),
        }
    }

    fn rank(&self, p: &Plan) -> (usize, usize, usize) {
        let split = match p.choice {
            Choice::Existing(_) => 0,
            Choice::Split(m) => match self.strategy.split {
                SplitPreference::Low => m + 1,
                SplitPreference::High => usize::MAX - m,
            },
        };
        match self.strategy.objective {
            Objective::FewestNodes => (p.cost, p.level as usize, split),
            Objective::LowestLevel => (p.level as usize, p.cost, split),
        }
    }

    fn plan(&mut self, lo: usize, hi: usize, cap: u32) -> Option<Plan> {
        if cap == 0 {
            return None;
        }
        if let Some(p) = self.memo.get(&(lo, hi, cap)) {
            return *p;
        }
        let mut best: Option<Plan> = None;
        let consider = |planner: &Self, p: Plan, best: &mut Option<Plan>| {
            if best.is_none_or(|b| planner.rank(&p) < planner.rank(&b)) {
                *best = Some(p);
            }
        };
        if let Some(&(id, level)) = self.existing.get(&BitRange::new(lo, hi)) {
            if level <= cap {
                consider(
                    self,
                    Plan {
                        cost: 0,
                        level,
                        choice: Choice::Existing(id),
                    },
                    &mut best,
                );
            }
        }
        if lo < hi && cap >= 2 {
            for m in lo..hi {
                let Some(l) = self.plan(lo, m, cap - 1) else { continue };
                let Some(r) = self.plan(m + 1, hi, cap - 1) else { continue };
                consider(
                    self,
                    Plan {
                        cost: l.cost + r.cost + 1,
                        level: l.level.max(r.level) + 1,
                        choice: Choice::Split(m),
                    },
                    &mut best,
                );
            }
        }
        self.memo.insert((lo, hi, cap), best);
        best
    }

    /// Emits the planned nodes for `[lo:hi]` in post order; returns the
    /// (existing or claimed) index and level of the node covering the range.
    fn emit(
        &mut self,
        lo: usize,
        hi: usize,
        cap: u32,
        next: &mut usize,
        with_level: bool,
        out: &mut Vec<String>,
        built: &mut HashMap<(NodeId, NodeId), NodeId>,
    ) -> (NodeId, u32) {
        let plan = self.plan(lo, hi, cap).expect("caller checked feasibility");
        match plan.choice {
            Choice::Existing(id) => (id, plan.level),
            Choice::Split(m) => {
                let (l, l_level) = self.emit(lo, m, cap - 1, next, with_level, out, built);
                let (r, r_level) = self.emit(m + 1, hi, cap - 1, next, with_level, out, built);
                let level = l_level.max(r_level) + 1;
                if let Some(id) = self.circuit.find_pair(l, r) {
                    return (id, level);
                }
                if let Some(&id) = built.get(&(l, r)) {
                    return (id, level);
                }
                let id = *next;
                *next += 1;
                built.insert((l, r), id);
                let mut line = format!(
                    "{id}: connectedNodes=({l},{r}), range=[{lo}:{hi}], left_bound={lo}, right_bound={hi}"
                );
                if with_level {
                    line.push_str(&format!(", level={level}"));
                }
                out.push(line);
                (id, level)
            }
        }
    }
}

/// SPCR lines closing the smallest lacking output range of `ctx.circuit`.
pub fn offline_propose(ctx: &ProposerContext) -> Result<String, ProposerError> {
    propose_with(ctx, OfflineStrategy::for_mode(ctx.mode))
}

fn propose_with(ctx: &ProposerContext, strategy: OfflineStrategy) -> Result<String, ProposerError> {
    let circuit = &ctx.circuit;
    let width = circuit.width();
    let target = *circuit
        .missing_output_ranges()
        .first()
        .ok_or(ProposerError::NothingMissing)?;
    let cap = match ctx.mode.delay_bound() {
        Some(bound) => {
            let min = min_delay(width);
            if bound < min {
                return Err(ProposerError::InfeasibleBound { width, bound, min });
            }
            bound
        }
        // a serial chain never needs more than `width` levels
        None => width as u32 + 1,
    };
    let mut planner = Planner::new(circuit, strategy);
    if planner.plan(target.lo, target.hi, cap).is_none() {
        return Err(ProposerError::InfeasibleBound {
            width,
            bound: cap,
            min: min_delay(width),
        });
    }
    let mut lines = Vec::new();
    let mut next = circuit.len();
    planner.emit(
        target.lo,
        target.hi,
        cap,
        &mut next,
        ctx.mode.delay_bound().is_some(),
        &mut lines,
        &mut HashMap::new(),
    );
    let mut out = lines.join("\n");
    out.push('\n');
    Ok(out)
}

/// [`Proposer`] wrapper around the offline planner.
#[derive(Debug, Clone, Default)]
pub struct OfflineProposer {
    strategy: Option<OfflineStrategy>,
    /// Cycle through [`OfflineStrategy::rotation`] across DSE iterations.
    rotate: bool,
    iteration: usize,
}

impl OfflineProposer {
    /// Uses the mode's default strategy.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_strategy(strategy: OfflineStrategy) -> Self {
        OfflineProposer {
            strategy: Some(strategy),
            ..Self::default()
        }
    }

    /// Varies the strategy per DSE iteration so successive iterations
    /// produce different circuits.
    pub fn rotating() -> Self {
        OfflineProposer {
            rotate: true,
            ..Self::default()
        }
    }

    fn strategy_for(&self, mode: SearchMode) -> OfflineStrategy {
        if let Some(s) = self.strategy {
            return s;
        }
        if self.rotate {
            let all = OfflineStrategy::rotation(mode);
            return all[self.iteration % all.len()];
        }
        OfflineStrategy::for_mode(mode)
    }
}

impl Proposer for OfflineProposer {
    fn name(&self) -> &str {
        "offline"
    }

    fn propose(&mut self, ctx: &ProposerContext) -> Result<String, ProposerError> {
        propose_with(ctx, self.strategy_for(ctx.mode))
    }

    fn begin_iteration(&mut self, iteration: usize) {
        self.iteration = iteration;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spcr::{extract_candidates, prune};

    fn run_to_fixpoint(width: usize, mode: SearchMode, strategy: OfflineStrategy) -> (PrefixCircuit, usize) {
        let mut c = PrefixCircuit::new(width).unwrap();
        let mut rounds = 0;
        while !c.is_valid() {
            let before = c.missing_output_ranges().len();
            let ctx = ProposerContext::new(c.clone(), mode);
            let text = propose_with(&ctx, strategy).unwrap();
            let report = prune(&c, &extract_candidates(&text), mode.constraint());
            assert!(report.rejected.is_empty(), "{:?}", report.rejected);
            report.apply(&mut c).unwrap();
            assert!(c.missing_output_ranges().len() < before);
            rounds += 1;
        }
        (c, rounds)
    }

    #[test]
    fn first_proposal_on_fresh_circuit() {
        let ctx = ProposerContext::new(PrefixCircuit::new(4).unwrap(), SearchMode::PlainSynthesis);
        assert_eq!(
            offline_propose(&ctx).unwrap(),
            "4: connectedNodes=(0,1), range=[0:1], left_bound=0, right_bound=1\n"
        );
    }

    #[test]
    fn unbounded_fixpoint_is_valid_within_2n_rounds() {
        let (c, rounds) = run_to_fixpoint(8, SearchMode::PlainSynthesis, OfflineStrategy::for_mode(SearchMode::PlainSynthesis));
        assert!(c.is_valid());
        assert!(rounds <= 16);
        // serial completion
        assert_eq!(c.metrics().area, 15);
    }

    #[test]
    fn bounded_fixpoint_respects_delay() {
        for width in [4usize, 5, 8, 11, 16] {
            let min = min_delay(width);
            for bound in min..=min + 3 {
                let mode = SearchMode::DelayLimited { max_delay: bound };
                for s in OfflineStrategy::rotation(mode) {
                    let (c, rounds) = run_to_fixpoint(width, mode, s);
                    assert!(c.is_valid());
                    assert!(c.metrics().delay <= bound, "n={width} L={bound} {s:?}");
                    assert!(rounds <= 2 * width);
                }
            }
        }
    }

    #[test]
    fn infeasible_bound_is_reported() {
        let ctx = ProposerContext::new(
            PrefixCircuit::new(8).unwrap(),
            SearchMode::DelayLimited { max_delay: 3 },
        );
        assert!(matches!(
            offline_propose(&ctx),
            Err(ProposerError::InfeasibleBound { bound: 3, min: 4, .. })
        ));
    }

    #[test]
    fn delay_limited_lines_carry_levels() {
        let ctx = ProposerContext::new(
            PrefixCircuit::new(8).unwrap(),
            SearchMode::DelayLimited { max_delay: 4 },
        );
        let text = offline_propose(&ctx).unwrap();
        assert!(text.lines().all(|l| l.contains(", level=")));
    }
}
