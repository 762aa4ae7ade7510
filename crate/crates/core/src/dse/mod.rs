//! The two iterative loops.
//!
//! [`synthesize_valid`] grows a partial circuit until it covers every output
//! range: check what is missing, ask the proposer, extract and prune the
//! proposed nodes, apply the survivors, repeat. [`dse_run`] wraps it: every
//! iteration synthesizes a fresh circuit with the best pool entries in the
//! prompt and files the result into the pool.

mod pool;
mod sort;

pub use pool::{CircuitPool, InsertOutcome, PoolEntry, PoolError, INDEX_FILE};
pub use sort::{hypervolume, non_dominated_sort};

use crate::baselines::Topology;
use crate::circuit::{min_delay, Metrics, PrefixCircuit};
use crate::proposer::{
    offline_propose, DigestEntry, Proposer, ProposerContext, ProposerError, SearchMode,
};
use crate::spcr::{extract_candidates, prune, Constraint, RejectReason};

#[derive(Debug, thiserror::Error)]
pub enum DseError {
    #[error("delay bound {bound} is infeasible for width {width}; the minimum is {min}")]
    InfeasibleBound { width: usize, bound: u32, min: u32 },
    #[error("starting circuit already has delay {delay}, above the bound {bound}")]
    StartViolatesBound { delay: u32, bound: u32 },
    #[error("proposer failed and fallback is disabled: {0}")]
    ProposerFailed(#[source] ProposerError),
    #[error("no seed circuit satisfies the constraint")]
    NoFeasibleSeed,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Circuit(#[from] crate::circuit::CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisOptions {
    /// Proposer rounds before the offline completer takes over.
    pub max_rounds: usize,
    /// Consecutive rounds with nothing accepted before the offline completer
    /// takes over.
    pub stall_cap: usize,
    /// Complete offline when the proposer errors instead of failing.
    pub fallback: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            max_rounds: 20,
            stall_cap: 5,
            fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FallbackCause {
    RoundLimit,
    Stalled,
    ProposerFailed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundLog {
    pub source: String,
    pub accepted: usize,
    pub rejected: Vec<(RejectReason, String)>,
    pub missing_after: usize,
}

#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub circuit: PrefixCircuit,
    pub rounds: Vec<RoundLog>,
    pub fallback: Option<FallbackCause>,
}

impl SynthesisOutcome {
    /// Rounds answered by the configured proposer (fallback rounds excluded).
    pub fn proposer_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.source != "offline-fallback").count()
    }
}

fn check_bound(width: usize, mode: SearchMode) -> Result<(), DseError> {
    if let Some(bound) = mode.delay_bound() {
        let min = min_delay(width);
        if bound < min {
            return Err(DseError::InfeasibleBound { width, bound, min });
        }
    }
    Ok(())
}

fn run_round(
    circuit: &mut PrefixCircuit,
    response: &str,
    constraint: Constraint,
    source: &str,
) -> RoundLog {
    let candidates = extract_candidates(response);
    let report = prune(circuit, &candidates, constraint);
    report.apply(circuit).expect("pruned nodes always apply");
    RoundLog {
        source: source.to_string(),
        accepted: report.accepted.len(),
        rejected: report
            .rejected
            .iter()
            .map(|r| (r.reason, r.line.source_line().to_string()))
            .collect(),
        missing_after: circuit.missing_output_ranges().len(),
    }
}

/// Finishes `circuit` with the offline planner. The delay bound is honoured;
/// an area bound is not, since closing every output may need more nodes
/// than the bound allows (the pool rejects such results).
fn complete_offline(circuit: &mut PrefixCircuit, mode: SearchMode, rounds: &mut Vec<RoundLog>) -> Result<(), DseError> {
    let mode = match mode {
        SearchMode::AreaLimited { .. } => SearchMode::PlainSynthesis,
        m => m,
    };
    while !circuit.is_valid() {
        let ctx = ProposerContext::new(circuit.clone(), mode);
        let text = offline_propose(&ctx).map_err(|e| match e {
            ProposerError::InfeasibleBound { width, bound, min } => {
                DseError::InfeasibleBound { width, bound, min }
            }
            other => DseError::ProposerFailed(other),
        })?;
        let before = circuit.missing_output_ranges().len();
        let log = run_round(circuit, &text, mode.constraint(), "offline-fallback");
        assert!(log.missing_after < before, "offline planner made no progress");
        rounds.push(log);
    }
    Ok(())
}

/// Grows `start` into a valid circuit.
///
/// The proposer gets up to `opts.max_rounds` rounds; after that, after
/// `opts.stall_cap` consecutive rounds with nothing accepted, or when the
/// proposer errors, the offline planner completes the circuit. The result
/// is therefore always valid and within the mode's delay bound.
pub fn synthesize_valid(
    start: PrefixCircuit,
    proposer: &mut dyn Proposer,
    mode: SearchMode,
    pool_digest: Option<Vec<DigestEntry>>,
    opts: SynthesisOptions,
) -> Result<SynthesisOutcome, DseError> {
    check_bound(start.width(), mode)?;
    if let Some(bound) = mode.delay_bound() {
        let delay = start.metrics().delay;
        if delay > bound {
            return Err(DseError::StartViolatesBound { delay, bound });
        }
    }
    let mut circuit = start;
    let mut rounds = Vec::new();
    let mut stalled = 0;
    let mut fallback = None;

    while !circuit.is_valid() {
        if rounds.len() >= opts.max_rounds {
            fallback = Some(FallbackCause::RoundLimit);
            break;
        }
        if stalled >= opts.stall_cap {
            fallback = Some(FallbackCause::Stalled);
            break;
        }
        let mut ctx = ProposerContext::new(circuit.clone(), mode);
        if let Some(d) = &pool_digest {
            ctx = ctx.with_pool(d.clone());
        }
        let response = match proposer.propose(&ctx) {
            Ok(text) => text,
            Err(e) if opts.fallback => {
                log::warn!("proposer {} failed, completing offline: {e}", proposer.name());
                fallback = Some(FallbackCause::ProposerFailed(e.to_string()));
                break;
            }
            Err(e) => return Err(DseError::ProposerFailed(e)),
        };
        let log = run_round(&mut circuit, &response, mode.constraint(), proposer.name());
        stalled = if log.accepted == 0 { stalled + 1 } else { 0 };
        rounds.push(log);
    }
    if fallback.is_some() {
        complete_offline(&mut circuit, mode, &mut rounds)?;
    }
    Ok(SynthesisOutcome {
        circuit,
        rounds,
        fallback,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DseConfig {
    pub width: usize,
    pub mode: SearchMode,
    pub iteration_bound: usize,
    pub pool_top_k: usize,
    pub seeds: Vec<Topology>,
    pub synthesis: SynthesisOptions,
}

impl DseConfig {
    pub fn delay_limited(width: usize, max_delay: u32) -> Self {
        DseConfig {
            width,
            mode: SearchMode::DelayLimited { max_delay },
            iteration_bound: 20,
            pool_top_k: 10,
            seeds: vec![Topology::KoggeStone],
            synthesis: SynthesisOptions::default(),
        }
    }

    pub fn area_limited(width: usize, max_area: usize) -> Self {
        DseConfig {
            mode: SearchMode::AreaLimited { max_area },
            ..Self::delay_limited(width, 0)
        }
    }

    fn validate(&self) -> Result<(), DseError> {
        if self.iteration_bound == 0 {
            return Err(DseError::Config("iteration bound must be at least 1".into()));
        }
        if self.pool_top_k == 0 {
            return Err(DseError::Config("pool top-k must be at least 1".into()));
        }
        if self.mode == SearchMode::PlainSynthesis {
            return Err(DseError::Config("DSE needs a delay or area bound".into()));
        }
        check_bound(self.width, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub key: String,
    pub metrics: Metrics,
    pub outcome: InsertOutcome,
    pub proposer_rounds: usize,
    pub fallback: Option<FallbackCause>,
    /// Front-0 hypervolume after this iteration's insert.
    pub hypervolume: f64,
}

#[derive(Debug, Clone)]
pub struct DseResult {
    pub pool: CircuitPool,
    pub log: Vec<IterationLog>,
    /// Hypervolume reference: the first seed's metrics plus one on each axis.
    pub reference: Metrics,
}

/// Runs the pool-guided exploration loop for `cfg.iteration_bound`
/// iterations. Every outer iteration counts against the bound, whatever
/// the proposer did in it.
pub fn dse_run(cfg: &DseConfig, proposer: &mut dyn Proposer) -> Result<DseResult, DseError> {
    cfg.validate()?;
    let mut pool = CircuitPool::new(cfg.width, cfg.mode.constraint());
    for seed in &cfg.seeds {
        match seed.build(cfg.width) {
            Ok(c) => {
                pool.insert(c, None, seed.name());
            }
            Err(e) => log::warn!("seed {seed} skipped: {e}"),
        }
    }
    if pool.is_empty() {
        let mut c = PrefixCircuit::new(cfg.width)?;
        complete_offline(&mut c, cfg.mode, &mut Vec::new())?;
        pool.insert(c, None, "offline-seed");
    }
    let seed = pool.entries().first().ok_or(DseError::NoFeasibleSeed)?.metrics;
    let reference = Metrics::new(seed.area + 1, seed.delay + 1);

    let mut log = Vec::with_capacity(cfg.iteration_bound);
    for iteration in 0..cfg.iteration_bound {
        proposer.begin_iteration(iteration);
        let digest = pool.top_k(cfg.pool_top_k);
        let outcome = synthesize_valid(
            PrefixCircuit::new(cfg.width)?,
            proposer,
            cfg.mode,
            Some(digest),
            cfg.synthesis,
        )?;
        let metrics = outcome.circuit.metrics();
        let key = outcome.circuit.canonical_key();
        let origin = if outcome.fallback.is_some() {
            format!("{}+offline", proposer.name())
        } else {
            proposer.name().to_string()
        };
        let inserted = pool.insert(outcome.circuit.clone(), Some(iteration), &origin);
        log::info!("iteration {iteration}: {metrics} -> {inserted:?}");
        log.push(IterationLog {
            iteration,
            key,
            metrics,
            outcome: inserted,
            proposer_rounds: outcome.proposer_rounds(),
            fallback: outcome.fallback.clone(),
            hypervolume: pool.hypervolume(reference),
        });
    }
    Ok(DseResult {
        pool,
        log,
        reference,
    })
}
