//! Sources of candidate prefix nodes.
//!
//! A [`Proposer`] turns a [`ProposerContext`] (the partial circuit, what it
//! still lacks, and optionally the best circuits found so far) into response
//! text holding SPCR lines. The text always goes through
//! [`crate::spcr::extract_candidates`] and the pruner, so a proposer cannot
//! corrupt the circuit no matter what it returns.

mod llm;
mod offline;
mod prompt;

use std::collections::VecDeque;

pub use llm::{
    llm_propose, Cassette, ChatMessage, ChatRequest, Exchange, HttpReply, HttpTransport, LlmClient,
    LlmEndpointConfig, LlmError, RecordingTransport, ReplayTransport, Transport, TransportError,
    DEFAULT_API_KEY_ENV,
};
pub use offline::{offline_propose, Objective, OfflineProposer, OfflineStrategy, SplitPreference};
pub use prompt::{
    build_delay_limited_prompt, build_dse_prompt, build_prompt, build_spcr_prompt, DigestEntry,
    TEMPLATE_VERSION,
};

use crate::circuit::{BitRange, PrefixCircuit};
use crate::spcr::Constraint;

/// What the search is optimizing, with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchMode {
    /// Any valid circuit will do.
    PlainSynthesis,
    /// Minimize area subject to delay <= `max_delay`.
    DelayLimited { max_delay: u32 },
    /// Minimize delay subject to area <= `max_area`.
    AreaLimited { max_area: usize },
}

impl SearchMode {
    pub fn constraint(&self) -> Constraint {
        match *self {
            SearchMode::PlainSynthesis => Constraint::None,
            SearchMode::DelayLimited { max_delay } => Constraint::MaxDelay(max_delay),
            SearchMode::AreaLimited { max_area } => Constraint::MaxArea(max_area),
        }
    }

    pub fn delay_bound(&self) -> Option<u32> {
        self.constraint().delay_bound()
    }
}

#[derive(Debug, Clone)]
pub struct ProposerContext {
    pub circuit: PrefixCircuit,
    pub missing: Vec<BitRange>,
    pub pool_digest: Option<Vec<DigestEntry>>,
    pub mode: SearchMode,
}

impl ProposerContext {
    pub fn new(circuit: PrefixCircuit, mode: SearchMode) -> Self {
        let missing = circuit.missing_output_ranges();
        ProposerContext {
            circuit,
            missing,
            pool_digest: None,
            mode,
        }
    }

    pub fn with_pool(mut self, digest: Vec<DigestEntry>) -> Self {
        self.pool_digest = Some(digest);
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProposerError {
    #[error("the circuit already covers every output range")]
    NothingMissing,
    #[error("delay bound {bound} is infeasible for width {width}; the minimum is {min}")]
    InfeasibleBound { width: usize, bound: u32, min: u32 },
    #[error("the circuit pool is empty; seed it before building a DSE prompt")]
    EmptyPool,
    #[error("{0}")]
    WrongMode(&'static str),
    #[error("no more scripted responses")]
    ScriptExhausted,
    #[error(transparent)]
    Llm(#[from] LlmError),
}

pub trait Proposer {
    fn name(&self) -> &str;

    fn propose(&mut self, ctx: &ProposerContext) -> Result<String, ProposerError>;

    /// Called by the DSE loop before each outer iteration.
    fn begin_iteration(&mut self, _iteration: usize) {}
}

/// Proposer backed by a chat-completions endpoint.
pub struct LlmProposer {
    client: LlmClient,
    /// Prompts sent so far, in order.
    pub transcript: Vec<String>,
}

impl LlmProposer {
    pub fn new(client: LlmClient) -> Self {
        LlmProposer {
            client,
            transcript: Vec::new(),
        }
    }
}

impl Proposer for LlmProposer {
    fn name(&self) -> &str {
        "llm"
    }

    fn propose(&mut self, ctx: &ProposerContext) -> Result<String, ProposerError> {
        let prompt = build_prompt(ctx)?;
        self.transcript.push(prompt.clone());
        Ok(self.client.complete(&prompt)?)
    }
}

/// Replays a fixed list of responses, one per call, ignoring the context.
#[derive(Debug, Clone, Default)]
pub struct ScriptedProposer {
    responses: VecDeque<String>,
}

impl ScriptedProposer {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedProposer {
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }
}

impl Proposer for ScriptedProposer {
    fn name(&self) -> &str {
        "scripted"
    }

    fn propose(&mut self, _ctx: &ProposerContext) -> Result<String, ProposerError> {
        self.responses
            .pop_front()
            .ok_or(ProposerError::ScriptExhausted)
    }
}
