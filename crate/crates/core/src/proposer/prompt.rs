//! Prompt construction. Templates live next to this file as text assets with
//! named `{slot}` placeholders; everything else in a prompt is fixed.

use crate::circuit::{format_ranges, min_delay, BitRange, PrefixCircuit};
use crate::spcr::{serialize, Variant};

use super::{ProposerContext, ProposerError, SearchMode};

/// Bumped whenever template wording changes; recorded in run logs.
pub const TEMPLATE_VERSION: &str = "spcr-prompts/1";

const SPCR_TEMPLATE: &str = include_str!("templates/spcr_prompt.txt");
const DSE_TEMPLATE: &str = include_str!("templates/dse_prompt.txt");
const POOL_ENTRY_TEMPLATE: &str = include_str!("templates/pool_entry.txt");

const LEVEL_RULES: &str = "Step 3. Derive the level of the new node as one more than the larger level of the two selected nodes, and append it as `, level=<k>`.\n\
A new node is only allowed if its level is at most {delay_bound}.\n";

const AREA_RULES: &str = "The finished circuit may contain at most {area_bound} nodes in total, including input nodes.\n";

/// One circuit shown to the proposer as prior art.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestEntry {
    pub spcr: String,
    pub area: usize,
    pub delay: u32,
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

fn missing_text(missing: &[BitRange]) -> String {
    format_ranges(missing)
}

fn check_delay_bound(circuit: &PrefixCircuit, bound: u32) -> Result<(), ProposerError> {
    let min = min_delay(circuit.width());
    if bound < min {
        return Err(ProposerError::InfeasibleBound {
            width: circuit.width(),
            bound,
            min,
        });
    }
    Ok(())
}

fn core_prompt(ctx: &ProposerContext, variant: Variant) -> Result<String, ProposerError> {
    if ctx.missing.is_empty() {
        return Err(ProposerError::NothingMissing);
    }
    let extra = match ctx.mode {
        SearchMode::DelayLimited { max_delay } => {
            fill(LEVEL_RULES, &[("delay_bound", &max_delay.to_string())])
        }
        SearchMode::AreaLimited { max_area } => {
            fill(AREA_RULES, &[("area_bound", &max_area.to_string())])
        }
        SearchMode::PlainSynthesis => String::new(),
    };
    Ok(fill(
        SPCR_TEMPLATE,
        &[
            ("width", &ctx.circuit.width().to_string()),
            ("spcr", &serialize(&ctx.circuit, variant)),
            ("missing_ranges", &missing_text(&ctx.missing)),
            ("extra_rules", &extra),
            ("next_index", &ctx.circuit.len().to_string()),
        ],
    ))
}

/// Prompt asking for valid prefix nodes that close the lacking ranges.
pub fn build_spcr_prompt(ctx: &ProposerContext) -> Result<String, ProposerError> {
    if ctx.mode != SearchMode::PlainSynthesis {
        return Err(ProposerError::WrongMode("SPCR prompt needs plain synthesis mode"));
    }
    core_prompt(ctx, Variant::Plain)
}

fn dse_prompt(ctx: &ProposerContext, variant: Variant) -> Result<String, ProposerError> {
    let digest = match &ctx.pool_digest {
        Some(d) if !d.is_empty() => d,
        _ => return Err(ProposerError::EmptyPool),
    };
    let entries: String = digest
        .iter()
        .enumerate()
        .map(|(i, e)| {
            fill(
                POOL_ENTRY_TEMPLATE,
                &[
                    ("rank", &(i + 1).to_string()),
                    ("area", &e.area.to_string()),
                    ("delay", &e.delay.to_string()),
                    ("spcr", e.spcr.trim_end()),
                ],
            )
        })
        .collect();
    let (objective, target) = match ctx.mode {
        SearchMode::DelayLimited { max_delay } => (
            format!("Goal: minimize area while keeping delay at most {max_delay}."),
            "area",
        ),
        SearchMode::AreaLimited { max_area } => (
            format!("Goal: minimize delay while keeping area at most {max_area}."),
            "delay",
        ),
        SearchMode::PlainSynthesis => {
            return Err(ProposerError::WrongMode("DSE prompt needs an optimization mode"))
        }
    };
    let inner = core_prompt(ctx, variant)?;
    Ok(fill(
        DSE_TEMPLATE,
        &[
            ("width", &ctx.circuit.width().to_string()),
            ("objective", &objective),
            ("pool_entries", &entries),
            ("target_metric", target),
            ("spcr_prompt", &inner),
        ],
    ))
}

/// Pool-guided prompt for either optimization mode.
pub fn build_dse_prompt(ctx: &ProposerContext) -> Result<String, ProposerError> {
    if let SearchMode::DelayLimited { max_delay } = ctx.mode {
        check_delay_bound(&ctx.circuit, max_delay)?;
    }
    dse_prompt(ctx, Variant::Plain)
}

/// DSE prompt in which every circuit carries per-node levels and the bound
/// on them is stated.
pub fn build_delay_limited_prompt(ctx: &ProposerContext) -> Result<String, ProposerError> {
    let SearchMode::DelayLimited { max_delay } = ctx.mode else {
        return Err(ProposerError::WrongMode("delay-limited prompt needs a delay bound"));
    };
    check_delay_bound(&ctx.circuit, max_delay)?;
    dse_prompt(ctx, Variant::WithDelay)
}

/// Picks the prompt matching the context's mode.
pub fn build_prompt(ctx: &ProposerContext) -> Result<String, ProposerError> {
    match ctx.mode {
        SearchMode::PlainSynthesis => build_spcr_prompt(ctx),
        SearchMode::DelayLimited { .. } => build_delay_limited_prompt(ctx),
        SearchMode::AreaLimited { .. } => build_dse_prompt(ctx),
    }
}
