use std::path::Path;

use anyhow::Context;
use prefixforge_core::proposer::LlmEndpointConfig;
use serde::Deserialize;

/// Settings file. Every field is optional; command-line flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub llm: LlmEndpointConfig,
    pub dse: DseSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DseSection {
    pub iters: usize,
    pub top_k: usize,
    pub max_rounds: usize,
    pub stall_cap: usize,
    pub fallback: bool,
}

impl Default for DseSection {
    fn default() -> Self {
        DseSection {
            iters: 20,
            top_k: 10,
            max_rounds: 20,
            stall_cap: 5,
            fallback: true,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
