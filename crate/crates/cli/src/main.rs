mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use prefixforge_core::dse::{dse_run, synthesize_valid, CircuitPool, DseConfig, DseError, SynthesisOptions};
use prefixforge_core::proposer::{
    Cassette, HttpTransport, LlmClient, LlmProposer, OfflineProposer, Proposer, ProposerError,
    RecordingTransport, SearchMode,
};
use prefixforge_core::spcr::parse_document;
use prefixforge_core::{dot, report, rtl, serialize, verify_adder, PrefixCircuit, Topology, Variant};

use config::Config;

#[derive(Parser)]
#[command(name = "prefixforge", version, about = "Parallel prefix circuit synthesis and exploration")]
struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a classical prefix circuit.
    Gen {
        #[arg(value_parser = parse_topology)]
        topology: Topology,
        #[arg(long)]
        n: usize,
        /// Append levels to every line.
        #[arg(long)]
        with_delay: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Grow a valid circuit from bare inputs.
    Synth {
        #[arg(long)]
        n: usize,
        /// Stay within this many logic levels.
        #[arg(long)]
        delay: Option<u32>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Explore the area/delay trade-off under a bound.
    Dse {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Mode::DelayLimited)]
        mode: Mode,
        /// Delay bound for delay-limited mode.
        #[arg(long, required_if_eq("mode", "delay-limited"))]
        delay: Option<u32>,
        /// Area bound for area-limited mode.
        #[arg(long, required_if_eq("mode", "area-limited"))]
        area: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Seed topology; repeat for several.
        #[arg(long = "seed", value_parser = parse_topology)]
        seeds: Vec<Topology>,
        /// Directory to write the final pool to.
        #[arg(long)]
        pool_dir: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Check an SPCR file and print its metrics.
    Validate { file: PathBuf },
    /// Render an SPCR file as Verilog or Graphviz.
    Emit {
        #[arg(long, conflicts_with = "dot", required_unless_present = "dot")]
        verilog: bool,
        #[arg(long)]
        dot: bool,
        /// Verilog module name.
        #[arg(long, default_value = "prefix_adder")]
        module: String,
        file: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check the adder built on an SPCR circuit against integer addition.
    Verify {
        file: PathBuf,
        /// Random operand pairs for widths above the exhaustive limit.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Tabulate bounds, classical topologies and explored pools.
    Report {
        #[arg(long, value_delimiter = ',', required = true)]
        widths: Vec<usize>,
        /// Comma list; `a..b` expands to an inclusive range.
        #[arg(long, value_delimiter = ',', required = true)]
        delays: Vec<String>,
        /// Pool directories.
        #[arg(long, value_delimiter = ',')]
        pools: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    DelayLimited,
    AreaLimited,
}

#[derive(Args)]
struct SourceArgs {
    /// Ask the configured chat-completions endpoint for nodes.
    #[arg(long, conflicts_with = "offline")]
    llm: bool,
    /// Use the deterministic offline planner (default).
    #[arg(long)]
    offline: bool,
    /// Replay recorded endpoint responses instead of calling the network.
    #[arg(long, requires = "llm", conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Save every endpoint exchange to this file.
    #[arg(long, requires = "llm")]
    record: Option<PathBuf>,
    /// Fail instead of completing offline when the endpoint fails.
    #[arg(long)]
    no_fallback: bool,
}

fn parse_topology(s: &str) -> Result<Topology, String> {
    s.parse().map_err(|e: prefixforge_core::baselines::BaselineError| e.to_string())
}

/// Exit status paired with the error that caused it.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const VALIDATION: u8 = 1;
const INFEASIBLE: u8 = 2;
const ENDPOINT: u8 = 3;

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::new(VALIDATION, error)
    }
}

impl From<DseError> for Failure {
    fn from(e: DseError) -> Self {
        let code = match &e {
            DseError::InfeasibleBound { .. } | DseError::NoFeasibleSeed => INFEASIBLE,
            DseError::ProposerFailed(ProposerError::InfeasibleBound { .. }) => INFEASIBLE,
            DseError::ProposerFailed(ProposerError::Llm(_)) => ENDPOINT,
            _ => VALIDATION,
        };
        Failure::new(code, e)
    }
}

type CmdResult = Result<(), Failure>;

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_circuit(path: &Path) -> anyhow::Result<PrefixCircuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = parse_document(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(doc.circuit)
}

fn read_valid_circuit(path: &Path) -> anyhow::Result<PrefixCircuit> {
    let c = read_circuit(path)?;
    if !c.is_valid() {
        return Err(anyhow!(
            "{} is not a valid prefix circuit; missing {} output range(s)",
            path.display(),
            c.missing_output_ranges().len()
        ));
    }
    Ok(c)
}

/// Keeps the recorder reachable so the cassette can be written after the run.
struct Source {
    proposer: Box<dyn Proposer>,
    recorder: Option<Arc<RecordingTransport<HttpTransport>>>,
}

impl Source {
    fn finish(&self) -> anyhow::Result<()> {
        if let Some(r) = &self.recorder {
            r.save().context("saving recorded exchanges")?;
        }
        Ok(())
    }
}

fn make_source(args: &SourceArgs, cfg: &Config) -> Result<Source, Failure> {
    let offline = || Source {
        proposer: Box::new(OfflineProposer::rotating()),
        recorder: None,
    };
    if !args.llm {
        return Ok(offline());
    }
    let llm = cfg.llm.clone();
    let client = if let Some(path) = &args.replay {
        let cassette = Cassette::load(path).with_context(|| format!("loading {}", path.display()))?;
        LlmClient::replay(llm, cassette).map(|c| (c, None))
    } else if let Some(path) = &args.record {
        let key = std::env::var(&llm.api_key_env).unwrap_or_default();
        HttpTransport::new().and_then(|http| {
            let recorder = Arc::new(RecordingTransport::new(http, path));
            LlmClient::new(llm, key, recorder.clone()).map(|c| (c, Some(recorder)))
        })
    } else {
        LlmClient::from_env(llm).map(|c| (c, None))
    };
    match client {
        Ok((client, recorder)) => Ok(Source {
            proposer: Box::new(LlmProposer::new(client)),
            recorder,
        }),
        Err(e) if args.no_fallback || !cfg.dse.fallback => Err(Failure::new(ENDPOINT, e)),
        Err(e) => {
            log::warn!("endpoint unavailable ({e}); using the offline planner");
            Ok(offline())
        }
    }
}

fn synthesis_options(cfg: &Config, max_rounds: Option<usize>, source: &SourceArgs) -> SynthesisOptions {
    SynthesisOptions {
        max_rounds: max_rounds.unwrap_or(cfg.dse.max_rounds),
        stall_cap: cfg.dse.stall_cap,
        fallback: cfg.dse.fallback && !source.no_fallback,
    }
}

fn run(cli: Cli) -> CmdResult {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Gen {
            topology,
            n,
            with_delay,
            out,
        } => {
            let c = topology.build(n).map_err(|e| Failure::new(VALIDATION, e))?;
            let variant = if with_delay { Variant::WithDelay } else { Variant::Plain };
            write_output(out.as_deref(), &serialize(&c, variant))?;
            eprintln!("{topology} n={n}: {}", c.metrics());
        }
        Command::Synth {
            n,
            delay,
            max_rounds,
            source,
            out,
        } => {
            let mode = match delay {
                Some(max_delay) => SearchMode::DelayLimited { max_delay },
                None => SearchMode::PlainSynthesis,
            };
            let opts = synthesis_options(&cfg, max_rounds, &source);
            let mut src = make_source(&source, &cfg)?;
            let start = PrefixCircuit::new(n).map_err(|e| Failure::new(VALIDATION, e))?;
            let result = synthesize_valid(start, src.proposer.as_mut(), mode, None, opts);
            src.finish()?;
            let outcome = result?;
            let variant = if delay.is_some() { Variant::WithDelay } else { Variant::Plain };
            write_output(out.as_deref(), &serialize(&outcome.circuit, variant))?;
            eprintln!(
                "n={n}: {} after {} proposer round(s){}",
                outcome.circuit.metrics(),
                outcome.proposer_rounds(),
                outcome
                    .fallback
                    .map(|f| format!(", completed offline ({f:?})"))
                    .unwrap_or_default()
            );
        }
        Command::Dse {
            n,
            mode,
            delay,
            area,
            iters,
            top_k,
            max_rounds,
            seeds,
            pool_dir,
            source,
        } => {
            let mut dse_cfg = match mode {
                Mode::DelayLimited => DseConfig::delay_limited(n, delay.unwrap_or_default()),
                Mode::AreaLimited => DseConfig::area_limited(n, area.unwrap_or_default()),
            };
            dse_cfg.iteration_bound = iters.unwrap_or(cfg.dse.iters);
            dse_cfg.pool_top_k = top_k.unwrap_or(cfg.dse.top_k);
            dse_cfg.synthesis = synthesis_options(&cfg, max_rounds, &source);
            if !seeds.is_empty() {
                dse_cfg.seeds = seeds;
            }
            let mut src = make_source(&source, &cfg)?;
            let result = dse_run(&dse_cfg, src.proposer.as_mut());
            src.finish()?;
            let result = result?;
            for it in &result.log {
                println!(
                    "iter {:>3}  {}  {:?}  rounds={}  hv={:.1}",
                    it.iteration, it.metrics, it.outcome, it.proposer_rounds, it.hypervolume
                );
            }
            if let Some(best) = result.pool.best() {
                println!("best: {} ({} entries in pool)", best.metrics, result.pool.len());
            }
            if let Some(dir) = pool_dir {
                result
                    .pool
                    .save(&dir)
                    .with_context(|| format!("saving pool to {}", dir.display()))?;
            }
        }
        Command::Validate { file } => {
            let c = read_circuit(&file)?;
            if !c.is_valid() {
                for r in c.missing_output_ranges() {
                    println!("missing {r}");
                }
                return Err(Failure::new(VALIDATION, anyhow!("{} is not a valid prefix circuit", file.display())));
            }
            println!("valid: n={} {}", c.width(), c.metrics());
        }
        Command::Emit {
            verilog,
            module,
            file,
            out,
            ..
        } => {
            let text = if verilog {
                let c = read_valid_circuit(&file)?;
                rtl::emit_verilog(&c, &module).map_err(|e| Failure::new(VALIDATION, e))?
            } else {
                dot::emit_dot(&read_circuit(&file)?)
            };
            write_output(out.as_deref(), &text)?;
        }
        Command::Verify { file, trials, seed } => {
            let c = read_valid_circuit(&file)?;
            let v = verify_adder(&c, trials, seed).map_err(|e| Failure::new(VALIDATION, e))?;
            match v.counterexample {
                None => println!(
                    "pass: {} operand pairs{}",
                    v.checked,
                    if v.exhaustive { " (exhaustive)" } else { "" }
                ),
                Some(ce) => {
                    return Err(Failure::new(
                        VALIDATION,
                        anyhow!("fail: {:#x} + {:#x} differs at bit {}", ce.a, ce.b, ce.bit),
                    ))
                }
            }
        }
        Command::Report {
            widths,
            delays,
            pools,
            csv,
        } => {
            let delays = expand_delays(&delays)?;
            let pools = pools
                .iter()
                .map(|p| CircuitPool::load(p).with_context(|| format!("loading pool {}", p.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let rows = report::build_report(&widths, &delays, &pools);
            print!("{}", report::render_table(&rows));
            if let Some(path) = csv {
                fs::write(&path, report::render_csv(&rows))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn expand_delays(items: &[String]) -> anyhow::Result<Vec<u32>> {
    let mut out = Vec::new();
    for item in items {
        let item = item.trim();
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (u32, u32) = (a.trim().parse()?, b.trim().trim_start_matches('=').parse()?);
            out.extend(a..=b);
        } else {
            out.push(item.parse().with_context(|| format!("bad delay {item:?}"))?);
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
