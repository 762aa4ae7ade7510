//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs under `cargo test` (custom harness).

mod common;

use std::cell::{Cell, RefCell};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use prefixforge_core::dse::{dse_run, non_dominated_sort, synthesize_valid, DseConfig, DseResult, SynthesisOptions};
use prefixforge_core::proposer::{Cassette, LlmClient, LlmEndpointConfig, LlmProposer, OfflineProposer, SearchMode};
use prefixforge_core::spcr::{extract_candidates, prune, RejectReason};
use prefixforge_core::{
    area_lower_bound, brent_kung, kogge_stone, parse, serialize, sklansky, verify_adder, PrefixCircuit, Variant,
};
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || format!("{what} took {elapsed:?}, limit {limit:?}"))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn replay_proposer(name: &str) -> LlmProposer {
    let cassette = Cassette::load(&fixture(name)).expect("fixture loads");
    LlmProposer::new(LlmClient::replay(LlmEndpointConfig::default(), cassette).expect("replay client"))
}

fn baselines() -> Outcome {
    let t = Instant::now();
    let table = [
        (8, [(20, 4), (25, 4), (19, 5)]),
        (16, [(48, 5), (65, 5), (42, 7)]),
    ];
    for (n, want) in table {
        let got = [sklansky(n), kogge_stone(n), brent_kung(n)].map(|c| {
            let m = c.unwrap().metrics();
            (m.area, m.delay)
        });
        ensure(got == want, || format!("n={n}: got {got:?}, want {want:?}"))?;
    }
    within(t.elapsed(), Duration::from_secs(1), "generation")?;
    Ok(format!("areas and delays exact at n=8,16 in {:?}", t.elapsed()))
}

fn theory_bounds() -> Outcome {
    let want = [(8, 4, 18), (8, 5, 17), (8, 6, 16), (8, 7, 15), (8, 8, 14), (16, 5, 41), (16, 6, 40), (16, 7, 39), (16, 8, 38), (16, 9, 37)];
    for (n, d, bound) in want {
        let got = area_lower_bound(n, d).map_err(|e| e.to_string())?;
        ensure(got == bound, || format!("({n},{d}): got {got}, want {bound}"))?;
    }
    Ok("all 10 entries exact".into())
}

fn check_adder(c: &PrefixCircuit, label: &str) -> Result<u64, String> {
    let v = verify_adder(c, 100_000, 0xadd).map_err(|e| format!("{label}: {e}"))?;
    if let Some(ce) = v.counterexample {
        return Err(format!("{label}: {:#x}+{:#x} wrong at bit {}", ce.a, ce.b, ce.bit));
    }
    ensure(v.exhaustive || v.checked >= 100_000, || format!("{label}: only {} pairs", v.checked))?;
    Ok(v.checked)
}

fn functional(pools: &[&DseResult]) -> Outcome {
    let t = Instant::now();
    let checked = check_adder(&kogge_stone(8).unwrap(), "kogge-stone(8)")?;
    ensure(checked == 65_536, || format!("8-bit sweep covered {checked} pairs"))?;
    within(t.elapsed(), Duration::from_secs(5), "8-bit sweep")?;
    let mut circuits = 0;
    for n in [8, 16] {
        for (name, c) in [("sklansky", sklansky(n)), ("kogge-stone", kogge_stone(n)), ("brent-kung", brent_kung(n))] {
            check_adder(&c.unwrap(), &format!("{name}({n})"))?;
            circuits += 1;
        }
    }
    for r in pools {
        for e in r.pool.entries() {
            check_adder(&e.circuit, &format!("pool entry {}", &e.key[..12]))?;
            circuits += 1;
        }
    }
    Ok(format!("{circuits} circuits pass; 8-bit sweep of 65536 pairs in {:?}", t.elapsed()))
}

fn round_trip() -> Outcome {
    let valid = Cell::new(0);
    runner(1000)
        .run(&circuit_strategy(16), |c| {
            valid.set(valid.get() + usize::from(c.is_valid()));
            for v in [Variant::Plain, Variant::WithDelay] {
                let back = parse(&serialize(&c, v)).map_err(|e| proptest::test_runner::TestCaseError::fail(e.to_string()))?;
                proptest::prop_assert_eq!(&back, &c);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let valid = valid.get();
    Ok(format!("1000 circuits ({valid} valid, {} partial), both variants", 1000 - valid))
}

fn pruner() -> Outcome {
    let counts = RefCell::new([0usize; 7]);
    runner(1000)
        .run(&batch_strategy(), |batch| {
            let lines = extract_candidates(&batch.response());
            let report = prune(&batch.base, &lines, batch.constraint);
            let (want, after) = oracle_prune(&batch);
            let got = report.verdicts();
            proptest::prop_assert_eq!(&got, &want);
            for v in &got {
                let slot = match v {
                    None => 0,
                    Some(RejectReason::NonAdjacent) => 1,
                    Some(RejectReason::UnknownPredecessor) => 2,
                    Some(RejectReason::Duplicate) => 3,
                    Some(RejectReason::DelayBoundExceeded) => 4,
                    Some(RejectReason::AreaBoundExceeded) => 5,
                    Some(RejectReason::Unparseable) => 6,
                };
                counts.borrow_mut()[slot] += 1;
            }
            let mut applied = batch.base.clone();
            proptest::prop_assert!(report.apply(&mut applied).is_ok());
            proptest::prop_assert_eq!(applied, after);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let counts = counts.into_inner();
    ensure(counts.iter().all(|&c| c > 0), || format!("some verdict never exercised: {counts:?}"))?;
    Ok(format!(
        "1000 batches; accepted {} / gap {} / unknown {} / dup {} / delay {} / area {} / unparseable {}",
        counts[0], counts[1], counts[2], counts[3], counts[4], counts[5], counts[6]
    ))
}

fn sorting() -> Outcome {
    runner(500)
        .run(&metrics_strategy(), |items| {
            proptest::prop_assert_eq!(non_dominated_sort(&items), oracle_fronts(&items));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("500 metric sets agree with the peeling oracle".into())
}

fn offline_dse(n: usize, bound: u32) -> Result<(DseResult, Duration), String> {
    let t = Instant::now();
    let r = dse_run(&DseConfig::delay_limited(n, bound), &mut OfflineProposer::rotating()).map_err(|e| e.to_string())?;
    Ok((r, t.elapsed()))
}

fn fingerprint(r: &DseResult) -> Vec<(String, usize, u32)> {
    r.pool.ordered().map(|e| (e.key.clone(), e.metrics.area, e.metrics.delay)).collect()
}

fn dse_floor(runs: &[(usize, u32, usize, &DseResult, Duration)]) -> Outcome {
    let mut parts = Vec::new();
    for &(n, bound, seed_area, r, elapsed) in runs {
        within(elapsed, Duration::from_secs(10), &format!("dse n={n}"))?;
        ensure(r.log.len() == 20, || format!("n={n}: {} iterations", r.log.len()))?;
        for e in r.pool.entries() {
            ensure(e.metrics.delay <= bound, || format!("n={n}: entry with {}", e.metrics))?;
        }
        let best = r.pool.best().ok_or("empty pool")?.metrics.area;
        let floor = area_lower_bound(n, bound).unwrap();
        ensure(floor <= best && best <= seed_area, || format!("n={n}: best {best} outside [{floor}, {seed_area}]"))?;
        let (again, _) = offline_dse(n, bound)?;
        ensure(fingerprint(r) == fingerprint(&again), || format!("n={n}: second run differs"))?;
        parts.push(format!("(n={n},L={bound}) best {best} in [{floor},{seed_area}], {:?}", elapsed));
    }
    Ok(parts.join("; ") + "; deterministic")
}

fn fixture_dse() -> Result<DseResult, String> {
    let mut cfg = DseConfig::delay_limited(8, 4);
    cfg.iteration_bound = 2;
    cfg.synthesis.fallback = false;
    dse_run(&cfg, &mut replay_proposer("dse_8_4_sklansky.json")).map_err(|e| e.to_string())
}

fn headline(r: &DseResult) -> Outcome {
    let best = r.pool.best().ok_or("empty pool")?;
    ensure(best.metrics.area == 20 && best.metrics.delay == 4, || format!("best is {}", best.metrics))?;
    ensure(serialize(&best.circuit, Variant::Plain) == serialize(&sklansky(8).unwrap(), Variant::Plain), || {
        "best circuit differs from the recorded sequence".into()
    })?;
    ensure(r.log.iter().all(|l| l.fallback.is_none()), || "fixture run needed the fallback".into())?;
    let again = fixture_dse()?;
    ensure(fingerprint(r) == fingerprint(&again), || "replay is not repeatable".into())?;
    let hv: Vec<f64> = r.log.iter().map(|l| l.hypervolume).collect();
    ensure(hv.windows(2).all(|w| w[0] <= w[1]), || format!("hypervolume not monotone: {hv:?}"))?;
    Ok("recorded responses reach area 20 at (8,4) without fallback; live endpoint run not part of CI".into())
}

fn gap_replay() -> Outcome {
    let mut start = PrefixCircuit::new(4).unwrap();
    start.add_prefix_node(0, 1).unwrap();
    start.add_prefix_node(2, 3).unwrap();
    let opts = SynthesisOptions {
        fallback: false,
        ..Default::default()
    };
    let out = synthesize_valid(start, &mut replay_proposer("gap_replay.json"), SearchMode::PlainSynthesis, None, opts)
        .map_err(|e| e.to_string())?;
    let first = out.rounds.first().ok_or("no rounds")?;
    ensure(
        first
            .rejected
            .iter()
            .any(|(reason, line)| *reason == RejectReason::NonAdjacent && line.contains("connectedNodes=(4,3)")),
        || format!("(4,3) not rejected as a gap: {:?}", first.rejected),
    )?;
    ensure(out.circuit.is_valid(), || "result is not valid".into())?;
    check_adder(&out.circuit, "gap replay result")?;
    Ok(format!(
        "(4,3) pruned as NonAdjacent; valid {} after {} rounds",
        out.circuit.metrics(),
        out.rounds.len()
    ))
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match &result {
        Ok(detail) => println!("PASS  {id}. {name}: {detail}"),
        Err(why) => println!("FAIL  {id}. {name}: {why}"),
    }
    result.is_ok()
}

fn main() {
    // a filter argument that does not name this suite means another target
    // was selected; `--list` support keeps `cargo test -- --list` working
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let dse8 = offline_dse(8, 4);
    let dse16 = offline_dse(16, 5);
    let fixture = fixture_dse();

    let mut ok = true;
    ok &= run(1, "baseline reproduction", baselines);
    ok &= run(2, "theory bound reproduction", theory_bounds);
    ok &= run(3, "functional correctness", || {
        let mut pools = Vec::new();
        for r in [&dse8, &dse16] {
            pools.push(&r.as_ref().map_err(Clone::clone)?.0);
        }
        pools.push(fixture.as_ref().map_err(Clone::clone)?);
        functional(&pools)
    });
    ok &= run(4, "SPCR round-trip", round_trip);
    ok &= run(5, "pruner soundness", pruner);
    ok &= run(6, "non-dominated sorting", sorting);
    ok &= run(7, "deterministic DSE floor", || {
        let (r8, t8) = dse8.as_ref().map_err(Clone::clone)?;
        let (r16, t16) = dse16.as_ref().map_err(Clone::clone)?;
        dse_floor(&[(8, 4, 25, r8, *t8), (16, 5, 65, r16, *t16)])
    });
    ok &= run(8, "headline numbers (recorded responses)", || headline(fixture.as_ref().map_err(Clone::clone)?));
    ok &= run(9, "gap proposal replay", gap_replay);
    if !ok {
        std::process::exit(1);
    }
}
