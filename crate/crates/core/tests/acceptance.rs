//! One line per acceptance criterion. Exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use agint_core::assessment::{
    domain_height, elements, summarize_polarity, Assessment, ConfidenceBasis, DomainKind, Strength,
};
use agint_core::claims::EvidenceStatus;
use agint_core::revision::EpochStatus;
use agint_core::trace::{parse_jsonl, replay, to_jsonl};
use agint_core::worklist::verify_trigger_soundness;
use agint_core::EpochRun;
use common::golden::{compare_final, compare_table, review, review_revision};
use common::{check_confluence, check_termination, oracles, run_with, BASES};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const RANDOM_CASES: usize = 10_000;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn review_run() -> Result<EpochRun, String> {
    let sc = review();
    run_with(&sc, sc.policy.clone())
}

fn golden_table() -> Outcome {
    let started = Instant::now();
    let sc = review();
    let run = run_with(&sc, sc.policy.clone())?;
    let took = within(Duration::from_secs(1), started)?;
    compare_table(&run.traces[0])?;
    compare_final(&sc, &run.state)?;
    ensure(run.traces[0].final_worklist().is_empty(), || {
        "worklist not empty".into()
    })?;
    Ok(format!("12 steps match, final state matches, {took:.2?}"))
}

fn check_laws(x: &Assessment, y: &Assessment, z: &Assessment) -> Result<(), String> {
    let j = |a: &Assessment, b: &Assessment| a.join(b).map_err(|e| e.to_string());
    let bot = Assessment::bottom(x.kind());
    let fail = |law: &str| {
        format!(
            "{law} fails at {} {} {}",
            x.compact(),
            y.compact(),
            z.compact()
        )
    };
    ensure(j(x, x)? == *x, || fail("idempotence"))?;
    ensure(j(x, y)? == j(y, x)?, || fail("commutativity"))?;
    ensure(j(&j(x, y)?, z)? == j(x, &j(y, z)?)?, || {
        fail("associativity")
    })?;
    ensure(j(&bot, x)? == *x, || fail("bottom identity"))?;
    let leq = x.leq(y).map_err(|e| e.to_string())?;
    ensure(leq == (j(x, y)? == *y), || fail("leq/join consistency"))?;
    ensure(leq == oracles::leq(x, y), || fail("componentwise order"))
}

fn lattice_laws() -> Outcome {
    let started = Instant::now();
    let mut count = 0;
    for kind in [DomainKind::Four, DomainKind::Graded] {
        let all = elements(kind);
        for x in &all {
            for y in &all {
                for z in &all {
                    check_laws(x, y, z)?;
                    count += 1;
                }
            }
        }
    }
    let strat = elements(DomainKind::Stratified);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..RANDOM_CASES {
        let pick = |rng: &mut ChaCha8Rng| *strat.choose(rng).expect("non-empty");
        let (x, y, z) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        check_laws(&x, &y, &z)?;
        count += 1;
    }
    let took = within(Duration::from_secs(10), started)?;
    Ok(format!("{count} triples, {took:.2?}"))
}

fn random_records(rng: &mut ChaCha8Rng) -> Vec<(Strength, ConfidenceBasis)> {
    (0..rng.random_range(0..8))
        .map(|_| {
            let g = if rng.random_bool(0.5) {
                Strength::Weak
            } else {
                Strength::Strong
            };
            (g, *BASES.choose(rng).expect("non-empty"))
        })
        .collect()
}

fn summary_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..RANDOM_CASES {
        let records = random_records(&mut rng);
        let got = summarize_polarity(&records);
        ensure(*got.levels() == oracles::summary(&records), || {
            format!("case {i}: {records:?}")
        })?;
        ensure(got.is_antitone(), || {
            format!("case {i}: summary is not antitone")
        })?;
    }
    let b = summarize_polarity(&[
        (Strength::Strong, ConfidenceBasis::Model),
        (Strength::Weak, ConfidenceBasis::Checked),
    ]);
    ensure(
        b.at(ConfidenceBasis::Model) == Strength::Strong
            && b.at(ConfidenceBasis::Checked) == Strength::Weak,
        || format!("two-record example gives {:?}", b.levels()),
    )?;
    Ok(format!(
        "{RANDOM_CASES} lists match brute force, two-record example exact"
    ))
}

fn termination() -> Outcome {
    let started = Instant::now();
    let mut peak = 0.0f64;
    for seed in 0..200 {
        let (events, bound) = check_termination(seed)?;
        if bound > 0 {
            peak = peak.max(events as f64 / bound as f64);
        }
    }
    let took = within(Duration::from_secs(60), started)?;
    Ok(format!(
        "200 scenarios, peak events/bound {peak:.2}, {took:.2?}"
    ))
}

// Test runs enable the per-step frame check, so a frame violation surfaces
// as a run error. Trigger soundness is checked on each trace.
fn frame_and_trigger() -> Outcome {
    let sc = review();
    let run = review_run()?;
    let bad = verify_trigger_soundness(&run.traces[0], &sc.graph);
    ensure(bad.is_empty(), || format!("golden run: {}", bad[0]))?;
    for seed in 0..200 {
        check_termination(seed)?;
    }
    Ok("no violations in the golden run or 200 random runs".into())
}

fn confluence() -> Outcome {
    for seed in 1000..1050 {
        check_confluence(seed)?;
    }
    Ok("50 scenarios agree under fifo, lifo and 10 shuffles".into())
}

fn revision() -> Outcome {
    let sc = review_revision();
    let run = run_with(&sc, sc.policy.clone())?;
    ensure(
        run.status == EpochStatus::Stabilized && run.traces.len() == 2,
        || "expected two stable epochs".into(),
    )?;
    let c_p = sc
        .claims
        .iter()
        .find(|c| c.label == "c_P")
        .ok_or("no c_P")?;
    let lowered = run.traces[1]
        .init
        .claims
        .iter()
        .find(|c| c.key == c_p.key)
        .ok_or("c_P missing in epoch 2")?;
    ensure(lowered.assessment.is_bottom(), || {
        format!("c_P after revision is {}", lowered.assessment.compact())
    })?;
    let superseded = run
        .state
        .audit_records()
        .into_iter()
        .filter(|r| r.node == c_p.node && r.claim_key == c_p.key && r.epoch == 1)
        .all(|r| r.status == EvidenceStatus::Superseded);
    ensure(superseded, || {
        "epoch 1 evidence for c_P is still active".into()
    })?;
    let before = run.traces[0].steps.last().ok_or("empty epoch 1")?;
    let before = before
        .snapshot
        .iter()
        .find(|c| c.key == c_p.key)
        .ok_or("c_P not in snapshot")?;
    let entry = run.log.first().ok_or("empty revision log")?;
    ensure(entry.old_assessment == Some(before.assessment), || {
        "log does not hold the old value".into()
    })?;
    let k_cl = sc.caps.k_cl(&sc.graph);
    let bound = k_cl + domain_height(sc.domain) as u64 * k_cl;
    let events = run.traces[1].summary.trigger_events;
    ensure(events <= bound, || {
        format!("epoch 2 used {events} events, bound {bound}")
    })?;
    Ok(format!(
        "c_P lowered from {}, epoch 2 used {events}/{bound} events",
        before.assessment.compact()
    ))
}

fn heights() -> Outcome {
    let pairs = [
        (DomainKind::Four, oracles::four_height()),
        (DomainKind::Graded, oracles::graded_height()),
        (DomainKind::Stratified, oracles::stratified_height()),
    ];
    for (kind, oracle) in pairs {
        ensure(domain_height(kind) == oracle, || {
            format!("{kind}: {} vs oracle {oracle}", domain_height(kind))
        })?;
    }
    ensure(pairs[0].1 == 2 && pairs[1].1 == 4, || {
        "four/graded oracle heights are not 2 and 4".into()
    })?;
    Ok(format!("heights 2, 4, {}", pairs[2].1))
}

fn replay_roundtrip() -> Outcome {
    for (name, sc) in [("golden", review()), ("revision", review_revision())] {
        let run = run_with(&sc, sc.policy.clone())?;
        let parsed = parse_jsonl(&to_jsonl(&run.traces)).map_err(|e| format!("{name}: {e}"))?;
        ensure(parsed == run.traces, || {
            format!("{name}: trace changed in the round trip")
        })?;
        let folded = replay(&parsed).map_err(|e| format!("{name}: {e}"))?;
        ensure(folded == run.state.full_projection(), || {
            format!("{name}: replayed state differs")
        })?;
    }
    Ok("golden and revision traces replay to identical states".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("golden step table", golden_table),
        ("lattice laws", lattice_laws),
        ("stratified summary oracle", summary_oracle),
        ("termination bound", termination),
        ("frame and trigger soundness", frame_and_trigger),
        ("order confluence", confluence),
        ("epochal revision", revision),
        ("height oracle", heights),
        ("trace replay round trip", replay_roundtrip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
