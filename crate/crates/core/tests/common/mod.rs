//! Random scenarios and oracles for the engine property tests.

#![allow(dead_code)]

pub mod golden;
pub mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use agint_core::agent::{
    AgentEvalResult, AgentGenResult, EvidenceItem, EvidenceSeed, ScriptEntry, ScriptKey,
    ScriptResult, ScriptVisit,
};
use agint_core::assessment::{
    domain_height, elements, Assessment, ConfidenceBasis, DomainKind, Strength,
};
use agint_core::claims::{canonicalize, Claim, ClaimOrigin, Polarity, SourceKind};
use agint_core::graph::{EvaluationGraph, NodeId, ProgramGraph};
use agint_core::queries::{EvalQuery, GenQuery, QuerySpecs, Template};
use agint_core::revision::EpochConfig;
use agint_core::scenario::{BackendKind, RemoteConfig, Scenario};
use agint_core::worklist::{
    verify_trigger_soundness, ActionLabels, CapTable, RunOptions, WorklistPolicy,
};
use agint_core::EpochRun;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BASES: [ConfidenceBasis; 5] = [
    ConfidenceBasis::Model,
    ConfidenceBasis::Located,
    ConfidenceBasis::Applicable,
    ConfidenceBasis::Corroborated,
    ConfidenceBasis::Checked,
];

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_nodes: usize,
    pub max_claims: usize,
    /// Answers ignore the visit index.
    pub context_insensitive: bool,
    pub with_generation: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_nodes: 20,
            max_claims: 4,
            context_insensitive: false,
            with_generation: true,
        }
    }
}

fn random_evidence(rng: &mut ChaCha8Rng) -> Vec<EvidenceItem> {
    (0..rng.random_range(1..=3))
        .map(|_| {
            EvidenceItem::Fresh(EvidenceSeed {
                id: None,
                polarity: if rng.random_bool(0.5) {
                    Polarity::Support
                } else {
                    Polarity::Refute
                },
                strength: if rng.random_bool(0.5) {
                    Strength::Weak
                } else {
                    Strength::Strong
                },
                basis: *BASES.choose(rng).expect("non-empty"),
                source_kind: SourceKind::ModelJudgment,
                excerpt: "random".into(),
            })
        })
        .collect()
}

fn random_answer(rng: &mut ChaCha8Rng, domain: DomainKind, pool: &[Assessment]) -> AgentEvalResult {
    match domain {
        DomainKind::Stratified => AgentEvalResult {
            assessment: None,
            evidence: random_evidence(rng),
            rationale: String::new(),
        },
        _ => AgentEvalResult {
            assessment: Some(*pool.choose(rng).expect("non-empty")),
            evidence: vec![],
            rationale: String::new(),
        },
    }
}

fn eval_entry(node: &NodeId, key: &str, visit: ScriptVisit, r: AgentEvalResult) -> ScriptEntry {
    ScriptEntry {
        key: ScriptKey {
            node: node.clone(),
            key: key.to_string(),
            visit,
        },
        result: ScriptResult::Eval(r),
    }
}

/// A scenario with random extended edges, claims and scripted answers.
pub fn random_scenario(seed: u64, cfg: GenConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = *DomainKind::ALL.choose(&mut rng).expect("non-empty");
    let pool = elements(domain);

    let n_nodes = rng.random_range(1..=cfg.max_nodes);
    let n_aux = rng.random_range(0..=n_nodes / 3);
    let program: Vec<NodeId> = (0..n_nodes - n_aux)
        .map(|i| NodeId::new(format!("p{i}")))
        .collect();
    let aux: Vec<NodeId> = (0..n_aux).map(|i| NodeId::new(format!("x{i}"))).collect();
    let all: Vec<NodeId> = program.iter().chain(&aux).cloned().collect();

    let density = rng.random_range(0.05..0.3);
    let mut ctx = Vec::new();
    let mut fb = Vec::new();
    for a in &all {
        for b in &all {
            if rng.random_bool(density) {
                if rng.random_bool(0.7) {
                    ctx.push((a.clone(), b.clone()));
                } else {
                    fb.push((a.clone(), b.clone()));
                }
            }
        }
    }
    let graph = EvaluationGraph::new(
        ProgramGraph {
            nodes: program,
            edges: vec![],
            sources: BTreeMap::new(),
        },
        aux,
        ctx,
        fb,
        BTreeMap::new(),
    );

    let mut claims = Vec::new();
    let mut script = Vec::new();
    let mut specs = QuerySpecs::new(EvalQuery {
        id: "e".into(),
        template: Template::parse("{claim}").expect("valid"),
        bilateral: false,
        support_focus: None,
        refute_focus: None,
    });
    let mut caps = CapTable {
        default: cfg.max_claims.max(1),
        per_node: BTreeMap::new(),
    };

    for n in &all {
        let k = rng.random_range(0..=cfg.max_claims);
        let mut keys = Vec::new();
        for i in 0..k {
            let c = Claim::new(n.clone(), format!("claim {i} at {n}"), ClaimOrigin::Seeded)
                .expect("non-empty");
            keys.push(c.key.clone());
            claims.push(c);
        }
        if cfg.with_generation && k < cfg.max_claims && rng.random_bool(0.25) {
            let room = cfg.max_claims - k;
            let texts: Vec<String> = (0..rng.random_range(1..=room + 1))
                .map(|i| format!("derived {i} at {n}"))
                .collect();
            keys.extend(texts.iter().map(|t| canonicalize(t).expect("non-empty")));
            let q = GenQuery::new(
                "more",
                Template::parse("more claims").expect("valid"),
                room.max(1),
            )
            .expect("positive");
            specs.gen.insert(n.clone(), vec![q]);
            script.push(ScriptEntry {
                key: ScriptKey {
                    node: n.clone(),
                    key: "more".into(),
                    visit: ScriptVisit::Any,
                },
                result: ScriptResult::Gen(AgentGenResult { claims: texts }),
            });
        }
        for key in keys {
            if cfg.context_insensitive {
                script.push(eval_entry(
                    n,
                    &key,
                    ScriptVisit::Any,
                    random_answer(&mut rng, domain, &pool),
                ));
            } else {
                for v in 0..rng.random_range(0..4u32) {
                    script.push(eval_entry(
                        n,
                        &key,
                        ScriptVisit::Exact(v),
                        random_answer(&mut rng, domain, &pool),
                    ));
                }
                script.push(eval_entry(
                    n,
                    &key,
                    ScriptVisit::Any,
                    random_answer(&mut rng, domain, &pool),
                ));
            }
        }
        if rng.random_bool(0.2) {
            caps.per_node.insert(n.clone(), cfg.max_claims.max(1));
        }
    }

    Scenario {
        goal: "random goal".into(),
        domain,
        graph,
        claims,
        specs,
        caps,
        policy: WorklistPolicy::Fifo,
        hard_step_cap: None,
        evidence_cap: 4,
        labels: ActionLabels::default(),
        script,
        backend: BackendKind::Scripted,
        remote: RemoteConfig {
            endpoint: None,
            timeout: Duration::from_secs(1),
        },
        retries: 0,
        epochs: EpochConfig::default(),
        bounded: None,
        goal_claim: None,
    }
}

/// Nodes reachable from `from` over extended edges.
pub fn ext_reachable(g: &EvaluationGraph, from: &NodeId) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from.clone()];
    while let Some(n) = stack.pop() {
        for m in g.succ_ext(&n).unwrap_or_default() {
            if seen.insert(m.clone()) {
                stack.push(m);
            }
        }
    }
    seen
}

pub fn options(policy: WorklistPolicy) -> RunOptions {
    RunOptions {
        policy,
        hard_step_cap: None,
        check_invariants: true,
    }
}

pub fn run_with(sc: &Scenario, policy: WorklistPolicy) -> Result<EpochRun, String> {
    let mut agent = sc.scripted_agent();
    sc.run(&mut agent, &options(policy))
        .map_err(|e| e.to_string())
}

/// Runs under FIFO and checks termination, the event bound, an empty final
/// worklist and trigger soundness.
pub fn check_termination(seed: u64) -> Result<(u64, u64), String> {
    let sc = random_scenario(seed, GenConfig::default());
    let run = run_with(&sc, WorklistPolicy::Fifo).map_err(|e| format!("seed {seed}: {e}"))?;
    let t = &run.traces[0];
    let k_cl = sc.caps.k_cl(&sc.graph);
    let bound = k_cl + domain_height(sc.domain) as u64 * k_cl;
    if t.summary.trigger_events > bound {
        return Err(format!(
            "seed {seed}: {} events exceed {bound}",
            t.summary.trigger_events
        ));
    }
    if !t.final_worklist().is_empty() {
        return Err(format!("seed {seed}: worklist not empty"));
    }
    let bad = verify_trigger_soundness(t, &sc.graph);
    if let Some(v) = bad.first() {
        return Err(format!("seed {seed}: unjustified enqueue {v}"));
    }
    Ok((t.summary.trigger_events, bound))
}

/// Final projections under FIFO, LIFO and ten shuffled orders agree.
pub fn check_confluence(seed: u64) -> Result<(), String> {
    let cfg = GenConfig {
        context_insensitive: true,
        ..GenConfig::default()
    };
    let sc = random_scenario(seed, cfg);
    let reference = run_with(&sc, WorklistPolicy::Fifo)?.state.full_projection();
    let mut policies = vec![WorklistPolicy::Lifo];
    policies.extend((0..10).map(|i| WorklistPolicy::Shuffled {
        seed: seed.wrapping_mul(31).wrapping_add(i),
    }));
    for p in policies {
        let name = p.name();
        let got = run_with(&sc, p)?.state.full_projection();
        if got != reference {
            return Err(format!("seed {seed}: {name} projection differs from fifo"));
        }
    }
    Ok(())
}
