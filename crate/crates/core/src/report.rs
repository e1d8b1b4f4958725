//! Final-state report and audit exports.

use std::fmt::Write as _;

use crate::claims::GlobalState;
use crate::revision::{EpochRun, EpochStatus, RevisionEntry};
use crate::scenario::Scenario;

/// `label@node = value` for the goal claim, if the scenario names one.
pub fn verdict_line(sc: &Scenario, s: &GlobalState) -> Option<String> {
    let (n, k) = sc.goal_claim.as_ref()?;
    let e = s.entry(n, k).ok()?;
    Some(format!(
        "{}@{} = {}",
        e.claim.label,
        n,
        e.assessment.compact()
    ))
}

/// Human-readable summary of a finished run. The last line is the goal
/// claim verdict when the scenario names a goal claim.
pub fn render_report(sc: &Scenario, run: &EpochRun) -> String {
    let s = &run.state;
    let mut out = String::new();
    let _ = writeln!(out, "Goal: {}", sc.goal);
    let _ = writeln!(out, "Domain: {}", s.domain());
    if let Some(t) = run.traces.first() {
        let _ = writeln!(out, "Policy: {}", t.init.policy);
    }
    let status = match run.status {
        EpochStatus::Stabilized => "stabilized",
        EpochStatus::EpochLimitReached => "epoch limit reached",
    };
    let _ = writeln!(out, "Epochs: {} ({status})", run.traces.len());
    for t in &run.traces {
        let _ = writeln!(
            out,
            "  epoch {}: {} steps, {} AC-change steps, {} trigger events (bound {})",
            t.init.epoch,
            t.summary.steps,
            t.summary.ac_change_steps,
            t.summary.trigger_events,
            t.summary.budget.max_trigger_events
        );
    }
    if !run.log.is_empty() {
        let _ = writeln!(out, "Revisions:");
        for r in &run.log {
            let old = r.old_assessment.map_or("-".to_string(), |a| a.compact());
            let applied = if r.applied { "" } else { " (denied)" };
            let label = sc.label_of(&r.node, &r.claim);
            let _ = writeln!(
                out,
                "  epoch {} {} {label}@{} from {old}: {}{applied}",
                r.epoch, r.action, r.node, r.reason
            );
        }
    }
    let _ = writeln!(out, "Claims:");
    let width = s
        .claims_in_order()
        .iter()
        .map(|e| {
            format!("{}@{}", e.claim.label, e.claim.node)
                .chars()
                .count()
        })
        .max()
        .unwrap_or(0);
    for e in s.claims_in_order() {
        let name = format!("{}@{}", e.claim.label, e.claim.node);
        let pad = " ".repeat(width - name.chars().count());
        let _ = writeln!(
            out,
            "  {name}{pad} = {:<8} {}",
            e.assessment.compact(),
            e.claim.text
        );
    }
    let active = s
        .evidence_store()
        .filter(|r| r.status == crate::claims::EvidenceStatus::Active)
        .count();
    let _ = writeln!(
        out,
        "Evidence: {} records, {active} active",
        s.evidence_store().count()
    );
    if let Some(v) = verdict_line(sc, s) {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// One JSON record per evidence record, ordered by `(epoch, step, id)`.
pub fn evidence_jsonl(s: &GlobalState) -> String {
    s.audit_records()
        .into_iter()
        .map(|r| serde_json::to_string(r).expect("evidence serializes") + "\n")
        .collect()
}

pub fn revisions_jsonl(log: &[RevisionEntry]) -> String {
    log.iter()
        .map(|r| serde_json::to_string(r).expect("revision entries serialize") + "\n")
        .collect()
}
