//! Trace rendering, JSONL serialization and replay.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assessment::Assessment;
use crate::graph::NodeId;
use crate::revision::{RevisionAction, RevisionEntry};
use crate::transformer::ClaimUpdate;
use crate::worklist::{ClaimValue, RunSummary, RunTrace, TraceInit, TraceStep};

pub type Projection = BTreeMap<(NodeId, String), Assessment>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Init(TraceInit),
    Step(TraceStep),
    Summary { epoch: u32, summary: RunSummary },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Structure { line: usize, message: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("epoch {epoch} step {step}: {message}")]
    Mismatch {
        epoch: u32,
        step: u32,
        message: String,
    },
    #[error("no traces to replay")]
    Empty,
}

fn w_cell(w: &[NodeId]) -> String {
    if w.is_empty() {
        "∅".to_string()
    } else {
        format!(
            "{{{}}}",
            w.iter().map(NodeId::as_str).collect::<Vec<_>>().join(", ")
        )
    }
}

fn join_cell(updates: &[ClaimUpdate]) -> String {
    let changed: Vec<&ClaimUpdate> = updates.iter().filter(|u| u.changed()).collect();
    let exprs: Vec<(&str, String)> = if changed.is_empty() {
        updates
            .iter()
            .map(|u| {
                (
                    u.label.as_str(),
                    format!(
                        "{} ⊔ {} = {}",
                        u.before.compact(),
                        u.returned.compact(),
                        u.after.compact()
                    ),
                )
            })
            .collect()
    } else {
        changed
            .iter()
            .map(|u| {
                (
                    u.label.as_str(),
                    format!("{} ⊔ {}", u.before.compact(), u.returned.compact()),
                )
            })
            .collect()
    };
    match exprs.len() {
        0 => "-".to_string(),
        1 => exprs[0].1.clone(),
        _ => exprs
            .iter()
            .map(|(l, e)| format!("{l}: {e}"))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn revision_note(r: &RevisionEntry, cols: &[((NodeId, String), String)]) -> String {
    let label = cols
        .iter()
        .find(|((n, k), _)| n == &r.node && k == &r.claim)
        .map_or(r.claim.as_str(), |(_, l)| l.as_str());
    let verb = match (r.action, r.applied) {
        (_, false) => "denied",
        (RevisionAction::Lower, true) => "lowered",
        (RevisionAction::Retract, true) => "retracted",
    };
    format!("{verb} {label}@{}", r.node)
}

/// Claim columns across all epochs: seeded claims first, then generated
/// claims in insertion order.
fn columns(traces: &[RunTrace]) -> Vec<((NodeId, String), String)> {
    let mut cols: Vec<((NodeId, String), String)> = Vec::new();
    let mut add = |node: &NodeId, key: &str, label: &str| {
        if !cols.iter().any(|((n, k), _)| n == node && k == key) {
            cols.push(((node.clone(), key.to_string()), label.to_string()));
        }
    };
    for t in traces {
        for c in &t.init.claims {
            add(&c.node, &c.key, &c.label);
        }
        for st in &t.steps {
            for c in &st.inserted {
                add(&c.node, &c.key, &c.label);
            }
        }
    }
    cols
}

/// Plain-text step table, one block per epoch.
pub fn render_table(traces: &[RunTrace]) -> String {
    let cols = columns(traces);
    let mut out = String::new();
    for (i, t) in traces.iter().enumerate() {
        if traces.len() > 1 {
            if i > 0 {
                out.push('\n');
            }
            let _ = write!(out, "Epoch {}", t.init.epoch);
            if !t.init.revisions.is_empty() {
                let notes: Vec<String> = t
                    .init
                    .revisions
                    .iter()
                    .map(|r| revision_note(r, &cols))
                    .collect();
                let _ = write!(out, " (after {})", notes.join(", "));
            }
            out.push('\n');
        }
        out.push_str(&render_epoch(t, &cols));
    }
    out
}

fn render_epoch(t: &RunTrace, cols: &[((NodeId, String), String)]) -> String {
    let mut header = vec!["Step".to_string(), "Node".to_string(), "Action".to_string()];
    header.extend(cols.iter().map(|(_, l)| l.clone()));
    header.push("Join".to_string());
    header.push("W after step".to_string());

    let mut rows = Vec::new();
    let initial: BTreeMap<_, _> = t
        .init
        .claims
        .iter()
        .map(|c| ((c.node.clone(), c.key.clone()), c))
        .collect();
    let mut row = vec!["0".to_string(), "-".to_string(), "init".to_string()];
    row.extend(cols.iter().map(|(k, _)| {
        initial
            .get(k)
            .map_or("-".to_string(), |c| c.assessment.compact())
    }));
    row.push("-".to_string());
    row.push(w_cell(&t.init.worklist));
    rows.push(row);

    for st in &t.steps {
        let mut action = st.action.clone();
        if !st.revisions.is_empty() {
            let notes: Vec<String> = st
                .revisions
                .iter()
                .map(|r| revision_note(r, cols))
                .collect();
            action = format!("{action} [{}]", notes.join(", "));
        }
        let mut row = vec![st.step.to_string(), st.node.to_string(), action];
        for ((n, k), _) in cols {
            let cell = if let Some(u) = st
                .updates
                .iter()
                .find(|u| n == &st.node && &u.key == k)
                .filter(|u| u.changed())
            {
                u.after.compact()
            } else if st.inserted.iter().any(|c| &c.node == n && &c.key == k) {
                value_in(&st.snapshot, n, k).map_or("-".to_string(), Assessment::compact)
            } else {
                "·".to_string()
            };
            row.push(cell);
        }
        row.push(join_cell(&st.updates));
        row.push(w_cell(&st.worklist_after));
        rows.push(row);
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .chain(std::iter::once(&header))
                .map(|r| r[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |r: &[String]| {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("{}\n", cells.join(" | ").trim_end())
    };
    let mut out = line(&header);
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-+-"),
    );
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

fn value_in<'a>(snapshot: &'a [ClaimValue], n: &NodeId, k: &str) -> Option<&'a Assessment> {
    snapshot
        .iter()
        .find(|c| &c.node == n && c.key == k)
        .map(|c| &c.assessment)
}

/// One JSON object per line: `init`, its `step`s, then `summary`, per epoch.
pub fn to_jsonl(traces: &[RunTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        let mut push = |l: TraceLine| {
            out.push_str(&serde_json::to_string(&l).expect("trace lines serialize"));
            out.push('\n');
        };
        push(TraceLine::Init(t.init.clone()));
        for st in &t.steps {
            push(TraceLine::Step(st.clone()));
        }
        push(TraceLine::Summary {
            epoch: t.init.epoch,
            summary: t.summary.clone(),
        });
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<RunTrace>, TraceError> {
    let mut traces = Vec::new();
    let mut current: Option<(TraceInit, Vec<TraceStep>)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine =
            serde_json::from_str(raw).map_err(|source| TraceError::Json { line, source })?;
        let structure = |message: &str| TraceError::Structure {
            line,
            message: message.to_string(),
        };
        match parsed {
            TraceLine::Init(init) => {
                if current.is_some() {
                    return Err(structure("init before the previous epoch's summary"));
                }
                current = Some((init, Vec::new()));
            }
            TraceLine::Step(st) => {
                let (init, steps) = current
                    .as_mut()
                    .ok_or_else(|| structure("step outside an epoch"))?;
                if st.epoch != init.epoch {
                    return Err(structure("step epoch differs from its init"));
                }
                steps.push(st);
            }
            TraceLine::Summary { epoch, summary } => {
                let (init, steps) = current
                    .take()
                    .ok_or_else(|| structure("summary outside an epoch"))?;
                if epoch != init.epoch {
                    return Err(structure("summary epoch differs from its init"));
                }
                traces.push(RunTrace {
                    init,
                    steps,
                    summary,
                });
            }
        }
    }
    if current.is_some() {
        return Err(TraceError::Structure {
            line: text.lines().count(),
            message: "missing summary".into(),
        });
    }
    Ok(traces)
}

fn apply_revisions(
    p: &mut Projection,
    revisions: &[RevisionEntry],
    epoch: u32,
    step: u32,
) -> Result<(), ReplayError> {
    for r in revisions.iter().filter(|r| r.applied) {
        let k = (r.node.clone(), r.claim.clone());
        let Some(current) = p.get(&k) else {
            return Err(ReplayError::Mismatch {
                epoch,
                step,
                message: format!("revision of unknown claim {}@{}", r.claim, r.node),
            });
        };
        match r.action {
            RevisionAction::Lower => {
                let bottom = Assessment::bottom(current.kind());
                p.insert(k, bottom);
            }
            RevisionAction::Retract => {
                p.remove(&k);
            }
        }
    }
    Ok(())
}

fn check_snapshot(
    p: &Projection,
    snapshot: &[ClaimValue],
    epoch: u32,
    step: u32,
) -> Result<(), ReplayError> {
    let expected: Projection = snapshot
        .iter()
        .map(|c| ((c.node.clone(), c.key.clone()), c.assessment))
        .collect();
    if &expected != p {
        return Err(ReplayError::Mismatch {
            epoch,
            step,
            message: "recorded snapshot differs from replayed state".into(),
        });
    }
    Ok(())
}

/// Re-derives the final projection by re-applying every recorded join, and
/// checks each recorded value and snapshot along the way.
pub fn replay(traces: &[RunTrace]) -> Result<Projection, ReplayError> {
    let first = traces.first().ok_or(ReplayError::Empty)?;
    let mut p: Projection = first
        .init
        .claims
        .iter()
        .map(|c| ((c.node.clone(), c.key.clone()), c.assessment))
        .collect();
    for (i, t) in traces.iter().enumerate() {
        let epoch = t.init.epoch;
        if i > 0 {
            apply_revisions(&mut p, &t.init.revisions, epoch, 0)?;
        }
        check_snapshot(&p, &t.init.claims, epoch, 0)?;
        for st in &t.steps {
            let fail = |message: String| ReplayError::Mismatch {
                epoch,
                step: st.step,
                message,
            };
            apply_revisions(&mut p, &st.revisions, epoch, st.step)?;
            for c in &st.inserted {
                let k = (c.node.clone(), c.key.clone());
                if p.contains_key(&k) {
                    return Err(fail(format!("claim {:?} inserted twice", c.key)));
                }
                p.insert(k, Assessment::bottom(t.init.domain));
            }
            for u in &st.updates {
                let k = (st.node.clone(), u.key.clone());
                let current = p
                    .get(&k)
                    .ok_or_else(|| fail(format!("update of unknown claim {:?}", u.key)))?;
                if *current != u.before {
                    return Err(fail(format!(
                        "{}: recorded before {} but state holds {}",
                        u.label, u.before, current
                    )));
                }
                let joined = current.join(&u.returned).map_err(|e| fail(e.to_string()))?;
                if joined != u.after {
                    return Err(fail(format!(
                        "{}: {} ⊔ {} is {}, recorded {}",
                        u.label, u.before, u.returned, joined, u.after
                    )));
                }
                p.insert(k, joined);
            }
            check_snapshot(&p, &st.snapshot, epoch, st.step)?;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessment::{DomainKind, Strength};
    use crate::transformer::UpdatePhase;
    use crate::worklist::TerminationBudget;

    fn g(s: Strength, r: Strength) -> Assessment {
        Assessment::graded(s, r)
    }

    fn update(label: &str, before: Assessment, returned: Assessment) -> ClaimUpdate {
        ClaimUpdate {
            key: label.to_lowercase(),
            label: label.into(),
            phase: UpdatePhase::Existing,
            before,
            returned,
            after: before.join(&returned).unwrap(),
            attached: vec![],
        }
    }

    fn value(label: &str, a: Assessment) -> ClaimValue {
        ClaimValue {
            node: "a".into(),
            key: label.to_lowercase(),
            label: label.into(),
            assessment: a,
        }
    }

    fn trace() -> RunTrace {
        use Strength::*;
        let bot = g(Bot, Bot);
        RunTrace {
            init: TraceInit {
                epoch: 1,
                policy: "fifo".into(),
                domain: DomainKind::Graded,
                claims: vec![value("P", bot), value("Q", bot)],
                worklist: vec!["a".into()],
                enqueued: vec![],
                revisions: vec![],
            },
            steps: vec![TraceStep {
                epoch: 1,
                step: 1,
                node: "a".into(),
                visit: 0,
                action: "look".into(),
                revisions: vec![],
                updates: vec![update("P", bot, g(Weak, Bot)), update("Q", bot, bot)],
                inserted: vec![],
                snapshot: vec![value("P", g(Weak, Bot)), value("Q", bot)],
                worklist_after: vec![],
                enqueued: vec![],
                ac_changed: true,
                evidence_only: false,
                diagnostics: vec![],
            }],
            summary: RunSummary {
                steps: 1,
                ac_change_steps: 1,
                trigger_events: 1,
                budget: TerminationBudget::new(DomainKind::Graded, 2, 0, None),
            },
        }
    }

    #[test]
    fn join_cell_forms() {
        use Strength::*;
        let bot = g(Bot, Bot);
        assert_eq!(join_cell(&[update("P", bot, g(Weak, Bot))]), "⊥² ⊔ ⟨w,⊥⟩");
        assert_eq!(
            join_cell(&[
                update("P", bot, g(Strong, Bot)),
                update("Q", bot, g(Bot, Weak))
            ]),
            "P: ⊥² ⊔ ⟨s,⊥⟩; Q: ⊥² ⊔ ⟨⊥,w⟩"
        );
        assert_eq!(
            join_cell(&[update("P", g(Weak, Strong), g(Bot, Strong))]),
            "⟨w,s⟩ ⊔ ⟨⊥,s⟩ = ⟨w,s⟩"
        );
        assert_eq!(join_cell(&[]), "-");
    }

    #[test]
    fn table_shape() {
        let t = render_table(&[trace()]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("Step | Node | Action | P"));
        assert!(lines[2].contains("⊥²") && lines[2].ends_with("{a}"));
        assert!(lines[3].contains("⟨w,⊥⟩") && lines[3].contains("·") && lines[3].ends_with("∅"));
    }

    #[test]
    fn jsonl_roundtrip_and_replay() {
        let text = to_jsonl(&[trace()]);
        assert_eq!(text.lines().count(), 3);
        let back = parse_jsonl(&text).unwrap();
        assert_eq!(back, vec![trace()]);
        let p = replay(&back).unwrap();
        assert_eq!(
            p[&("a".into(), "p".into())],
            g(Strength::Weak, Strength::Bot)
        );
    }

    #[test]
    fn replay_catches_tampering() {
        let mut t = trace();
        t.steps[0].updates[0].after = g(Strength::Strong, Strength::Bot);
        assert!(matches!(
            replay(&[t]),
            Err(ReplayError::Mismatch { step: 1, .. })
        ));
    }

    #[test]
    fn parse_rejects_missing_summary() {
        let text = to_jsonl(&[trace()]);
        let cut: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            parse_jsonl(&cut),
            Err(TraceError::Structure { .. })
        ));
    }
}
