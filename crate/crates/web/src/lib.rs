//! Browser bindings: a graded join explorer, a stratified summary explorer
//! and a stepper over the shipped review scenario.

use agint_core::assessment::{summarize_polarity, Assessment, ConfidenceBasis, Strength};
use agint_core::parse_scenario;
use agint_core::report::verdict_line;
use agint_core::trace::render_table;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const REVIEW: &str = include_str!("../../../scenarios/opaque_review.scenario");
const REVIEW_REVISION: &str = include_str!("../../../scenarios/opaque_review_revision.scenario");

fn strength(s: &str) -> Result<Strength, String> {
    Strength::from_wire(s).ok_or_else(|| format!("unknown strength {s:?}"))
}

/// Join and order of two graded values given as wire strengths.
pub fn graded_join_json(sa: &str, ra: &str, sb: &str, rb: &str) -> Result<String, String> {
    let a = Assessment::graded(strength(sa)?, strength(ra)?);
    let b = Assessment::graded(strength(sb)?, strength(rb)?);
    let j = a.join(&b).map_err(|e| e.to_string())?;
    let leq = |x: &Assessment, y: &Assessment| x.leq(y).map_err(|e| e.to_string());
    Ok(json!({
        "a": a.compact(),
        "b": b.compact(),
        "join": j.compact(),
        "a_leq_b": leq(&a, &b)?,
        "b_leq_a": leq(&b, &a)?,
    })
    .to_string())
}

/// Summary of `[{"strength": "w", "basis": "checked"}, ...]` at each basis.
pub fn stratified_summary_json(records: &str) -> Result<String, String> {
    let v: Vec<Value> = serde_json::from_str(records).map_err(|e| e.to_string())?;
    let mut items = Vec::new();
    for r in &v {
        let s = strength(r["strength"].as_str().unwrap_or_default())?;
        if s == Strength::Bot {
            return Err("evidence strength must be w or s".into());
        }
        let b = r["basis"].as_str().unwrap_or_default();
        let basis = ConfidenceBasis::from_wire(b).ok_or_else(|| format!("unknown basis {b:?}"))?;
        items.push((s, basis));
    }
    let p = summarize_polarity(&items);
    let levels: Vec<Value> = ConfidenceBasis::ALL
        .iter()
        .map(|&k| json!({"basis": k.as_wire(), "strength": p.at(k).as_wire()}))
        .collect();
    Ok(json!({ "levels": levels }).to_string())
}

/// Runs the review scenario and returns the step table as cells.
pub fn review_steps_json(policy: &str, revision: bool) -> Result<String, String> {
    let text = if revision { REVIEW_REVISION } else { REVIEW };
    let sc = parse_scenario(text).map_err(|e| e.to_string())?;
    let mut opts = sc.run_options();
    if !policy.is_empty() {
        opts.policy = sc
            .policy_named(policy, Some(1))
            .ok_or_else(|| format!("unknown policy {policy:?}"))?;
    }
    let mut agent = sc.scripted_agent();
    let run = sc.run(&mut agent, &opts).map_err(|e| e.to_string())?;
    let table = render_table(&run.traces);
    let mut sections: Vec<Value> = Vec::new();
    let mut title = String::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header: Vec<String> = Vec::new();
    let flush = |title: &mut String,
                 header: &mut Vec<String>,
                 rows: &mut Vec<Vec<String>>,
                 out: &mut Vec<Value>| {
        if !header.is_empty() {
            out.push(json!({"title": title, "header": header, "rows": rows}));
        }
        title.clear();
        header.clear();
        rows.clear();
    };
    for line in table.lines() {
        if line.trim().is_empty() || line.starts_with("-----") {
            continue;
        }
        if !line.contains(" | ") {
            flush(&mut title, &mut header, &mut rows, &mut sections);
            title = line.to_string();
            continue;
        }
        let cells: Vec<String> = line.split(" | ").map(|c| c.trim().to_string()).collect();
        if header.is_empty() {
            header = cells;
        } else {
            rows.push(cells);
        }
    }
    flush(&mut title, &mut header, &mut rows, &mut sections);
    Ok(json!({
        "policy": opts.policy.name(),
        "epochs": sections,
        "verdict": verdict_line(&sc, &run.state),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn graded_join(sa: &str, ra: &str, sb: &str, rb: &str) -> Result<String, JsValue> {
    graded_join_json(sa, ra, sb, rb).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn stratified_summary(records: &str) -> Result<String, JsValue> {
    stratified_summary_json(records).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn review_steps(policy: &str, revision: bool) -> Result<String, JsValue> {
    review_steps_json(policy, revision).map_err(|e| JsValue::from_str(&e))
}
