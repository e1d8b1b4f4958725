//! The review scenario: expected rows of the step table.

use std::collections::BTreeSet;
use std::path::PathBuf;

use agint_core::trace::render_table;
use agint_core::{load_scenario, RunTrace, Scenario};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn review() -> Scenario {
    load_scenario(scenario_path("opaque_review.scenario")).expect("shipped scenario loads")
}

pub fn review_revision() -> Scenario {
    load_scenario(scenario_path("opaque_review_revision.scenario")).expect("shipped scenario loads")
}

pub const LABELS: [&str; 7] = ["c_P", "c_Vℓ", "c_Vs", "c_U", "c_R", "c_C", "c_G"];

/// Step, node, action, the seven claim cells, join, and W after the step.
pub const ROWS: [[&str; 12]; 13] = [
    [
        "0",
        "-",
        "init",
        "⊥²",
        "⊥²",
        "⊥²",
        "⊥²",
        "⊥²",
        "⊥²",
        "⊥²",
        "-",
        "n_1 n_2 n_3 n_4 n_C n_5",
    ],
    [
        "1",
        "n_1",
        "broad parser review",
        "⟨w,⊥⟩",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "⊥² ⊔ ⟨w,⊥⟩",
        "n_2 n_3 n_4 n_C n_5",
    ],
    [
        "2",
        "n_2",
        "broad verifier review",
        "·",
        "⟨s,⊥⟩",
        "⟨⊥,w⟩",
        "·",
        "·",
        "·",
        "·",
        "c_Vℓ: ⊥² ⊔ ⟨s,⊥⟩; c_Vs: ⊥² ⊔ ⟨⊥,w⟩",
        "n_3 n_4 n_C n_5",
    ],
    [
        "3",
        "n_3",
        "inspect processor src.",
        "·",
        "·",
        "·",
        "⟨⊥,s⟩",
        "·",
        "·",
        "·",
        "⊥² ⊔ ⟨⊥,s⟩",
        "n_4 n_C n_5",
    ],
    [
        "4",
        "n_4",
        "inspect rejection branch",
        "·",
        "·",
        "·",
        "·",
        "⟨s,⊥⟩",
        "·",
        "·",
        "⊥² ⊔ ⟨s,⊥⟩",
        "n_C n_5",
    ],
    [
        "5",
        "n_C",
        "compose current evidence",
        "·",
        "·",
        "·",
        "·",
        "·",
        "⟨⊥,w⟩",
        "·",
        "⊥² ⊔ ⟨⊥,w⟩",
        "n_5 n_1 n_2",
    ],
    [
        "6",
        "n_5",
        "compose whole-goal",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "⟨⊥,w⟩",
        "⊥² ⊔ ⟨⊥,w⟩",
        "n_1 n_2",
    ],
    [
        "7",
        "n_1",
        "targeted parser search",
        "⟨w,s⟩",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "⟨w,⊥⟩ ⊔ ⟨⊥,s⟩",
        "n_2 n_C",
    ],
    [
        "8",
        "n_2",
        "re-check verifier scope",
        "·",
        "·",
        "⟨⊥,s⟩",
        "·",
        "·",
        "·",
        "·",
        "⟨⊥,w⟩ ⊔ ⟨⊥,s⟩",
        "n_C",
    ],
    [
        "9",
        "n_C",
        "compose revised context",
        "·",
        "·",
        "·",
        "·",
        "·",
        "⟨⊥,s⟩",
        "·",
        "⟨⊥,w⟩ ⊔ ⟨⊥,s⟩",
        "n_5 n_1 n_2",
    ],
    [
        "10",
        "n_5",
        "compose revised goal",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "⟨⊥,s⟩",
        "⟨⊥,w⟩ ⊔ ⟨⊥,s⟩",
        "n_1 n_2",
    ],
    [
        "11",
        "n_1",
        "reprocess (no change)",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "⟨w,s⟩ ⊔ ⟨⊥,s⟩ = ⟨w,s⟩",
        "n_2",
    ],
    [
        "12",
        "n_2",
        "reprocess (no change)",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "·",
        "c_Vℓ: ⟨s,⊥⟩ ⊔ ⟨s,⊥⟩ = ⟨s,⊥⟩; c_Vs: ⟨⊥,s⟩ ⊔ ⟨⊥,s⟩ = ⟨⊥,s⟩",
        "",
    ],
];

pub const FINAL: [(&str, &str); 7] = [
    ("c_P", "⟨w,s⟩"),
    ("c_Vℓ", "⟨s,⊥⟩"),
    ("c_Vs", "⟨⊥,s⟩"),
    ("c_U", "⟨⊥,s⟩"),
    ("c_R", "⟨s,⊥⟩"),
    ("c_C", "⟨⊥,s⟩"),
    ("c_G", "⟨⊥,s⟩"),
];

fn w_set(cell: &str) -> BTreeSet<String> {
    if cell == "∅" {
        return BTreeSet::new();
    }
    cell.trim_start_matches('{')
        .trim_end_matches('}')
        .split(", ")
        .map(str::to_string)
        .collect()
}

/// Compares a rendered one-epoch table with the expected rows. The worklist
/// column is compared as a set.
pub fn compare_table(trace: &RunTrace) -> Result<(), String> {
    let text = render_table(std::slice::from_ref(trace));
    let lines: Vec<&str> = text.lines().collect();
    let header: Vec<&str> = lines[0].split(" | ").map(str::trim).collect();
    if header[3..10] != LABELS {
        return Err(format!("claim columns are {:?}", &header[3..10]));
    }
    let rows = &lines[2..];
    if rows.len() != ROWS.len() {
        return Err(format!("{} rows, expected {}", rows.len(), ROWS.len()));
    }
    for (line, want) in rows.iter().zip(ROWS) {
        let got: Vec<&str> = line.split(" | ").map(str::trim).collect();
        if got.len() != 12 {
            return Err(format!("row {line:?} has {} cells", got.len()));
        }
        if got[..11] != want[..11] {
            return Err(format!(
                "step {}: got {:?}, expected {:?}",
                want[0],
                &got[..11],
                &want[..11]
            ));
        }
        let expected_w: BTreeSet<String> =
            want[11].split_whitespace().map(str::to_string).collect();
        if w_set(got[11]) != expected_w {
            return Err(format!(
                "step {}: W = {}, expected {{{}}}",
                want[0], got[11], want[11]
            ));
        }
    }
    Ok(())
}

pub fn compare_final(sc: &Scenario, state: &agint_core::GlobalState) -> Result<(), String> {
    for (label, value) in FINAL {
        let c = sc
            .claims
            .iter()
            .find(|c| c.label == label)
            .ok_or(format!("no claim {label}"))?;
        let got = state
            .entry(&c.node, &c.key)
            .map_err(|e| e.to_string())?
            .assessment
            .compact();
        if got != value {
            return Err(format!("{label} = {got}, expected {value}"));
        }
    }
    Ok(())
}
