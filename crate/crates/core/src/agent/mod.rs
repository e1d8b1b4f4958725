//! Agent interface and backends.

use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::assessment::{
    Assessment, ConfidenceBasis, DomainKind, FourValue, GradedValue, StratifiedPolarity,
    StratifiedValue, Strength,
};
use crate::claims::{Claim, EvidenceId, Polarity, SourceKind};
use crate::graph::NodeId;
use crate::queries::{Context, EvalQuery, GenQuery};

#[cfg(feature = "remote")]
pub mod remote;
pub mod scripted;

pub use scripted::{ScriptEntry, ScriptKey, ScriptResult, ScriptVisit, ScriptedAgent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("malformed agent response: {0}")]
    Malformed(String),
    #[error("no script entry for ({node}, {key}, visit {visit})")]
    NoScriptEntry {
        node: NodeId,
        key: String,
        visit: u32,
    },
    #[error("agent transport failure: {0}")]
    Transport(String),
}

/// A new evidence record proposed by the agent. The engine fills in claim,
/// node, status, epoch and step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvidenceSeed {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<EvidenceId>,
    pub polarity: Polarity,
    pub strength: Strength,
    pub basis: ConfidenceBasis,
    pub source_kind: SourceKind,
    pub excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum EvidenceItem {
    Fresh(EvidenceSeed),
    Cite { cite: EvidenceId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentEvalResult {
    /// Omitted when the assessment is to be derived from the evidence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assessment: Option<Assessment>,
    pub evidence: Vec<EvidenceItem>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentGenResult {
    pub claims: Vec<String>,
}

pub struct EvalRequest<'a> {
    pub ctx: &'a Context,
    pub query: &'a EvalQuery,
    pub claim: &'a Claim,
    pub prompt: &'a str,
    /// How many times this node was processed before, across epochs.
    pub visit: u32,
    pub domain: DomainKind,
}

pub struct GenRequest<'a> {
    pub ctx: &'a Context,
    pub query: &'a GenQuery,
    pub prompt: &'a str,
    pub visit: u32,
    pub domain: DomainKind,
}

pub trait Agent {
    fn eval(&mut self, req: &EvalRequest<'_>) -> Result<AgentEvalResult, AgentError>;
    fn gen(&mut self, req: &GenRequest<'_>) -> Result<AgentGenResult, AgentError>;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn eval(&mut self, req: &EvalRequest<'_>) -> Result<AgentEvalResult, AgentError> {
        (**self).eval(req)
    }

    fn gen(&mut self, req: &GenRequest<'_>) -> Result<AgentGenResult, AgentError> {
        (**self).gen(req)
    }
}

/// A schema problem at a JSON path such as `evidence[0].strength`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

struct Decoder {
    errors: Vec<FieldError>,
}

impl Decoder {
    fn err(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str) -> Option<&'v Map<String, Value>> {
        let obj = v.as_object();
        if obj.is_none() {
            self.err(path, "expected an object");
        }
        obj
    }

    fn only_keys(&mut self, obj: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(&join(path, k), "unknown field");
            }
        }
    }

    fn string(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<String> {
        match obj.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.err(&join(path, key), "expected a string");
                None
            }
            None => {
                self.err(&join(path, key), "missing field");
                None
            }
        }
    }

    fn strength(&mut self, v: &Value, path: &str) -> Option<Strength> {
        match v.as_str().and_then(Strength::from_wire) {
            Some(s) => Some(s),
            None => {
                self.err(
                    path,
                    format!("expected one of \"bot\", \"w\", \"s\", got {v}"),
                );
                None
            }
        }
    }

    fn assessment(&mut self, v: &Value, path: &str, domain: DomainKind) -> Option<Assessment> {
        let pair = match v.as_array() {
            Some(a) if a.len() == 2 => a,
            _ => {
                self.err(path, "expected a two-element array [support, refute]");
                return None;
            }
        };
        match domain {
            DomainKind::Four => match (pair[0].as_bool(), pair[1].as_bool()) {
                (Some(s), Some(r)) => Some(Assessment::Four(FourValue::new(s, r))),
                _ => {
                    self.err(path, "expected two booleans");
                    None
                }
            },
            DomainKind::Graded => {
                let s = self.strength(&pair[0], &format!("{path}[0]"));
                let r = self.strength(&pair[1], &format!("{path}[1]"));
                Some(Assessment::Graded(GradedValue::new(s?, r?)))
            }
            DomainKind::Stratified => {
                let mut sides = [[Strength::Bot; 5]; 2];
                let mut ok = true;
                for (i, side) in sides.iter_mut().enumerate() {
                    let p = format!("{path}[{i}]");
                    match pair[i].as_array() {
                        Some(levels) if levels.len() == 5 => {
                            for (j, l) in levels.iter().enumerate() {
                                match self.strength(l, &format!("{p}[{j}]")) {
                                    Some(s) => side[j] = s,
                                    None => ok = false,
                                }
                            }
                        }
                        _ => {
                            self.err(&p, "expected five strengths ordered model..checked");
                            ok = false;
                        }
                    }
                }
                if !ok {
                    return None;
                }
                match (
                    StratifiedPolarity::new(sides[0]),
                    StratifiedPolarity::new(sides[1]),
                ) {
                    (Ok(s), Ok(r)) => Some(Assessment::Stratified(StratifiedValue::new(s, r))),
                    _ => {
                        self.err(path, "stratified levels must be non-increasing");
                        None
                    }
                }
            }
        }
    }

    fn evidence_item(&mut self, v: &Value, path: &str) -> Option<EvidenceItem> {
        let obj = self.object(v, path)?;
        if obj.contains_key("cite") {
            self.only_keys(obj, path, &["cite"]);
            let id = self.string(obj, path, "cite")?;
            return Some(EvidenceItem::Cite {
                cite: EvidenceId::new(id),
            });
        }
        self.only_keys(
            obj,
            path,
            &[
                "id",
                "polarity",
                "strength",
                "basis",
                "source_kind",
                "excerpt",
            ],
        );
        let id = match obj.get("id") {
            None => None,
            Some(Value::String(s)) if !s.is_empty() => Some(EvidenceId::new(s.clone())),
            Some(_) => {
                self.err(&join(path, "id"), "expected a non-empty string");
                None
            }
        };
        let polarity = self
            .string(obj, path, "polarity")
            .and_then(|p| match p.as_str() {
                "support" => Some(Polarity::Support),
                "refute" => Some(Polarity::Refute),
                other => {
                    self.err(
                        &join(path, "polarity"),
                        format!("expected \"support\" or \"refute\", got {other:?}"),
                    );
                    None
                }
            });
        let strength = match obj.get("strength") {
            Some(v) => match self.strength(v, &join(path, "strength")) {
                Some(Strength::Bot) => {
                    self.err(
                        &join(path, "strength"),
                        "evidence strength must be \"w\" or \"s\"",
                    );
                    None
                }
                s => s,
            },
            None => {
                self.err(&join(path, "strength"), "missing field");
                None
            }
        };
        let basis = self.string(obj, path, "basis").and_then(|b| {
            let parsed = ConfidenceBasis::from_wire(&b);
            if parsed.is_none() {
                self.err(
                    &join(path, "basis"),
                    format!("expected one of model, located, applicable, corroborated, checked, got {b:?}"),
                );
            }
            parsed
        });
        let source_kind = self.string(obj, path, "source_kind").and_then(|k| {
            let parsed = serde_json::from_value::<SourceKind>(Value::String(k.clone())).ok();
            if parsed.is_none() {
                self.err(
                    &join(path, "source_kind"),
                    format!(
                        "expected one of doc, advisory, code_observation, tool_output, model_judgment, got {k:?}"
                    ),
                );
            }
            parsed
        });
        let excerpt = self.string(obj, path, "excerpt");
        Some(EvidenceItem::Fresh(EvidenceSeed {
            id,
            polarity: polarity?,
            strength: strength?,
            basis: basis?,
            source_kind: source_kind?,
            excerpt: excerpt?,
        }))
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Strict decoding of an evaluation result object. `rationale` is optional
/// when `lenient_rationale` is set (hand-written scripts).
pub fn decode_eval_value(
    v: &Value,
    domain: DomainKind,
    path: &str,
    lenient_rationale: bool,
) -> Result<AgentEvalResult, Vec<FieldError>> {
    let mut d = Decoder { errors: Vec::new() };
    let Some(obj) = d.object(v, path) else {
        return Err(d.errors);
    };
    d.only_keys(obj, path, &["assessment", "evidence", "rationale"]);
    let assessment = match obj.get("assessment") {
        None | Some(Value::Null) => None,
        Some(a) => d.assessment(a, &join(path, "assessment"), domain),
    };
    let mut evidence = Vec::new();
    match obj.get("evidence") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                if let Some(e) = d.evidence_item(item, &format!("{}[{i}]", join(path, "evidence")))
                {
                    evidence.push(e);
                }
            }
        }
        Some(_) => d.err(&join(path, "evidence"), "expected an array"),
        None if lenient_rationale => {}
        None => d.err(&join(path, "evidence"), "missing field"),
    }
    let rationale = match obj.get("rationale") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            d.err(&join(path, "rationale"), "expected a string");
            String::new()
        }
        None if lenient_rationale => String::new(),
        None => {
            d.err(&join(path, "rationale"), "missing field");
            String::new()
        }
    };
    if !d.errors.is_empty() {
        return Err(d.errors);
    }
    Ok(AgentEvalResult {
        assessment,
        evidence,
        rationale,
    })
}

/// Strict decoding of a generation result object.
pub fn decode_gen_value(v: &Value, path: &str) -> Result<AgentGenResult, Vec<FieldError>> {
    let mut d = Decoder { errors: Vec::new() };
    let Some(obj) = d.object(v, path) else {
        return Err(d.errors);
    };
    d.only_keys(obj, path, &["claims", "rationale"]);
    let mut claims = Vec::new();
    match obj.get("claims") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                match item.as_str() {
                    Some(s) => claims.push(s.to_string()),
                    None => d.err(
                        &format!("{}[{i}]", join(path, "claims")),
                        "expected a string",
                    ),
                }
            }
        }
        Some(_) => d.err(&join(path, "claims"), "expected an array"),
        None => d.err(&join(path, "claims"), "missing field"),
    }
    if let Some(r) = obj.get("rationale") {
        if !r.is_string() {
            d.err(&join(path, "rationale"), "expected a string");
        }
    }
    if !d.errors.is_empty() {
        return Err(d.errors);
    }
    Ok(AgentGenResult { claims })
}

#[cfg_attr(not(feature = "remote"), allow(dead_code))]
pub(crate) fn describe(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
