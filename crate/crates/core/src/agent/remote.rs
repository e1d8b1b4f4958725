//! Synchronous JSON-over-HTTP backend.

use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};

use super::{
    decode_eval_value, decode_gen_value, describe, Agent, AgentError, AgentEvalResult,
    AgentGenResult, EvalRequest, EvidenceItem, GenRequest,
};
use crate::assessment::{summarize_polarity, Assessment, DomainKind, StratifiedValue};
use crate::claims::Polarity;
use crate::queries::Context;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    Eval,
    Gen,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemoteReply {
    Eval(AgentEvalResult),
    Gen(AgentGenResult),
}

/// One request/response pair, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exchange {
    pub request: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn base_request(kind: &str, ctx: &Context, domain: DomainKind, prompt: &str) -> Value {
    json!({
        "kind": kind,
        "node": ctx.node,
        "goal": ctx.goal,
        "domain": domain,
        "code": ctx.code,
        "pred_states": ctx.pred_states,
        "query": prompt,
    })
}

pub fn encode_eval(req: &EvalRequest<'_>) -> Value {
    let mut v = base_request("eval", req.ctx, req.domain, req.prompt);
    v["claim"] = json!(req.claim.text);
    v
}

pub fn encode_gen(req: &GenRequest<'_>) -> Value {
    let mut v = base_request("gen", req.ctx, req.domain, req.prompt);
    v["max_claims"] = json!(req.query.max_claims);
    v
}

/// Strict response validation. For stratified runs the assessment is rebuilt
/// from the fresh evidence; a disagreeing body value is logged and dropped.
pub fn decode_remote(
    body: &[u8],
    kind: RequestKind,
    domain: DomainKind,
) -> Result<RemoteReply, AgentError> {
    let v: Value = serde_json::from_slice(body).map_err(|e| {
        AgentError::Malformed(format!(
            "invalid JSON at line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    match kind {
        RequestKind::Gen => decode_gen_value(&v, "")
            .map(RemoteReply::Gen)
            .map_err(|e| AgentError::Malformed(describe(&e))),
        RequestKind::Eval => {
            let mut r = decode_eval_value(&v, domain, "", false)
                .map_err(|e| AgentError::Malformed(describe(&e)))?;
            if domain == DomainKind::Stratified {
                let summary = summarize_fresh(&r);
                if let Some(claimed) = r.assessment {
                    if claimed != summary {
                        log::warn!("stratified assessment {claimed} disagrees with evidence summary {summary}; using the summary");
                    }
                }
                r.assessment = Some(summary);
            }
            Ok(RemoteReply::Eval(r))
        }
    }
}

fn summarize_fresh(r: &AgentEvalResult) -> Assessment {
    let side = |pol: Polarity| {
        let items: Vec<_> = r
            .evidence
            .iter()
            .filter_map(|e| match e {
                EvidenceItem::Fresh(s) if s.polarity == pol => Some((s.strength, s.basis)),
                _ => None,
            })
            .collect();
        summarize_polarity(&items)
    };
    Assessment::Stratified(StratifiedValue::new(
        side(Polarity::Support),
        side(Polarity::Refute),
    ))
}

#[derive(Debug)]
pub struct RemoteAgent {
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
    exchanges: Vec<Exchange>,
}

impl RemoteAgent {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        RemoteAgent {
            endpoint: endpoint.into(),
            token,
            agent,
            exchanges: Vec::new(),
        }
    }

    pub fn exchanges(&self) -> &[Exchange] {
        &self.exchanges
    }

    fn post(
        &mut self,
        request: Value,
        kind: RequestKind,
        domain: DomainKind,
    ) -> Result<RemoteReply, AgentError> {
        let mut call = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            call = call.header("Authorization", format!("Bearer {t}"));
        }
        let body = request.to_string();
        let outcome = call.send(body.as_bytes()).and_then(|mut resp| {
            let status = resp.status().as_u16();
            let text = resp.body_mut().read_to_string()?;
            Ok((status, text))
        });
        match outcome {
            Ok((status, text)) if (200..300).contains(&status) => {
                let decoded = decode_remote(text.as_bytes(), kind, domain);
                self.exchanges.push(Exchange {
                    request,
                    response: Some(text),
                    error: decoded.as_ref().err().map(ToString::to_string),
                });
                decoded
            }
            Ok((status, text)) => {
                let err = AgentError::Transport(format!("HTTP status {status}"));
                self.exchanges.push(Exchange {
                    request,
                    response: Some(text),
                    error: Some(err.to_string()),
                });
                Err(err)
            }
            Err(e) => {
                let err = match e {
                    ureq::Error::Timeout(_) => {
                        AgentError::Malformed(format!("request timed out: {e}"))
                    }
                    other => AgentError::Transport(other.to_string()),
                };
                self.exchanges.push(Exchange {
                    request,
                    response: None,
                    error: Some(err.to_string()),
                });
                Err(err)
            }
        }
    }
}

impl Agent for RemoteAgent {
    fn eval(&mut self, req: &EvalRequest<'_>) -> Result<AgentEvalResult, AgentError> {
        match self.post(encode_eval(req), RequestKind::Eval, req.domain)? {
            RemoteReply::Eval(r) => Ok(r),
            RemoteReply::Gen(_) => unreachable!("decoded as eval"),
        }
    }

    fn gen(&mut self, req: &GenRequest<'_>) -> Result<AgentGenResult, AgentError> {
        match self.post(encode_gen(req), RequestKind::Gen, req.domain)? {
            RemoteReply::Gen(r) => Ok(r),
            RemoteReply::Eval(_) => unreachable!("decoded as gen"),
        }
    }
}
