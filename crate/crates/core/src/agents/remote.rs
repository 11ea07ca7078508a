//! Chat-completion backend.

use std::fmt;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts::{
    repair_prompt, reward_prompt, synthesis_prompt, thesis_prompt, CONTROL_SYSTEM, DESIGN_SYSTEM,
    PROMPT_VERSION,
};
use super::{AgentContext, AgentError, Provenance, RewardProposal, DEFAULT_REPAIR_ATTEMPTS};
use crate::evaluation::PanelFeedback;
use crate::morphology::{apply_edit, DeltaKind, DesignEdit, DesignParams, ParamChange};
use crate::reward::{
    default_probes, parse_reward, validate_reward, RewardProgram, DEFAULT_PROBE_SEED, R_MAX,
};

pub const ENV_ENDPOINT: &str = "CODESIGN_LLM_ENDPOINT";
pub const ENV_KEY: &str = "CODESIGN_LLM_KEY";

#[derive(Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Total tokens this client may spend; `None` is unlimited.
    pub token_cap: Option<u64>,
    pub attempts: usize,
    pub backoff: Duration,
    pub timeout: Duration,
    pub max_repair_attempts: usize,
    /// Where exchanges are logged, usually `<run>/exchanges`.
    pub exchange_dir: Option<PathBuf>,
}

impl fmt::Debug for RemoteConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteConfig")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<set>"))
            .field("model", &self.model)
            .field("temperature", &self.temperature)
            .field("max_tokens", &self.max_tokens)
            .field("token_cap", &self.token_cap)
            .field("exchange_dir", &self.exchange_dir)
            .finish_non_exhaustive()
    }
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            temperature: 0.7,
            max_tokens: 1024,
            token_cap: None,
            attempts: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
            max_repair_attempts: DEFAULT_REPAIR_ATTEMPTS,
            exchange_dir: None,
        }
    }

    /// Endpoint and key from the environment.
    pub fn from_env(model: impl Into<String>) -> Result<Self, AgentError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| AgentError::NotConfigured(format!("{ENV_ENDPOINT} is not set")))?;
        let mut cfg = Self::new(endpoint, model);
        cfg.api_key = std::env::var(ENV_KEY).ok();
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub prompt_version: String,
    pub request: ChatRequest,
    pub response: Option<ChatResponse>,
    pub error: Option<String>,
}

pub struct RemoteClient {
    config: RemoteConfig,
    agent: ureq::Agent,
    /// Tokens spent so far; the lock also keeps one request in flight.
    spent: Mutex<u64>,
    logged: Mutex<usize>,
}

impl fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteClient")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

enum Failure {
    Transient(String),
    Fatal(AgentError),
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            agent,
            spent: Mutex::new(0),
            logged: Mutex::new(0),
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    pub fn tokens_used(&self) -> u64 {
        *self.spent.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn request(&self, system: &str, user: &str) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            system: system.to_string(),
            user: user.to_string(),
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        }
    }

    fn send_once(&self, req: &ChatRequest) -> Result<ChatResponse, Failure> {
        let body = json!({
            "model": req.model,
            "messages": [
                {"role": "system", "content": req.system},
                {"role": "user", "content": req.user},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let started = Instant::now();
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send_json(&body)
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Failure::Fatal(AgentError::EndpointUnreachable(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            ))));
        }
        let latency_ms = started.elapsed().as_millis() as u64;
        parse_chat_body(&text, latency_ms).map_err(Failure::Fatal)
    }

    fn log(&self, exchange: &ChatExchange) -> Result<(), AgentError> {
        let Some(dir) = &self.config.exchange_dir else {
            return Ok(());
        };
        let mut n = self.logged.lock().unwrap_or_else(|e| e.into_inner());
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("exchange_{:05}.json", *n));
        let text = serde_json::to_string_pretty(exchange).map_err(std::io::Error::other)?;
        std::fs::write(path, text)?;
        *n += 1;
        Ok(())
    }

    /// Sends one request, retrying transient failures with exponential backoff.
    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, AgentError> {
        let mut spent = self.spent.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(cap) = self.config.token_cap {
            if *spent >= cap {
                return Err(AgentError::BudgetExceeded { used: *spent, cap });
            }
        }
        let attempts = self.config.attempts.max(1);
        let mut result = Err(AgentError::EndpointUnreachable("no attempt made".into()));
        for attempt in 0..attempts {
            match self.send_once(req) {
                Ok(r) => {
                    result = Ok(r);
                    break;
                }
                Err(Failure::Fatal(e)) => {
                    result = Err(e);
                    break;
                }
                Err(Failure::Transient(msg)) => {
                    log::warn!("chat request attempt {} failed: {msg}", attempt + 1);
                    result = Err(AgentError::EndpointUnreachable(format!(
                        "{msg} (after {} attempts)",
                        attempt + 1
                    )));
                    if attempt + 1 < attempts {
                        std::thread::sleep(self.config.backoff * (1 << attempt));
                    }
                }
            }
        }
        if let Ok(r) = &result {
            *spent += r.prompt_tokens + r.completion_tokens;
        }
        drop(spent);
        self.log(&ChatExchange {
            prompt_version: PROMPT_VERSION.to_string(),
            request: req.clone(),
            response: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        })?;
        result
    }

    fn edit_loop(
        &self,
        base: &DesignParams,
        ctx: &AgentContext,
        prompt: String,
    ) -> Result<DesignEdit, AgentError> {
        let attempts = self.config.max_repair_attempts.max(1);
        let mut user = prompt.clone();
        let mut last = String::new();
        for _ in 0..attempts {
            let reply = self.complete(&self.request(DESIGN_SYSTEM, &user))?;
            let outcome = parse_design_edit_response(&reply.text).and_then(|edit| {
                apply_edit(base, &edit, &ctx.bounds)
                    .map(|_| edit)
                    .map_err(|e| AgentError::MalformedResponse(e.to_string()))
            });
            match outcome {
                Ok(edit) => return Ok(edit),
                Err(e) => {
                    last = e.to_string();
                    user = format!("{prompt}\nYour previous reply was rejected: {last}");
                }
            }
        }
        Err(AgentError::ProposalInfeasible { attempts, last })
    }

    pub fn propose_thesis(&self, ctx: &AgentContext) -> Result<DesignEdit, AgentError> {
        self.edit_loop(&ctx.current_design, ctx, thesis_prompt(ctx))
    }

    pub fn synthesize_design(
        &self,
        ctx: &AgentContext,
        thesis: &DesignParams,
        feedback: &PanelFeedback,
    ) -> Result<DesignEdit, AgentError> {
        self.edit_loop(thesis, ctx, synthesis_prompt(ctx, thesis, feedback))
    }

    /// Asks for each variant separately. Invalid replies go through the
    /// repair loop; candidates that stay invalid are dropped.
    pub fn generate_rewards(
        &self,
        ctx: &AgentContext,
        design: &DesignParams,
    ) -> Result<RewardProposal, AgentError> {
        let wanted = ctx.variants_per_design;
        let mut programs: Vec<RewardProgram> = Vec::new();
        let mut dropped = Vec::new();
        let mut repairs = 0;
        for variant in 0..wanted {
            let previous: Vec<String> = programs.iter().map(|p| p.source.clone()).collect();
            let user = reward_prompt(ctx, design, variant, &previous);
            let reply = self.complete(&self.request(CONTROL_SYSTEM, &user))?;
            let source = match parse_reward_response(&reply.text) {
                Ok(s) => s,
                Err(e) => {
                    dropped.push(e.to_string());
                    continue;
                }
            };
            let error = match check_reward(&source) {
                Ok(p) => {
                    push_distinct(&mut programs, p, &mut dropped);
                    continue;
                }
                Err(e) => e,
            };
            let mut ask = |prompt: &str| {
                let r = self.complete(&self.request(CONTROL_SYSTEM, prompt))?;
                parse_reward_response(&r.text)
            };
            match repair_reward(&source, &error, &mut ask, self.config.max_repair_attempts) {
                Ok((p, used)) => {
                    repairs += used;
                    push_distinct(&mut programs, p, &mut dropped);
                }
                Err(e @ AgentError::RepairExhausted { attempts, .. }) => {
                    repairs += attempts;
                    dropped.push(e.to_string());
                }
                Err(e) => return Err(e),
            }
        }
        if programs.is_empty() {
            return Err(AgentError::GenerationFailed { wanted });
        }
        Ok(RewardProposal {
            programs,
            provenance: Provenance::Remote,
            repair_attempts_used: repairs,
            dropped,
        })
    }
}

fn push_distinct(programs: &mut Vec<RewardProgram>, p: RewardProgram, dropped: &mut Vec<String>) {
    if programs.iter().any(|q| q.source == p.source) {
        dropped.push(format!("duplicate program: {}", p.source));
    } else {
        programs.push(p);
    }
}

/// Sends `req` through `client`.
pub fn llm_complete(client: &RemoteClient, req: &ChatRequest) -> Result<String, AgentError> {
    client.complete(req).map(|r| r.text)
}

fn parse_chat_body(body: &str, latency_ms: u64) -> Result<ChatResponse, AgentError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| AgentError::MalformedResponse(format!("response is not JSON: {e}")))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            AgentError::MalformedResponse("missing choices[0].message.content".into())
        })?;
    let usage = |k: &str| {
        v.pointer(&format!("/usage/{k}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(ChatResponse {
        text: text.to_string(),
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
        latency_ms,
    })
}

/// The outermost `open`..`close` span, which skips prose and code fences.
fn json_span(text: &str, open: char, close: char) -> Option<&str> {
    let start = text.find(open)?;
    let end = text.rfind(close)?;
    (end > start).then(|| &text[start..=end])
}

#[derive(Deserialize)]
struct EditItem {
    param: String,
    kind: String,
    value: f64,
    #[serde(default)]
    why: String,
}

pub fn parse_design_edit_response(text: &str) -> Result<DesignEdit, AgentError> {
    let span = json_span(text, '[', ']')
        .ok_or_else(|| AgentError::MalformedResponse("no JSON array in reply".into()))?;
    let items: Vec<EditItem> =
        serde_json::from_str(span).map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
    let mut changes = Vec::with_capacity(items.len());
    let mut why = Vec::new();
    for it in items {
        let kind = match it.kind.as_str() {
            "absolute" => DeltaKind::Absolute,
            "relative" => DeltaKind::Relative,
            other => {
                return Err(AgentError::MalformedResponse(format!(
                    "unknown kind {other:?}"
                )))
            }
        };
        changes.push(ParamChange {
            path: it.param,
            kind,
            value: it.value,
        });
        if !it.why.is_empty() {
            why.push(it.why);
        }
    }
    let edit = DesignEdit {
        changes,
        rationale: why.join(" "),
    };
    edit.resolve()
        .map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
    Ok(edit)
}

#[derive(Deserialize)]
struct RewardReply {
    reward_dsl: String,
}

/// Extracts the reward expression text; does not parse it.
pub fn parse_reward_response(text: &str) -> Result<String, AgentError> {
    let span = json_span(text, '{', '}')
        .ok_or_else(|| AgentError::MalformedResponse("no JSON object in reply".into()))?;
    let r: RewardReply =
        serde_json::from_str(span).map_err(|e| AgentError::MalformedResponse(e.to_string()))?;
    Ok(r.reward_dsl)
}

/// Parses and validates a reward source, reporting the first problem.
pub fn check_reward(source: &str) -> Result<RewardProgram, String> {
    let p = parse_reward(source).map_err(|e| e.to_string())?;
    let report = validate_reward(&p, &default_probes(DEFAULT_PROBE_SEED), R_MAX);
    if report.is_ok() {
        Ok(p)
    } else {
        Err(report.violations.join("; "))
    }
}

/// Re-prompts `ask` with the error until a candidate parses and validates.
/// Returns the program and the number of attempts used.
pub fn repair_reward(
    bad_source: &str,
    error: &str,
    ask: &mut dyn FnMut(&str) -> Result<String, AgentError>,
    max_attempts: usize,
) -> Result<(RewardProgram, usize), AgentError> {
    if let Ok(p) = check_reward(bad_source) {
        return Ok((p, 0));
    }
    let mut source = bad_source.to_string();
    let mut last = error.to_string();
    for attempt in 1..=max_attempts {
        match ask(&repair_prompt(&source, &last)) {
            Ok(candidate) => match check_reward(&candidate) {
                Ok(p) => return Ok((p, attempt)),
                Err(e) => {
                    source = candidate;
                    last = e;
                }
            },
            Err(e @ AgentError::MalformedResponse(_)) => last = e.to_string(),
            Err(e) => return Err(e),
        }
    }
    Err(AgentError::RepairExhausted {
        attempts: max_attempts,
        last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves `replies` (status, body) one per connection, then stops.
    fn stub(replies: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        format!("http://{addr}/v1/chat/completions")
    }

    fn reply(content: &str) -> String {
        json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": 10, "completion_tokens": 5}
        })
        .to_string()
    }

    fn client(endpoint: String) -> RemoteClient {
        let mut cfg = RemoteConfig::new(endpoint, "stub");
        cfg.backoff = Duration::from_millis(1);
        cfg.timeout = Duration::from_secs(5);
        RemoteClient::new(cfg)
    }

    #[test]
    fn canned_reply_round_trips() {
        let c = client(stub(vec![(200, reply("hello"))]));
        let text = llm_complete(&c, &c.request("sys", "user")).unwrap();
        assert_eq!(text, "hello");
        assert_eq!(c.tokens_used(), 15);
    }

    #[test]
    fn transient_errors_are_retried() {
        let c = client(stub(vec![(503, "{}".into()), (200, reply("ok"))]));
        assert_eq!(llm_complete(&c, &c.request("s", "u")).unwrap(), "ok");
    }

    #[test]
    fn unreachable_endpoint() {
        let port = TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let c = client(format!("http://127.0.0.1:{port}/"));
        let err = llm_complete(&c, &c.request("s", "u")).unwrap_err();
        match err {
            AgentError::EndpointUnreachable(m) => assert!(m.contains("after 3 attempts"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_content_is_malformed() {
        let c = client(stub(vec![(200, r#"{"choices": []}"#.into())]));
        assert!(matches!(
            llm_complete(&c, &c.request("s", "u")),
            Err(AgentError::MalformedResponse(_))
        ));
    }

    #[test]
    fn token_cap_is_enforced() {
        let mut cfg = RemoteConfig::new(stub(vec![(200, reply("a"))]), "stub");
        cfg.token_cap = Some(10);
        let c = RemoteClient::new(cfg);
        c.complete(&c.request("s", "u")).unwrap();
        assert!(matches!(
            c.complete(&c.request("s", "u")),
            Err(AgentError::BudgetExceeded { used: 15, cap: 10 })
        ));
    }

    #[test]
    fn exchanges_are_logged() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RemoteConfig::new(stub(vec![(200, reply("a"))]), "stub");
        cfg.exchange_dir = Some(dir.path().join("exchanges"));
        let c = RemoteClient::new(cfg);
        c.complete(&c.request("s", "u")).unwrap();
        let text =
            std::fs::read_to_string(dir.path().join("exchanges/exchange_00000.json")).unwrap();
        let ex: ChatExchange = serde_json::from_str(&text).unwrap();
        assert_eq!(ex.response.unwrap().text, "a");
        assert_eq!(ex.request.user, "u");
    }

    #[test]
    fn design_edit_schema() {
        let text = "Here you go:\n```json\n[{\"param\": \"upper_len\", \"kind\": \"relative\", \"value\": 0.1, \"why\": \"longer stride\"}]\n```";
        let e = parse_design_edit_response(text).unwrap();
        assert_eq!(e.changes, vec![ParamChange::relative("upper_len", 0.1)]);
        assert_eq!(e.rationale, "longer stride");
        assert!(parse_design_edit_response(
            r#"[{"param": "wings", "kind": "relative", "value": 1}]"#
        )
        .is_err());
        assert!(parse_design_edit_response(
            r#"[{"param": "upper_len", "kind": "scale", "value": 1}]"#
        )
        .is_err());
    }

    #[test]
    fn reward_schema() {
        let src = parse_reward_response(r#"{"reward_dsl": "forward_speed + alive", "why": "x"}"#)
            .unwrap();
        assert_eq!(src, "forward_speed + alive");
        assert!(parse_reward_response("forward_speed").is_err());
    }

    #[test]
    fn repair_fixes_trailing_operator() {
        let mut calls = 0;
        let mut ask = |_: &str| {
            calls += 1;
            Ok("forward_speed + alive".to_string())
        };
        let (p, used) = repair_reward("forward_speed +", "unexpected end", &mut ask, 3).unwrap();
        assert_eq!(p.source, "forward_speed + alive");
        assert_eq!(used, 1);
        assert_eq!(calls, 1);
    }

    #[test]
    fn repair_gives_up() {
        let mut ask = |_: &str| Ok("((".to_string());
        assert!(matches!(
            repair_reward("forward_speed +", "e", &mut ask, 3),
            Err(AgentError::RepairExhausted { attempts: 3, .. })
        ));
    }

    #[test]
    fn valid_source_needs_no_repair() {
        let mut ask = |_: &str| -> Result<String, AgentError> { panic!("should not be called") };
        let (p, used) = repair_reward("forward_speed", "", &mut ask, 3).unwrap();
        assert_eq!((p.source.as_str(), used), ("forward_speed", 0));
    }

    #[test]
    fn remote_rewards_drop_unrepairable() {
        let good = reply(r#"{"reward_dsl": "forward_speed + alive", "why": ""}"#);
        let bad = reply(r#"{"reward_dsl": "forward_speed +", "why": ""}"#);
        let c = client(stub(vec![
            (200, good),
            (200, bad.clone()),
            (200, bad.clone()),
            (200, bad.clone()),
            (200, bad),
        ]));
        let mut ctx = AgentContext::new(crate::morphology::default_design(), 1, 0);
        ctx.variants_per_design = 2;
        let p = c
            .generate_rewards(&ctx, &ctx.current_design.clone())
            .unwrap();
        assert_eq!(p.programs.len(), 1);
        assert_eq!(p.provenance, Provenance::Remote);
        assert_eq!(p.repair_attempts_used, 3);
        assert_eq!(p.dropped.len(), 1);
    }
}
