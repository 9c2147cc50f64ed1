use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::cache::ResponseCache;
use super::parse::parse_rating_response;
use super::prompt::{build_rating_prompt, RatingPrompt};
use super::segment::hex;
use super::{Observation, RatingOutcome, RatingTeacher, Segment};
use crate::error::{Error, Result};
use crate::rating::RatingLabel;

pub const ENV_ENDPOINT: &str = "VLM_ENDPOINT";
pub const ENV_API_KEY: &str = "VLM_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct VlmConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    /// Total attempts per segment before giving up.
    pub max_retries: usize,
    pub max_in_flight: usize,
    pub cache_path: Option<PathBuf>,
    /// Maximum number of non-cached segment queries.
    pub budget: usize,
    /// Delay before the second attempt; doubles on every further attempt.
    pub backoff_base: Duration,
    pub request_timeout: Duration,
}

impl VlmConfig {
    pub fn new(endpoint: impl Into<String>, budget: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            model: "gemini-1.5-pro".into(),
            temperature: 0.0,
            max_retries: 3,
            max_in_flight: 4,
            cache_path: None,
            budget,
            backoff_base: Duration::from_millis(500),
            request_timeout: Duration::from_secs(120),
        }
    }

    /// Endpoint and credentials from `VLM_ENDPOINT` / `VLM_API_KEY`.
    pub fn from_env(budget: usize) -> Result<Self> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .ok()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| Error::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let mut cfg = Self::new(endpoint, budget);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty());
        Ok(cfg)
    }
}

/// Labels returned for one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlmRating {
    pub labels: Vec<RatingLabel>,
    pub raw_text: String,
    pub cached: bool,
    pub attempts: usize,
}

/// Rating teacher backed by an HTTP vision-language model endpoint.
///
/// Each query is two round trips: an analysis request carrying the
/// observations, then a rating request that embeds the analysis. Successful
/// replies are cached; the budget is charged once per non-cached segment when
/// its first request is issued, whatever the outcome.
pub struct VlmTeacher {
    config: VlmConfig,
    class_names: Vec<String>,
    agent: ureq::Agent,
    cache: ResponseCache,
    remaining: AtomicUsize,
    spent: AtomicUsize,
    failures: AtomicUsize,
}

impl VlmTeacher {
    pub fn new(config: VlmConfig, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::Config("need at least two rating classes".into()));
        }
        if config.max_retries == 0 || config.max_in_flight == 0 {
            return Err(Error::Config(
                "max_retries and max_in_flight must be positive".into(),
            ));
        }
        let cache = match &config.cache_path {
            Some(p) => ResponseCache::open(p)?,
            None => ResponseCache::in_memory(),
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            remaining: AtomicUsize::new(config.budget),
            spent: AtomicUsize::new(0),
            failures: AtomicUsize::new(0),
            config,
            class_names,
            agent,
            cache,
        })
    }

    pub fn budget_spent(&self) -> usize {
        self.spent.load(Ordering::SeqCst)
    }

    pub fn budget_remaining(&self) -> usize {
        self.remaining.load(Ordering::SeqCst)
    }

    /// Segments given up on after exhausting retries.
    pub fn failures(&self) -> usize {
        self.failures.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    fn cache_key(&self, segment: &Segment, prompt: &RatingPrompt) -> String {
        let mut h = Sha256::new();
        h.update(segment.content_hash().as_bytes());
        h.update([0u8]);
        h.update(prompt.analysis.as_bytes());
        h.update([0u8]);
        h.update(prompt.rating_template.as_bytes());
        h.update([0u8]);
        h.update(self.config.model.as_bytes());
        h.update(self.config.temperature.to_bits().to_le_bytes());
        hex(&h.finalize())
    }

    fn try_charge(&self) -> bool {
        let ok = self
            .remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |b| b.checked_sub(1))
            .is_ok();
        if ok {
            self.spent.fetch_add(1, Ordering::SeqCst);
        }
        ok
    }

    fn post(&self, content: Vec<Value>) -> Result<String> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{ "role": "user", "content": content }],
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| Error::Http(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(Error::Http(format!("status {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text)?;
        extract_text(&v).ok_or_else(|| Error::Http("response has no text field".into()))
    }

    fn analysis_content(segment: &Segment, prompt: &RatingPrompt) -> Vec<Value> {
        let mut content = Vec::with_capacity(segment.observations.len() + 1);
        for (t, obs) in segment.observations.iter().enumerate() {
            match obs {
                Observation::Text(grid) => content.push(json!({
                    "type": "text",
                    "text": format!("Observation at time step {t}:\n{grid}"),
                })),
                Observation::Image(bytes) => content.push(json!({
                    "type": "image",
                    "data": base64::engine::general_purpose::STANDARD.encode(bytes),
                })),
            }
        }
        content.push(json!({ "type": "text", "text": prompt.analysis }));
        content
    }

    /// Rates one segment: cache lookup, budget charge, then up to
    /// `max_retries` attempts with exponential backoff between them.
    pub fn vlm_rate(&self, segment: &Segment) -> Result<VlmRating> {
        let prompt = build_rating_prompt(segment, self.class_names.len(), &self.class_names)?;
        let key = self.cache_key(segment, &prompt);
        if let Some(rec) = self.cache.get(&key) {
            if rec.labels.len() == prompt.expected_count
                && rec.labels.iter().all(|&l| l < self.class_names.len())
            {
                return Ok(VlmRating {
                    labels: rec
                        .labels
                        .into_iter()
                        .map(RatingLabel::new_unchecked)
                        .collect(),
                    raw_text: rec.raw,
                    cached: true,
                    attempts: 0,
                });
            }
        }
        if !self.try_charge() {
            return Err(Error::BudgetExhausted);
        }
        let mut last_response = None;
        for attempt in 0..self.config.max_retries {
            if attempt > 0 {
                let factor = 1u32 << (attempt - 1).min(16);
                std::thread::sleep(self.config.backoff_base.saturating_mul(factor));
            }
            let analysis = match self.post(Self::analysis_content(segment, &prompt)) {
                Ok(a) => a,
                Err(e) => {
                    last_response = Some(e.to_string());
                    continue;
                }
            };
            let rating_text = prompt.rating_prompt(&analysis);
            let raw = match self.post(vec![json!({ "type": "text", "text": rating_text })]) {
                Ok(r) => r,
                Err(e) => {
                    last_response = Some(e.to_string());
                    continue;
                }
            };
            match parse_rating_response(&raw, &self.class_names, prompt.expected_count) {
                Ok(labels) => {
                    self.cache.insert(
                        key,
                        raw.clone(),
                        labels.iter().map(|l| l.index()).collect(),
                    )?;
                    return Ok(VlmRating {
                        labels,
                        raw_text: raw,
                        cached: false,
                        attempts: attempt + 1,
                    });
                }
                Err(_) => last_response = Some(raw),
            }
        }
        self.failures.fetch_add(1, Ordering::SeqCst);
        Err(Error::TeacherUnavailable {
            attempts: self.config.max_retries,
            last_response,
        })
    }

    /// Rates many segments with at most `max_in_flight` queries outstanding.
    /// Results are returned in input order.
    pub fn vlm_rate_many(&self, segments: &[Segment]) -> Vec<Result<VlmRating>> {
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.min(segments.len()).max(1);
        let mut slots: Vec<Option<Result<VlmRating>>> = (0..segments.len()).map(|_| None).collect();
        let results: Vec<Vec<(usize, Result<VlmRating>)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            if i >= segments.len() {
                                break;
                            }
                            done.push((i, self.vlm_rate(&segments[i])));
                        }
                        done
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("query worker panicked"))
                .collect()
        });
        for (i, r) in results.into_iter().flatten() {
            slots[i] = Some(r);
        }
        slots
            .into_iter()
            .map(|s| s.expect("every segment is rated exactly once"))
            .collect()
    }
}

impl RatingTeacher for VlmTeacher {
    fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    fn rate(&mut self, segments: &[Segment]) -> Vec<RatingOutcome> {
        self.vlm_rate_many(segments)
            .into_iter()
            .map(|r| match r {
                Ok(v) => RatingOutcome {
                    charged: !v.cached,
                    cached: v.cached,
                    labels: Ok(v.labels),
                },
                Err(e) => RatingOutcome {
                    charged: !matches!(e, Error::BudgetExhausted),
                    cached: false,
                    labels: Err(e),
                },
            })
            .collect()
    }
}

/// Reply text from `{"text": ..}`, OpenAI-style `choices[0].message.content`,
/// or a `content` array of text parts.
pub(crate) fn extract_text(v: &Value) -> Option<String> {
    if let Some(t) = v.get("text").and_then(Value::as_str) {
        return Some(t.to_string());
    }
    if let Some(t) = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
    {
        return Some(t.to_string());
    }
    let parts = v.get("content")?.as_array()?;
    let text: Vec<&str> = parts
        .iter()
        .filter_map(|p| p.get("text").and_then(Value::as_str))
        .collect();
    (!text.is_empty()).then(|| text.join(""))
}
