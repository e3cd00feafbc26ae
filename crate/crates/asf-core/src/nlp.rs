//! Vendor-neutral translation facade with cooperation and competition
//! combinators and a benchmark statistics harness.
//!
//! Every invocation, whatever the provider, yields the same seven-field
//! record. Real cloud vendors are replaced by a local dictionary provider
//! and simulated-latency providers; the selection and aggregation logic is
//! provider-agnostic.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timefmt;

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider {provider} does not serve {source_language}->{target_language}")]
    UnsupportedPair {
        provider: String,
        source_language: String,
        target_language: String,
    },
    #[error("no provider bindings given")]
    EmptyBindings,
    #[error("no latency statistics for provider {0}")]
    StatsMissing(String),
    #[error("no preferred provider serves the request")]
    NoUsablePreference,
    #[error("every provider failed")]
    AllFailed,
    #[error("statistics need at least one sample")]
    EmptySamples,
    #[error("benchmark aborted after {completed} invocations: {cause}")]
    PartialBenchmark { completed: usize, cause: String },
    #[error("unknown provider {0}")]
    UnknownProvider(String),
}

/// Source of record timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        timefmt::now_utc()
    }
}

/// Fixed timestamp, for reproducible records.
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRequest {
    pub text: String,
    pub source_language: String,
    pub target_language: String,
}

impl TranslationRequest {
    pub fn new(
        text: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Result<Self, NlpError> {
        let request = TranslationRequest {
            text: text.into(),
            source_language: source.into(),
            target_language: target.into(),
        };
        request.validate()?;
        Ok(request)
    }

    fn validate(&self) -> Result<(), NlpError> {
        if self.text.is_empty() {
            return Err(NlpError::InvalidRequest("text must be nonempty".into()));
        }
        for (name, code) in [
            ("source_language", &self.source_language),
            ("target_language", &self.target_language),
        ] {
            if code.len() != 2 || !code.chars().all(|c| c.is_ascii_lowercase()) {
                return Err(NlpError::InvalidRequest(format!(
                    "{name} must be a 2-letter lowercase code, got '{code}'"
                )));
            }
        }
        Ok(())
    }
}

/// The uniform seven-field invocation record.
///
/// `to_json_string` is the canonical rendering: exactly these keys in this
/// order, the date as `MM/DD/YYYY HH:MM:SS`, and the elapsed time with
/// four decimal places.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    #[serde(with = "record_date")]
    pub date: DateTime<Utc>,
    pub input: String,
    pub input_language: String,
    pub output: String,
    pub output_language: String,
    pub provider: String,
    pub time: f64,
}

mod record_date {
    use chrono::{DateTime, Utc};
    use serde::{self, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::timefmt::format_record_date(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        let naive =
            chrono::NaiveDateTime::parse_from_str(&text, crate::timefmt::RECORD_DATE_FORMAT)
                .map_err(serde::de::Error::custom)?;
        Ok(DateTime::from_naive_utc_and_offset(naive, Utc))
    }
}

impl InvocationRecord {
    /// Canonical single-object JSON with a 4-decimal time.
    pub fn to_json_string(&self) -> String {
        let field = |s: &str| serde_json::to_string(s).expect("string serializes");
        format!(
            "{{\"date\": {}, \"input\": {}, \"input_language\": {}, \"output\": {}, \"output_language\": {}, \"provider\": {}, \"time\": {:.4}}}",
            field(&timefmt::format_record_date(&self.date)),
            field(&self.input),
            field(&self.input_language),
            field(&self.output),
            field(&self.output_language),
            field(&self.provider),
            self.time,
        )
    }
}

/// (text, source, target) -> translation.
pub type Dictionary = BTreeMap<(String, String, String), String>;

/// The dictionary every provider falls back to; seeded with the demo
/// en<->de pair.
pub fn demo_dictionary() -> Dictionary {
    let mut dict = Dictionary::new();
    dict.insert(
        ("hello world".into(), "en".into(), "de".into()),
        "Hallo Welt".into(),
    );
    dict.insert(
        ("Hallo Welt".into(), "de".into(), "en".into()),
        "Hello World".into(),
    );
    dict
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    LocalDictionary,
    SimulatedLatency,
}

/// Latency model of a simulated provider, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatencyModel {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
}

/// One configured provider.
pub struct ProviderBinding {
    label: String,
    kind: ProviderKind,
    latency: Option<LatencyModel>,
    dictionary: Option<Dictionary>,
    cost_per_call: f64,
    rng: Mutex<StdRng>,
    invocations: AtomicU64,
}

impl ProviderBinding {
    /// A dictionary-backed local provider. Without an explicit dictionary
    /// the demo dictionary serves.
    pub fn local(label: impl Into<String>, dictionary: Option<Dictionary>, cost: f64) -> Self {
        ProviderBinding {
            label: label.into(),
            kind: ProviderKind::LocalDictionary,
            latency: None,
            dictionary,
            cost_per_call: cost,
            rng: Mutex::new(StdRng::seed_from_u64(0)),
            invocations: AtomicU64::new(0),
        }
    }

    /// A simulated cloud provider: output from the demo dictionary, time
    /// sampled from the latency model.
    pub fn simulated(
        label: impl Into<String>,
        latency: LatencyModel,
        cost: f64,
        seed: u64,
    ) -> Self {
        ProviderBinding {
            label: label.into(),
            kind: ProviderKind::SimulatedLatency,
            latency: Some(latency),
            dictionary: None,
            cost_per_call: cost,
            rng: Mutex::new(StdRng::seed_from_u64(seed)),
            invocations: AtomicU64::new(0),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> ProviderKind {
        self.kind
    }

    pub fn cost_per_call(&self) -> f64 {
        self.cost_per_call
    }

    /// How many times this binding was invoked.
    pub fn invocation_count(&self) -> u64 {
        self.invocations.load(Ordering::SeqCst)
    }

    /// Whether the language pair is answerable without invoking.
    pub fn supports(&self, request: &TranslationRequest) -> bool {
        self.resolve(request).is_some()
    }

    fn resolve(&self, request: &TranslationRequest) -> Option<String> {
        if request.source_language == request.target_language {
            // Equal codes are the echo-test path.
            return Some(request.text.clone());
        }
        let key = (
            request.text.clone(),
            request.source_language.clone(),
            request.target_language.clone(),
        );
        match &self.dictionary {
            Some(dict) => dict.get(&key).cloned(),
            None => demo_dictionary().get(&key).cloned(),
        }
    }

    fn sample_latency(&self) -> f64 {
        match self.latency {
            Some(LatencyModel::Fixed(seconds)) => seconds,
            Some(LatencyModel::Uniform { low, high }) => {
                let mut rng = self.rng.lock().expect("rng lock");
                rng.random_range(low..=high)
            }
            None => 0.0,
        }
    }
}

fn round4(value: f64) -> f64 {
    (value * 10_000.0).round() / 10_000.0
}

/// Invoke one provider and emit the uniform record. Unknown language
/// pairs fail without producing a partial record.
pub fn translate(
    binding: &ProviderBinding,
    request: &TranslationRequest,
    clock: &dyn Clock,
) -> Result<InvocationRecord, NlpError> {
    request.validate()?;
    binding.invocations.fetch_add(1, Ordering::SeqCst);

    let started = std::time::Instant::now();
    let output = binding
        .resolve(request)
        .ok_or_else(|| NlpError::UnsupportedPair {
            provider: binding.label.clone(),
            source_language: request.source_language.clone(),
            target_language: request.target_language.clone(),
        })?;
    let time = match binding.kind {
        ProviderKind::LocalDictionary => started.elapsed().as_secs_f64(),
        ProviderKind::SimulatedLatency => binding.sample_latency(),
    };

    Ok(InvocationRecord {
        date: clock.now(),
        input: request.text.clone(),
        input_language: request.source_language.clone(),
        output,
        output_language: request.target_language.clone(),
        provider: binding.label.clone(),
        time: round4(time),
    })
}

/// One slot of a cooperation fan-out: a record, or the failure that
/// replaced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CooperationOutcome {
    Record(InvocationRecord),
    Failure { provider: String, error: String },
}

impl CooperationOutcome {
    pub fn record(&self) -> Option<&InvocationRecord> {
        match self {
            CooperationOutcome::Record(record) => Some(record),
            CooperationOutcome::Failure { .. } => None,
        }
    }
}

/// Fan the request out to every binding; slots come back in binding order
/// and one failure does not abort the rest. All failing is an error.
pub fn cooperate(
    bindings: &[Arc<ProviderBinding>],
    request: &TranslationRequest,
    clock: &dyn Clock,
) -> Result<Vec<CooperationOutcome>, NlpError> {
    if bindings.is_empty() {
        return Err(NlpError::EmptyBindings);
    }
    let outcomes: Vec<CooperationOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = bindings
            .iter()
            .map(|binding| {
                scope.spawn(move || match translate(binding, request, clock) {
                    Ok(record) => CooperationOutcome::Record(record),
                    Err(e) => CooperationOutcome::Failure {
                        provider: binding.label().to_string(),
                        error: e.to_string(),
                    },
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker")).collect()
    });
    if outcomes.iter().all(|o| o.record().is_none()) {
        return Err(NlpError::AllFailed);
    }
    Ok(outcomes)
}

/// Selection policy for competition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum CompetePolicy {
    /// Minimize observed mean latency; the map must cover every binding.
    MinMeanLatency { means: BTreeMap<String, f64> },
    /// Minimize the configured cost per call.
    MinCost,
    /// First listed provider that can serve the request.
    PreferenceList { prefer: Vec<String> },
}

/// Pick exactly one binding under the policy (ties broken by label) and
/// invoke only that one.
pub fn compete(
    bindings: &[Arc<ProviderBinding>],
    request: &TranslationRequest,
    policy: &CompetePolicy,
    clock: &dyn Clock,
) -> Result<(String, InvocationRecord), NlpError> {
    if bindings.is_empty() {
        return Err(NlpError::EmptyBindings);
    }
    let chosen: &Arc<ProviderBinding> = match policy {
        CompetePolicy::MinMeanLatency { means } => {
            for binding in bindings {
                if !means.contains_key(binding.label()) {
                    return Err(NlpError::StatsMissing(binding.label().to_string()));
                }
            }
            bindings
                .iter()
                .min_by(|a, b| {
                    let ka = (means[a.label()], a.label());
                    let kb = (means[b.label()], b.label());
                    ka.0.total_cmp(&kb.0).then_with(|| ka.1.cmp(kb.1))
                })
                .expect("nonempty")
        }
        CompetePolicy::MinCost => bindings
            .iter()
            .min_by(|a, b| {
                a.cost_per_call()
                    .total_cmp(&b.cost_per_call())
                    .then_with(|| a.label().cmp(b.label()))
            })
            .expect("nonempty"),
        CompetePolicy::PreferenceList { prefer } => prefer
            .iter()
            .find_map(|label| {
                bindings
                    .iter()
                    .find(|b| b.label() == label && b.supports(request))
            })
            .ok_or(NlpError::NoUsablePreference)?,
    };
    let record = translate(chosen, request, clock)?;
    Ok((chosen.label().to_string(), record))
}

/// Descriptive statistics of a latency sample, seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    #[serde(rename = "25%")]
    pub q25: f64,
    #[serde(rename = "50%")]
    pub q50: f64,
    #[serde(rename = "75%")]
    pub q75: f64,
    pub max: f64,
}

/// Mean, sample standard deviation (n-1 denominator, 0 for a single
/// sample), and quartiles by linear interpolation between closest ranks.
pub fn stats(samples: &[f64]) -> Result<SampleStats, NlpError> {
    if samples.is_empty() {
        return Err(NlpError::EmptySamples);
    }
    let count = samples.len();
    let mean = samples.iter().sum::<f64>() / count as f64;
    let std = if count > 1 {
        let variance = samples
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / (count - 1) as f64;
        variance.sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| -> f64 {
        let rank = (count - 1) as f64 * q;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok(SampleStats {
        count,
        mean,
        std,
        min: sorted[0],
        q25: quantile(0.25),
        q50: quantile(0.50),
        q75: quantile(0.75),
        max: sorted[count - 1],
    })
}

/// Invoke the binding `n` times and summarize the observed times. Any
/// failure aborts with the number of completed invocations.
pub fn benchmark(
    binding: &ProviderBinding,
    request: &TranslationRequest,
    n: usize,
    clock: &dyn Clock,
) -> Result<SampleStats, NlpError> {
    if n == 0 {
        return Err(NlpError::InvalidRequest("benchmark needs n >= 1".into()));
    }
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        match translate(binding, request, clock) {
            Ok(record) => times.push(record.time),
            Err(e) => {
                return Err(NlpError::PartialBenchmark {
                    completed: times.len(),
                    cause: e.to_string(),
                })
            }
        }
    }
    stats(&times)
}

/// The provider set the service ships with: a local dictionary provider
/// plus three simulated cloud providers whose latency ranges follow the
/// published comparison table.
pub fn default_providers() -> Vec<Arc<ProviderBinding>> {
    vec![
        Arc::new(ProviderBinding::local("local", None, 0.0)),
        Arc::new(ProviderBinding::simulated(
            "google-api",
            LatencyModel::Uniform {
                low: 0.069,
                high: 0.374,
            },
            0.020,
            11,
        )),
        Arc::new(ProviderBinding::simulated(
            "aws-api",
            LatencyModel::Uniform {
                low: 0.064,
                high: 0.497,
            },
            0.015,
            12,
        )),
        Arc::new(ProviderBinding::simulated(
            "azure-api",
            LatencyModel::Uniform {
                low: 0.245,
                high: 0.280,
            },
            0.025,
            13,
        )),
    ]
}

/// Find a binding by label.
pub fn find_provider<'a>(
    bindings: &'a [Arc<ProviderBinding>],
    label: &str,
) -> Result<&'a Arc<ProviderBinding>, NlpError> {
    bindings
        .iter()
        .find(|b| b.label() == label)
        .ok_or_else(|| NlpError::UnknownProvider(label.to_string()))
}
