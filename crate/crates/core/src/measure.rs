//! Prediction matching and the intelligence aggregation pipeline.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`hellinger`] scores a discrete prediction against the observed state,
//!    [`pm_continuous`] does the same for an ensemble of real-valued guesses.
//! 2. [`pm_discrete`] subtracts what a uniform random guesser would have scored.
//! 3. [`sum_pm`] adds up every prediction made in one umwelt.
//! 4. [`weighted_pm`] discounts that sum by the compressibility of the
//!    predictions, and [`combine_umwelts`] discounts the total across umwelts by
//!    how much their descriptions overlap.
//! 5. [`intelligence`] takes `log2` of the result, clamped to zero at or below 1.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use crate::complexity::{self, CompressorSpec, SerializedUmwelt};
use crate::error::{Error, Result};
use crate::stats::two_tailed_t_p;

const SUM_TOLERANCE: f64 = 1e-9;

/// Default significance level for continuous prediction matches.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// An ordered set of distinct labels shared by related distributions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Alphabet(Arc<[String]>);

impl Alphabet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Empty("alphabet"));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate label `{label}`"
                )));
            }
        }
        Ok(Alphabet(labels.into()))
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }

    fn same_order(&self, other: &Alphabet) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Serialize for Alphabet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter())
    }
}

/// A probability vector over a finite label set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoricalDistribution {
    labels: Alphabet,
    probs: Vec<f64>,
}

impl CategoricalDistribution {
    pub fn new(labels: Alphabet, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for {} labels",
                probs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { labels, probs })
    }

    pub fn uniform(labels: Alphabet) -> Self {
        let k = labels.len();
        Self {
            probs: vec![1.0 / k as f64; k],
            labels,
        }
    }

    pub fn one_hot(labels: Alphabet, label: &str) -> Result<Self> {
        let idx = labels.index_of(label).ok_or_else(|| {
            Error::InvalidDistribution(format!("label `{label}` not in {labels:?}"))
        })?;
        let mut probs = vec![0.0; labels.len()];
        probs[idx] = 1.0;
        Ok(Self { labels, probs })
    }

    pub fn labels(&self) -> &Alphabet {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.labels.index_of(label).map(|i| self.probs[i])
    }

    /// `other`'s probabilities reordered to follow `self`'s label order.
    fn aligned<'a>(&self, other: &'a CategoricalDistribution) -> Result<Cow<'a, [f64]>> {
        if self.labels.same_order(&other.labels) {
            return Ok(Cow::Borrowed(&other.probs));
        }
        let mismatch = || Error::LabelMismatch {
            left: self.labels.labels().to_vec(),
            right: other.labels.labels().to_vec(),
        };
        if self.labels.len() != other.labels.len() {
            return Err(mismatch());
        }
        self.labels
            .labels()
            .iter()
            .map(|l| other.prob(l).ok_or_else(mismatch))
            .collect::<Result<Vec<_>>>()
            .map(Cow::Owned)
    }
}

/// Mean, spread and size of an ensemble of real-valued predictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousEnsemblePrediction {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl ContinuousEnsemblePrediction {
    pub fn new(mean: f64, std: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!(
                "ensemble needs at least 2 members, got {n}"
            )));
        }
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(Error::invalid(format!(
                "ensemble mean/std must be finite with std >= 0, got {mean}/{std}"
            )));
        }
        Ok(Self { mean, std, n })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UmweltId(String);

impl UmweltId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UmweltId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UmweltId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// What was predicted and what actually happened.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    /// One distribution and one observed label per observable dimension.
    Discrete {
        predictions: Vec<CategoricalDistribution>,
        outcome: Vec<String>,
    },
    Continuous {
        prediction: ContinuousEnsemblePrediction,
        observed: f64,
    },
}

/// One time-indexed prediction about one umwelt state, paired with the state
/// that finally occurred.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionEvent {
    pub umwelt: UmweltId,
    pub state: u64,
    pub time: u64,
    pub observation: Observation,
}

impl PredictionEvent {
    pub fn discrete(
        umwelt: UmweltId,
        state: u64,
        time: u64,
        predictions: Vec<CategoricalDistribution>,
        outcome: Vec<String>,
    ) -> Result<Self> {
        if predictions.len() != outcome.len() {
            return Err(Error::invalid(format!(
                "{} predicted dimensions but {} observed",
                predictions.len(),
                outcome.len()
            )));
        }
        for (p, o) in predictions.iter().zip(&outcome) {
            if p.labels().index_of(o).is_none() {
                return Err(Error::InvalidDistribution(format!(
                    "observed label `{o}` not in {:?}",
                    p.labels()
                )));
            }
        }
        Ok(Self {
            umwelt,
            state,
            time,
            observation: Observation::Discrete {
                predictions,
                outcome,
            },
        })
    }

    pub fn continuous(
        umwelt: UmweltId,
        state: u64,
        time: u64,
        prediction: ContinuousEnsemblePrediction,
        observed: f64,
    ) -> Result<Self> {
        if !observed.is_finite() {
            return Err(Error::invalid(format!(
                "observed value {observed} is not finite"
            )));
        }
        Ok(Self {
            umwelt,
            state,
            time,
            observation: Observation::Continuous {
                prediction,
                observed,
            },
        })
    }
}

/// Source of the random-guess distribution `R` subtracted from discrete matches.
#[derive(Clone, Debug, Default)]
pub enum Baseline {
    /// Equal probability over each dimension's full label set.
    #[default]
    Uniform,
    /// Caller-supplied distribution per observable dimension.
    PerDimension(Vec<CategoricalDistribution>),
}

impl Baseline {
    fn for_dimension<'a>(
        &'a self,
        dim: usize,
        prediction: &CategoricalDistribution,
    ) -> Result<Cow<'a, CategoricalDistribution>> {
        match self {
            Baseline::Uniform => Ok(Cow::Owned(CategoricalDistribution::uniform(
                prediction.labels().clone(),
            ))),
            Baseline::PerDimension(dists) => dists.get(dim).map(Cow::Borrowed).ok_or_else(|| {
                Error::invalid(format!("no baseline distribution for dimension {dim}"))
            }),
        }
    }
}

/// All predictions made in one umwelt plus the umwelt's canonical description.
#[derive(Clone, Debug)]
pub struct UmweltRecord {
    pub id: UmweltId,
    pub serialization: SerializedUmwelt,
    pub events: Vec<PredictionEvent>,
}

impl UmweltRecord {
    pub fn new(
        id: UmweltId,
        serialization: SerializedUmwelt,
        events: Vec<PredictionEvent>,
    ) -> Result<Self> {
        if serialization.bytes.is_empty() {
            return Err(Error::Empty("umwelt serialization"));
        }
        if let Some(e) = events.iter().find(|e| e.umwelt != id) {
            return Err(Error::MixedUmwelts {
                expected: id.to_string(),
                found: e.umwelt.to_string(),
            });
        }
        Ok(Self {
            id,
            serialization,
            events,
        })
    }

    /// Canonical, rounded text of every prediction in this record.
    pub fn prediction_string(&self) -> Vec<u8> {
        complexity::serialize_predictions(&self.events)
    }
}

/// Hellinger distance between two distributions over the same label set.
pub fn hellinger(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    let q_probs = p.aligned(q)?;
    let sum: f64 = p
        .probs
        .iter()
        .zip(q_probs.iter())
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok((sum.sqrt() / std::f64::consts::SQRT_2).min(1.0))
}

pub fn degree_of_match(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    Ok(1.0 - hellinger(p, q)?)
}

/// Match of prediction `p` against final state `u`, minus the match a random
/// guess `r` would have achieved. The absolute value is kept, so a prediction
/// worse than random also scores above zero.
pub fn pm_discrete(
    p: &CategoricalDistribution,
    u: &CategoricalDistribution,
    r: &CategoricalDistribution,
) -> Result<f64> {
    Ok((degree_of_match(p, u)? - degree_of_match(r, u)?).abs())
}

/// One-sample t-test of `observed` against the ensemble; 1 if the null
/// hypothesis (no difference) survives at level `alpha`, else 0.
pub fn pm_continuous(
    pred: &ContinuousEnsemblePrediction,
    observed: f64,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if pred.n < 2 {
        return Err(Error::invalid("ensemble needs at least 2 members"));
    }
    let diff = observed - pred.mean;
    if pred.std == 0.0 {
        return Ok(if diff.abs() <= 1e-9 { 1.0 } else { 0.0 });
    }
    let t = diff / (pred.std / (pred.n as f64).sqrt());
    if !t.is_finite() {
        return Ok(0.0);
    }
    let p = two_tailed_t_p(t, (pred.n - 1) as u32)?;
    Ok(if p >= alpha { 1.0 } else { 0.0 })
}

/// Prediction match of a single event. Multi-dimensional discrete events
/// contribute the sum of their per-dimension matches.
pub fn event_pm(event: &PredictionEvent, baseline: &Baseline, alpha: f64) -> Result<f64> {
    match &event.observation {
        Observation::Discrete {
            predictions,
            outcome,
        } => {
            let mut total = 0.0;
            for (dim, (p, o)) in predictions.iter().zip(outcome).enumerate() {
                let u = CategoricalDistribution::one_hot(p.labels().clone(), o)?;
                let r = baseline.for_dimension(dim, p)?;
                total += pm_discrete(p, &u, &r)?;
            }
            Ok(total)
        }
        Observation::Continuous {
            prediction,
            observed,
        } => pm_continuous(prediction, *observed, alpha),
    }
}

/// Per-dimension matches of a discrete event; empty for continuous events.
pub fn event_pm_by_dimension(event: &PredictionEvent, baseline: &Baseline) -> Result<Vec<f64>> {
    match &event.observation {
        Observation::Discrete {
            predictions,
            outcome,
        } => predictions
            .iter()
            .zip(outcome)
            .enumerate()
            .map(|(dim, (p, o))| {
                let u = CategoricalDistribution::one_hot(p.labels().clone(), o)?;
                let r = baseline.for_dimension(dim, p)?;
                pm_discrete(p, &u, &r)
            })
            .collect(),
        Observation::Continuous { .. } => Ok(Vec::new()),
    }
}

/// Sum of prediction matches over every state and time index of one umwelt.
pub fn sum_pm(events: &[PredictionEvent], baseline: &Baseline, alpha: f64) -> Result<f64> {
    let Some(first) = events.first() else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    for e in events {
        if e.umwelt != first.umwelt {
            return Err(Error::MixedUmwelts {
                expected: first.umwelt.to_string(),
                found: e.umwelt.to_string(),
            });
        }
        total += event_pm(e, baseline, alpha)?;
    }
    Ok(total)
}

/// Compressibility of a record's predictions times its summed match.
pub fn weighted_pm(
    record: &UmweltRecord,
    compressor: &CompressorSpec,
    baseline: &Baseline,
    alpha: f64,
) -> Result<f64> {
    Ok(weigh(record, compressor, baseline, alpha)?.weighted_pm)
}

/// Intermediate values behind [`weighted_pm`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPm {
    pub sum_pm: f64,
    pub prediction_k_ratio: f64,
    pub weighted_pm: f64,
}

pub fn weigh(
    record: &UmweltRecord,
    compressor: &CompressorSpec,
    baseline: &Baseline,
    alpha: f64,
) -> Result<WeightedPm> {
    if record.events.is_empty() {
        return Ok(WeightedPm {
            sum_pm: 0.0,
            prediction_k_ratio: 0.0,
            weighted_pm: 0.0,
        });
    }
    let sum = sum_pm(&record.events, baseline, alpha)?;
    let ratio = complexity::k_ratio(&record.prediction_string(), compressor)?;
    Ok(WeightedPm {
        sum_pm: sum,
        prediction_k_ratio: ratio,
        weighted_pm: ratio * sum,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointPm {
    pub joint_factor: f64,
    pub pm_total: f64,
}

/// Combines per-umwelt matches, discounting overlap between umwelts by
/// `K(U1 + ... + Ux) / (K(U1) + ... + K(Ux))`.
///
/// Serializations are concatenated in ascending umwelt id order, separated by
/// a single newline byte. The factor is clamped to at most 1.
pub fn combine_umwelts(
    records: &[UmweltRecord],
    pms: &[f64],
    compressor: &CompressorSpec,
) -> Result<JointPm> {
    if records.is_empty() {
        return Err(Error::Empty("umwelt list"));
    }
    if records.len() != pms.len() {
        return Err(Error::invalid(format!(
            "{} records but {} prediction matches",
            records.len(),
            pms.len()
        )));
    }
    if let Some(bad) = pms.iter().find(|pm| !(pm.is_finite() && **pm >= 0.0)) {
        return Err(Error::invalid(format!(
            "prediction match {bad} is negative"
        )));
    }
    let total: f64 = pms.iter().sum();
    if records.len() == 1 {
        return Ok(JointPm {
            joint_factor: 1.0,
            pm_total: total,
        });
    }
    let mut ordered: Vec<&UmweltRecord> = records.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let mut joined = Vec::new();
    let mut separate = 0usize;
    for (i, r) in ordered.iter().enumerate() {
        if i > 0 {
            joined.push(b'\n');
        }
        joined.extend_from_slice(&r.serialization.bytes);
        separate += complexity::k_hat(&r.serialization.bytes, compressor)?;
    }
    // Container overhead on short inputs can push the raw ratio above 1.
    let joint_factor = (complexity::k_hat(&joined, compressor)? as f64 / separate as f64).min(1.0);
    Ok(JointPm {
        joint_factor,
        pm_total: joint_factor * total,
    })
}

/// `log2(pm_total)` above 1, zero otherwise.
pub fn intelligence(pm_total: f64) -> Result<f64> {
    if pm_total.is_nan() || pm_total < 0.0 {
        return Err(Error::invalid(format!(
            "total prediction match must be >= 0, got {pm_total}"
        )));
    }
    Ok(if pm_total > 1.0 { pm_total.log2() } else { 0.0 })
}

/// Intelligence over a set of umwelts, with the intermediate values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementResult {
    pub umwelt_ids: Vec<UmweltId>,
    pub pm_per_umwelt: BTreeMap<UmweltId, f64>,
    pub joint_factor: f64,
    pub pm_total: f64,
    pub intelligence: f64,
    pub compressor: String,
}

impl MeasurementResult {
    /// Recomputes the derived fields from the stored per-umwelt matches.
    pub fn check(&self) -> Result<()> {
        let sum: f64 = self.pm_per_umwelt.values().sum();
        let expected_total = self.joint_factor * sum;
        let scale = expected_total.abs().max(1.0);
        if (expected_total - self.pm_total).abs() > 1e-9 * scale {
            return Err(Error::invalid(format!(
                "pm_total {} != joint_factor x sum = {expected_total}",
                self.pm_total
            )));
        }
        let expected = intelligence(self.pm_total)?;
        if (expected - self.intelligence).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "intelligence {} != log2 clamp of pm_total = {expected}",
                self.intelligence
            )));
        }
        let ids: Vec<&UmweltId> = self.pm_per_umwelt.keys().collect();
        if ids != self.umwelt_ids.iter().collect::<Vec<_>>() {
            return Err(Error::invalid(
                "umwelt_ids disagree with pm_per_umwelt keys",
            ));
        }
        Ok(())
    }
}

/// Per-umwelt detail of a measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmweltBreakdown {
    pub id: UmweltId,
    pub events: usize,
    pub weighted: WeightedPm,
    pub umwelt_k_ratio: f64,
}

/// Runs the whole pipeline over a set of umwelt records.
pub fn measure(
    records: &[UmweltRecord],
    compressor: &CompressorSpec,
    baseline: &Baseline,
    alpha: f64,
) -> Result<(MeasurementResult, Vec<UmweltBreakdown>)> {
    let mut ids = std::collections::BTreeSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(r.id.clone())) {
        return Err(Error::invalid(format!("umwelt `{}` listed twice", dup.id)));
    }
    let mut breakdown = Vec::with_capacity(records.len());
    for r in records {
        breakdown.push(UmweltBreakdown {
            id: r.id.clone(),
            events: r.events.len(),
            weighted: weigh(r, compressor, baseline, alpha)?,
            umwelt_k_ratio: complexity::k_ratio(&r.serialization.bytes, compressor)?,
        });
    }
    let pms: Vec<f64> = breakdown.iter().map(|b| b.weighted.weighted_pm).collect();
    let joint = combine_umwelts(records, &pms, compressor)?;
    let pm_per_umwelt: BTreeMap<UmweltId, f64> = breakdown
        .iter()
        .map(|b| (b.id.clone(), b.weighted.weighted_pm))
        .collect();
    let result = MeasurementResult {
        umwelt_ids: pm_per_umwelt.keys().cloned().collect(),
        pm_per_umwelt,
        joint_factor: joint.joint_factor,
        pm_total: joint.pm_total,
        intelligence: intelligence(joint.pm_total)?,
        compressor: compressor.id(),
    };
    Ok((result, breakdown))
}
