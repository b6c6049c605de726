use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{windows, Normalizer, SeriesDataset, WindowSample};
use super::lstm::{Adam, Lstm};
use crate::complexity::{self, CompressorSpec};
use crate::error::{Error, Result};
use crate::measure::{self, ContinuousEnsemblePrediction, PredictionEvent, UmweltId, UmweltRecord};

pub const LEARNING_RATE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorConfig {
    pub window: usize,
    pub n_models: usize,
    pub hidden_units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub alpha: f64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            window: 3,
            n_models: 5,
            hidden_units: 20,
            epochs: 10,
            batch_size: 10,
            alpha: 0.05,
        }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("window", self.window),
            ("n_models", self.n_models),
            ("hidden_units", self.hidden_units),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if self.n_models < 2 {
            return Err(Error::invalid("an ensemble needs at least 2 models"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// `n_models` consecutive seeds starting at `base`.
    pub fn seeds(&self, base: u64) -> Vec<u64> {
        (0..self.n_models as u64)
            .map(|i| base.wrapping_add(i))
            .collect()
    }
}

/// Anything that maps a window of scaled values to a scalar forecast.
pub trait Regressor: Send + Sync {
    fn predict(&self, input: &[f64]) -> f64;
}

impl Regressor for Lstm {
    fn predict(&self, input: &[f64]) -> f64 {
        self.forward(input)
    }
}

/// A dataset scaled with train-split statistics and cut into windows.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub normalizer: Normalizer,
    pub scaled: Vec<f64>,
    /// Every window of the series, in order.
    pub all: Vec<WindowSample>,
    /// Windows whose target lies in the train split.
    pub train: Vec<WindowSample>,
    /// Windows whose target lies in the validation split.
    pub validation: Vec<WindowSample>,
}

pub fn prepare(dataset: &SeriesDataset, window: usize) -> Result<Prepared> {
    dataset.check_window(window)?;
    let normalizer = Normalizer::fit(dataset.train_values())?;
    let scaled: Vec<f64> = dataset
        .values
        .iter()
        .map(|&v| normalizer.scale(v))
        .collect();
    let all = windows(&scaled, window)?;
    let (train_end, val_end) = dataset.split.bounds(dataset.len());
    let target_in = |lo: usize, hi: usize| {
        all.iter()
            .enumerate()
            .filter(|(i, _)| (lo..hi).contains(&(i + window)))
            .map(|(_, s)| s.clone())
            .collect::<Vec<_>>()
    };
    let train = target_in(0, train_end);
    let validation = target_in(train_end, val_end);
    if train.is_empty() {
        return Err(Error::invalid(format!(
            "series `{}` leaves no training windows",
            dataset.name
        )));
    }
    Ok(Prepared {
        normalizer,
        scaled,
        all,
        train,
        validation,
    })
}

/// Mini-batch Adam training of one network, one epoch at a time.
#[derive(Clone, Debug)]
pub struct Trainer {
    model: Lstm,
    adam: Adam,
    rng: ChaCha8Rng,
    batch_size: usize,
}

impl Trainer {
    pub fn new(config: &RegressorConfig, seed: u64) -> Self {
        let model = Lstm::new(config.hidden_units, seed);
        let adam = Adam::new(model.params().len(), LEARNING_RATE);
        Self {
            model,
            adam,
            // Shuffling uses its own stream so it never aliases the initialization.
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed),
            batch_size: config.batch_size,
        }
    }

    pub fn model(&self) -> &Lstm {
        &self.model
    }

    pub fn into_model(self) -> Lstm {
        self.model
    }

    /// Runs one shuffled pass over `samples` and returns the mean batch loss.
    pub fn epoch(&mut self, samples: &[WindowSample]) -> f64 {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        let mut batches = 0;
        let mut batch = Vec::with_capacity(self.batch_size);
        for chunk in order.chunks(self.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i].clone()));
            let (loss, grad) = self.model.loss_and_gradient(&batch);
            if !loss.is_finite() {
                return f64::NAN;
            }
            self.adam.step(self.model.params_mut(), &grad);
            total += loss;
            batches += 1;
        }
        total / batches.max(1) as f64
    }
}

/// Trains one network per seed on the train split, in parallel.
pub fn train_ensemble(
    dataset: &SeriesDataset,
    config: &RegressorConfig,
    seeds: &[u64],
) -> Result<Vec<Lstm>> {
    config.validate()?;
    if seeds.len() != config.n_models {
        return Err(Error::invalid(format!(
            "expected {} seeds, got {}",
            config.n_models,
            seeds.len()
        )));
    }
    let prepared = prepare(dataset, config.window)?;
    seeds
        .par_iter()
        .enumerate()
        .map(|(model, &seed)| {
            let mut trainer = Trainer::new(config, seed);
            for _ in 0..config.epochs {
                if !trainer.epoch(&prepared.train).is_finite() {
                    return Err(Error::Divergence { model });
                }
            }
            Ok(trainer.into_model())
        })
        .collect()
}

/// Networks at their seeded initialization, without any training.
pub fn untrained_ensemble(config: &RegressorConfig, seeds: &[u64]) -> Vec<Lstm> {
    seeds
        .iter()
        .map(|&s| Lstm::new(config.hidden_units, s))
        .collect()
}

/// Mean and sample standard deviation of the members' forecasts.
pub fn predict_ensemble<R: Regressor>(
    models: &[R],
    input: &[f64],
) -> Result<ContinuousEnsemblePrediction> {
    let mut outputs: Vec<f64> = models.iter().map(|m| m.predict(input)).collect();
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("a model produced a non-finite forecast"));
    }
    // Sorting makes the sums independent of member order.
    outputs.sort_by(f64::total_cmp);
    let n = outputs.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "ensemble needs at least 2 members, got {n}"
        )));
    }
    let mean = outputs.iter().sum::<f64>() / n as f64;
    let var = outputs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    ContinuousEnsemblePrediction::new(mean, var.sqrt(), n)
}

/// Mean squared error of the ensemble mean over `samples`.
pub fn ensemble_mse<R: Regressor>(models: &[R], samples: &[WindowSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    let mut total = 0.0;
    for s in samples {
        total += (predict_ensemble(models, &s.input)?.mean - s.target).powi(2);
    }
    Ok(total / samples.len() as f64)
}

/// One continuous prediction event per window of the whole series.
///
/// Forecasts and observations are compared in the scaled space; the umwelt
/// serialization is the raw series text.
pub fn evaluate_series<R: Regressor>(
    dataset: &SeriesDataset,
    models: &[R],
    config: &RegressorConfig,
) -> Result<UmweltRecord> {
    let prepared = prepare(dataset, config.window)?;
    let id = UmweltId::new(dataset.name.clone());
    let events = prepared
        .all
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let prediction = predict_ensemble(models, &s.input)?;
            PredictionEvent::continuous(id.clone(), i as u64, 1, prediction, s.target)
        })
        .collect::<Result<Vec<_>>>()?;
    UmweltRecord::new(id, complexity::serialize_series(&dataset.values), events)
}

/// Intelligence if every window were matched, weighted by the series' own
/// compressibility: `log2(k_ratio(series) * windows)`, clamped at zero.
pub fn max_intelligence(
    dataset: &SeriesDataset,
    window: usize,
    compressor: &CompressorSpec,
) -> Result<f64> {
    dataset.check_window(window)?;
    let ratio = complexity::k_ratio(
        &complexity::serialize_series(&dataset.values).bytes,
        compressor,
    )?;
    measure::intelligence(ratio * (dataset.len() - window) as f64)
}
