use std::time::Instant;

use anyhow::Result;
use predint_core::complexity::{serialize_maze, serialize_series, CompressorSpec};
use predint_core::maze::{self, sensor_alphabet};
use predint_core::measure::{measure, Baseline, DEFAULT_ALPHA};
use predint_core::{
    CategoricalDistribution, ContinuousEnsemblePrediction, PredictionEvent, UmweltId, UmweltRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The runtime the reference implementation needed per billion predictions.
pub const REFERENCE_HOURS_PER_BILLION: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BenchKind {
    /// Four-sensor categorical predictions, as made by the maze agent.
    Maze,
    /// Ensemble mean/std predictions, as made by the time-series agent.
    Series,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub kind: BenchKind,
    pub points: usize,
    pub runs: usize,
    /// Prediction count at the first point; each later point doubles it.
    pub start: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            kind: BenchKind::Maze,
            points: 8,
            runs: 20,
            start: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchPoint {
    pub predictions: usize,
    pub mean_seconds: f64,
    pub sd_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub compressor: String,
    pub points: Vec<BenchPoint>,
    pub fit: LinearFit,
    /// Fitted time for 10^9 predictions, in hours.
    pub hours_per_billion: f64,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("predictions,mean_seconds,sd_seconds\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.predictions, p.mean_seconds, p.sd_seconds
            ));
        }
        out
    }
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    LinearFit {
        intercept,
        slope,
        r_squared: if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else {
            1.0
        },
    }
}

fn random_distribution(rng: &mut ChaCha8Rng) -> CategoricalDistribution {
    let counts: Vec<f64> = (0..3).map(|_| rng.random_range(0..4) as f64).collect();
    let total: f64 = counts.iter().sum();
    let probs = if total == 0.0 {
        vec![1.0 / 3.0; 3]
    } else {
        counts.iter().map(|c| c / total).collect()
    };
    CategoricalDistribution::new(sensor_alphabet(), probs).expect("valid frequencies")
}

/// A synthetic umwelt with `n` scored predictions of the given kind.
pub fn synthetic_record(kind: BenchKind, n: usize, seed: u64) -> Result<UmweltRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = UmweltId::new("bench");
    let labels = ["W", "E", "R"];
    match kind {
        BenchKind::Maze => {
            let events = (0..n)
                .map(|i| {
                    let predictions = (0..4).map(|_| random_distribution(&mut rng)).collect();
                    let outcome = (0..4)
                        .map(|_| labels[rng.random_range(0..3)].to_owned())
                        .collect();
                    PredictionEvent::discrete(id.clone(), i as u64, 1, predictions, outcome)
                })
                .collect::<predint_core::Result<Vec<_>>>()?;
            let grid = maze::builtin("x-maze")?;
            Ok(UmweltRecord::new(id, serialize_maze(grid.grid()), events)?)
        }
        BenchKind::Series => {
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let events = values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let pred = ContinuousEnsemblePrediction::new(
                        v + rng.random_range(-0.05..0.05),
                        rng.random_range(0.001..0.05),
                        5,
                    )?;
                    PredictionEvent::continuous(id.clone(), i as u64, 1, pred, v)
                })
                .collect::<predint_core::Result<Vec<_>>>()?;
            Ok(UmweltRecord::new(id, serialize_series(&values), events)?)
        }
    }
}

/// Times the measurement pipeline alone (building the prediction events is
/// not timed) at doubling prediction counts.
pub fn run(config: &BenchConfig, compressor: &CompressorSpec) -> Result<BenchReport> {
    let mut points = Vec::with_capacity(config.points);
    for i in 0..config.points {
        let n = config.start << i;
        let record = synthetic_record(config.kind, n, config.seed.wrapping_add(i as u64))?;
        let records = [record];
        // One untimed pass warms caches and allocator.
        measure(&records, compressor, &Baseline::Uniform, DEFAULT_ALPHA)?;
        let mut times = Vec::with_capacity(config.runs);
        for _ in 0..config.runs {
            let t = Instant::now();
            let result = measure(&records, compressor, &Baseline::Uniform, DEFAULT_ALPHA)?;
            times.push(t.elapsed().as_secs_f64());
            std::hint::black_box(result);
        }
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let sd = if times.len() > 1 {
            (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        points.push(BenchPoint {
            predictions: n,
            mean_seconds: mean,
            sd_seconds: sd,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.predictions as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean_seconds).collect();
    let fit = linear_fit(&x, &y);
    let hours_per_billion = (fit.intercept + fit.slope * 1e9) / 3600.0;
    Ok(BenchReport {
        config: config.clone(),
        compressor: compressor.id(),
        points,
        fit,
        hours_per_billion,
    })
}
