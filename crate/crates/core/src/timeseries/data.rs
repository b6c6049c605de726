use std::f64::consts::TAU;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train / validation / test fractions, applied in series order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Split {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl Split {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let all = [train, validation, test];
        if all
            .iter()
            .any(|f| f.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater))
            || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::invalid(format!(
                "split fractions must be positive and sum to 1, got {train}/{validation}/{test}"
            )));
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }

    /// End indices (exclusive) of the train and validation sections.
    pub fn bounds(&self, len: usize) -> (usize, usize) {
        let train_end = (self.train * len as f64).floor() as usize;
        let val_end = ((self.train + self.validation) * len as f64).floor() as usize;
        (train_end, val_end.min(len))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesDataset {
    pub name: String,
    pub values: Vec<f64>,
    pub split: Split,
}

impl SeriesDataset {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "series contains non-finite value {bad}"
            )));
        }
        if values.is_empty() {
            return Err(Error::Empty("series"));
        }
        Ok(Self {
            name: name.into(),
            values,
            split: Split::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn train_values(&self) -> &[f64] {
        &self.values[..self.split.bounds(self.len()).0]
    }

    /// Fails unless the series holds at least one window plus one extra value.
    pub fn check_window(&self, window: usize) -> Result<()> {
        if self.len() <= window + 1 {
            return Err(Error::invalid(format!(
                "series `{}` has {} values, need more than {}",
                self.name,
                self.len(),
                window + 1
            )));
        }
        Ok(())
    }
}

fn check_len(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::invalid(format!(
            "need at least {min} values, got {n}"
        )));
    }
    Ok(())
}

/// Smallest series length any generator accepts.
pub const MIN_GENERATED: usize = 5;

/// `y_i = i / n`.
pub fn gen_line(n: usize) -> Result<SeriesDataset> {
    check_len(n, MIN_GENERATED)?;
    SeriesDataset::new("line", (0..n).map(|i| i as f64 / n as f64).collect())
}

/// Period-50 sinusoid phased so that its peaks and troughs fall on samples.
pub fn gen_sine(n: usize) -> Result<SeriesDataset> {
    check_len(n, MIN_GENERATED)?;
    SeriesDataset::new(
        "sine",
        (0..n).map(|i| (TAU * i as f64 / 50.0).cos()).collect(),
    )
}

/// `sin(2 pi i / 50) + 0.002 i + e_i` with `e_i ~ N(0, 0.05^2)`.
pub fn gen_sine_trend_noise(n: usize, seed: u64) -> Result<SeriesDataset> {
    check_len(n, MIN_GENERATED)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("valid sigma");
    SeriesDataset::new(
        "sine-trend",
        (0..n)
            .map(|i| {
                let i = i as f64;
                (TAU * i / 50.0).sin() + 0.002 * i + noise.sample(&mut rng)
            })
            .collect(),
    )
}

/// `2 i / n + 0.5 + e_i` with `e_i ~ N(0, 0.02^2)`: a linear trend under noise.
pub fn gen_noisy_line(n: usize, seed: u64) -> Result<SeriesDataset> {
    check_len(n, MIN_GENERATED)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).expect("valid sigma");
    SeriesDataset::new(
        "noisy-line",
        (0..n)
            .map(|i| 2.0 * i as f64 / n as f64 + 0.5 + noise.sample(&mut rng))
            .collect(),
    )
}

/// Reads one numeric column from a CSV file.
///
/// With `column` set, the first row is a header and the named column is read.
/// Otherwise the first column is read and a non-numeric first row is treated
/// as a header.
pub fn load_csv(path: &Path, column: Option<&str>) -> Result<SeriesDataset> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let csv_err = |line: usize, message: String| Error::Csv {
        path: path.to_owned(),
        line,
        message,
    };
    let mut values = Vec::new();
    let mut index = 0usize;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            csv_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if let Some(name) = column {
                index = record
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| csv_err(line, format!("no column named `{name}` in header")))?;
                continue;
            }
            if record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
        }
        let field = record
            .get(index)
            .ok_or_else(|| csv_err(line, format!("row has no column {}", index + 1)))?;
        let value: f64 = field
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| csv_err(line, format!("`{field}` is not a number")))?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::EmptyColumn {
            path: path.to_owned(),
            column: column.unwrap_or("1").to_owned(),
        });
    }
    let name = path
        .file_stem()
        .map_or_else(|| "csv".to_owned(), |s| s.to_string_lossy().into_owned());
    SeriesDataset::new(name, values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub input: Vec<f64>,
    pub target: f64,
}

/// Stride-1 windows of `w` values, each paired with the value that follows.
pub fn windows(series: &[f64], w: usize) -> Result<Vec<WindowSample>> {
    if w == 0 {
        return Err(Error::invalid("window length must be positive"));
    }
    if series.len() < w + 1 {
        return Err(Error::invalid(format!(
            "series of {} values is too short for window {w}",
            series.len()
        )));
    }
    Ok(series
        .windows(w + 1)
        .map(|s| WindowSample {
            input: s[..w].to_vec(),
            target: s[w],
        })
        .collect())
}

/// Min-max scaling fitted on one slice of values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: f64,
    pub max: f64,
}

impl Normalizer {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("normalizer input"));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { min, max })
    }

    fn span(&self) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            span
        } else {
            1.0
        }
    }

    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / self.span()
    }

    pub fn unscale(&self, v: f64) -> f64 {
        v * self.span() + self.min
    }
}
