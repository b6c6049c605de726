use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use predint_core::complexity::CompressorSpec;
use predint_core::maze::{self, MazeWorld};
use predint_core::timeseries::{
    gen_line, gen_noisy_line, gen_sine, gen_sine_trend_noise, load_csv, RegressorConfig,
    SeriesDataset,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::{config_error, data_error};

/// Everything a measurement run depends on. Stored alongside results so a
/// run can be repeated exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in maze names or paths to maze files.
    pub mazes: Vec<String>,
    /// Full exploration passes used to train the maze agent.
    pub passes: usize,
    /// File of action names, one per line, replayed instead of exploration.
    pub actions: Option<PathBuf>,
    /// Dataset specs such as `line`, `sine-trend,seed=7` or `prices.csv,column=close`.
    pub data: Vec<String>,
    pub compressor: CompressorSpec,
    /// First model seed; the ensemble uses consecutive seeds from here.
    pub seed: u64,
    pub window: usize,
    pub n_models: usize,
    pub hidden_units: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = RegressorConfig::default();
        Self {
            mazes: Vec::new(),
            passes: 1,
            actions: None,
            data: Vec::new(),
            compressor: CompressorSpec::default(),
            seed: 0,
            window: r.window,
            n_models: r.n_models,
            hidden_units: r.hidden_units,
            epochs: r.epochs,
            batch_size: r.batch_size,
            alpha: r.alpha,
            parallel: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn regressor(&self) -> Result<RegressorConfig> {
        let r = RegressorConfig {
            window: self.window,
            n_models: self.n_models,
            hidden_units: self.hidden_units,
            epochs: self.epochs,
            batch_size: self.batch_size,
            alpha: self.alpha,
        };
        r.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(r)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn resolve_mazes(&self) -> Result<Vec<(String, MazeWorld)>> {
        if self.mazes.is_empty() {
            return Ok(maze::builtins()
                .into_iter()
                .map(|w| (w.name().to_owned(), w))
                .collect());
        }
        let mut out: Vec<(String, MazeWorld)> = Vec::new();
        for spec in &self.mazes {
            let world = load_maze(spec)?;
            if out.iter().any(|(_, w)| w.name() == world.name()) {
                return Err(config_error(format!(
                    "maze `{}` listed twice",
                    world.name()
                )));
            }
            out.push((spec.clone(), world));
        }
        Ok(out)
    }

    pub fn resolve_data(&self) -> Result<Vec<(String, SeriesDataset)>> {
        if self.data.is_empty() {
            return Err(config_error("no datasets given"));
        }
        let mut out: Vec<(String, SeriesDataset)> = Vec::new();
        for spec in &self.data {
            let data = DataSpec::parse(spec)?.load()?;
            if out.iter().any(|(_, d)| d.name == data.name) {
                return Err(config_error(format!(
                    "dataset `{}` listed twice",
                    data.name
                )));
            }
            out.push((spec.clone(), data));
        }
        Ok(out)
    }
}

/// A built-in maze name, or a path to a maze file named after its stem.
pub fn load_maze(spec: &str) -> Result<MazeWorld> {
    if maze::builtin_names().any(|n| n == spec) {
        return Ok(maze::builtin(spec)?);
    }
    let path = Path::new(spec);
    let text =
        std::fs::read_to_string(path).map_err(|e| data_error(format!("maze `{spec}`: {e}")))?;
    let name = path
        .file_stem()
        .map_or_else(|| spec.to_owned(), |s| s.to_string_lossy().into_owned());
    MazeWorld::parse(name, &text).map_err(|e| data_error(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSpec {
    Line {
        n: usize,
    },
    Sine {
        n: usize,
    },
    SineTrend {
        n: usize,
        seed: u64,
    },
    NoisyLine {
        n: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        column: Option<String>,
    },
}

pub const DEFAULT_TREND_SEED: u64 = 7;
pub const DEFAULT_NOISY_SEED: u64 = 11;

impl DataSpec {
    /// Parses `kind[,key=value...]`; anything that is not a generator name is
    /// taken as a CSV path.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut parts = spec.split(',');
        let head = parts.next().unwrap_or_default().trim();
        let mut n = None;
        let mut seed = None;
        let mut column = None;
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                config_error(format!("`{part}` in data spec `{spec}` is not key=value"))
            })?;
            let bad = || config_error(format!("bad value for `{k}` in data spec `{spec}`"));
            match k.trim() {
                "n" => n = Some(v.trim().parse().map_err(|_| bad())?),
                "seed" => seed = Some(v.trim().parse().map_err(|_| bad())?),
                "column" => column = Some(v.trim().to_owned()),
                other => {
                    return Err(config_error(format!(
                        "unknown key `{other}` in data spec `{spec}`"
                    )))
                }
            }
        }
        let generator = matches!(head, "line" | "sine" | "sine-trend" | "noisy-line");
        if generator && column.is_some() {
            return Err(config_error(format!(
                "`column` only applies to CSV files, in `{spec}`"
            )));
        }
        if !generator && (n.is_some() || seed.is_some()) {
            return Err(config_error(format!(
                "`n` and `seed` only apply to generators, in `{spec}`"
            )));
        }
        Ok(match head {
            "line" if seed.is_none() => DataSpec::Line {
                n: n.unwrap_or(1000),
            },
            "sine" if seed.is_none() => DataSpec::Sine {
                n: n.unwrap_or(500),
            },
            "line" | "sine" => return Err(config_error(format!("`{head}` takes no seed"))),
            "sine-trend" => DataSpec::SineTrend {
                n: n.unwrap_or(500),
                seed: seed.unwrap_or(DEFAULT_TREND_SEED),
            },
            "noisy-line" => DataSpec::NoisyLine {
                n: n.unwrap_or(500),
                seed: seed.unwrap_or(DEFAULT_NOISY_SEED),
            },
            "" => return Err(config_error("empty data spec")),
            path => DataSpec::Csv {
                path: PathBuf::from(path),
                column,
            },
        })
    }

    pub fn load(&self) -> Result<SeriesDataset> {
        let generated = match *self {
            DataSpec::Line { n } => gen_line(n),
            DataSpec::Sine { n } => gen_sine(n),
            DataSpec::SineTrend { n, seed } => gen_sine_trend_noise(n, seed),
            DataSpec::NoisyLine { n, seed } => gen_noisy_line(n, seed),
            DataSpec::Csv {
                ref path,
                ref column,
            } => {
                return load_csv(path, column.as_deref())
                    .map_err(|e| data_error(e.to_string()))
                    .with_context(|| format!("loading {}", path.display()));
            }
        };
        generated.map_err(|e| config_error(e.to_string()))
    }
}
