use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use predint_core::complexity::{k_ratio, serialize_series, CompressorSpec};
use predint_core::maze::{
    evaluate, explore, max_oracle, replay, Action, MazeWorld, TransitionTable,
};
use predint_core::measure::{intelligence, measure, Baseline, UmweltBreakdown};
use predint_core::timeseries::{
    ensemble_mse, evaluate_series, max_intelligence, prepare, train_ensemble, untrained_ensemble,
    RegressorConfig, SeriesDataset,
};
use predint_core::{MeasurementResult, UmweltRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::exit::{data_error, invariant_error};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressorInfo {
    pub id: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UmweltReport {
    pub id: String,
    /// The maze name, file or dataset spec this umwelt came from.
    pub source: String,
    /// Prediction events scored: enumerated actions or series windows.
    pub events: usize,
    pub umwelt_k_ratio: f64,
    pub prediction_k_ratio: f64,
    pub sum_pm: f64,
    pub weighted_pm: f64,
    /// This umwelt measured on its own.
    pub result: MeasurementResult,
    pub max_intelligence: f64,
    /// Intelligence of the untrained ensemble (series only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub untrained_intelligence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_mse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedReport {
    pub result: MeasurementResult,
    pub max_intelligence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub compressor: CompressorInfo,
    pub umwelts: Vec<UmweltReport>,
    pub combined: CombinedReport,
    /// Wall-clock figures; the only part that differs between repeated runs.
    pub timing: Timing,
}

impl ResultRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    /// The record as JSON without its timing section.
    pub fn stable_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("record serializes");
        v.as_object_mut().expect("object").remove("timing");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    /// Reads a record and re-derives every stored intelligence value.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| data_error(format!("{}: {e}", path.display())))?;
        let record: ResultRecord = serde_json::from_str(&text)
            .map_err(|e| data_error(format!("{}: {e}", path.display())))?;
        record.check()?;
        Ok(record)
    }

    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(data_error(format!(
                "schema version {} is not {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        for u in &self.umwelts {
            u.result
                .check()
                .map_err(|e| invariant_error(format!("umwelt `{}`: {e}", u.id)))?;
            let combined = self
                .combined
                .result
                .pm_per_umwelt
                .iter()
                .find(|(id, _)| id.as_str() == u.id);
            match combined {
                Some((_, pm)) if (pm - u.weighted_pm).abs() <= 1e-12 * pm.abs().max(1.0) => {}
                _ => {
                    return Err(invariant_error(format!(
                        "umwelt `{}` weighted match disagrees with the combined row",
                        u.id
                    )))
                }
            }
        }
        self.combined
            .result
            .check()
            .map_err(|e| invariant_error(format!("combined row: {e}")))
    }
}

fn run(
    records: &[UmweltRecord],
    compressor: &CompressorSpec,
    alpha: f64,
) -> Result<(MeasurementResult, Vec<UmweltBreakdown>)> {
    Ok(measure(records, compressor, &Baseline::Uniform, alpha)?)
}

struct Measured {
    source: String,
    record: UmweltRecord,
    max_intelligence: f64,
    untrained_intelligence: Option<f64>,
    validation_mse: Option<f64>,
}

fn report(
    command: &str,
    config: &RunConfig,
    measured: Vec<Measured>,
    combined_max: impl FnOnce(&MeasurementResult) -> Result<f64>,
    started: Instant,
) -> Result<ResultRecord> {
    let compressor = &config.compressor;
    let mut umwelts = Vec::with_capacity(measured.len());
    for m in &measured {
        let (result, breakdown) = run(std::slice::from_ref(&m.record), compressor, config.alpha)?;
        let b = &breakdown[0];
        umwelts.push(UmweltReport {
            id: m.record.id.to_string(),
            source: m.source.clone(),
            events: b.events,
            umwelt_k_ratio: b.umwelt_k_ratio,
            prediction_k_ratio: b.weighted.prediction_k_ratio,
            sum_pm: b.weighted.sum_pm,
            weighted_pm: b.weighted.weighted_pm,
            result,
            max_intelligence: m.max_intelligence,
            untrained_intelligence: m.untrained_intelligence,
            validation_mse: m.validation_mse,
        });
    }
    let records: Vec<UmweltRecord> = measured.into_iter().map(|m| m.record).collect();
    let (result, _) = run(&records, compressor, config.alpha)?;
    let max_intelligence = combined_max(&result)?;
    let record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        command: command.to_owned(),
        config_hash: config.hash(),
        config: config.clone(),
        compressor: CompressorInfo {
            id: compressor.id(),
            version: compressor.version().to_owned(),
        },
        umwelts,
        combined: CombinedReport {
            result,
            max_intelligence,
        },
        timing: Timing {
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    };
    record.check()?;
    Ok(record)
}

/// Reads one action name per line; blank lines and `#` comments are skipped.
pub fn load_actions(path: &Path) -> Result<Vec<Action>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_error(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse()
                .map_err(|e| data_error(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn map_maybe_parallel<T: Sync, U: Send>(
    items: &[T],
    parallel: bool,
    f: impl Fn(&T) -> Result<U> + Sync + Send,
) -> Result<Vec<U>> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

pub fn measure_maze(config: &RunConfig) -> Result<ResultRecord> {
    let started = Instant::now();
    let mazes = config.resolve_mazes()?;
    let actions = config.actions.as_deref().map(load_actions).transpose()?;
    let compressor = config.compressor;
    let alpha = config.alpha;
    let trained = |world: &MazeWorld| -> Result<TransitionTable> {
        Ok(match &actions {
            Some(a) => replay(world, a)?.table,
            None => {
                let mut table = TransitionTable::new();
                explore(world, &mut table, config.passes);
                table
            }
        })
    };
    let measured = map_maybe_parallel(&mazes, config.parallel, |(source, world)| {
        let best = max_oracle(world)?;
        Ok(Measured {
            source: source.clone(),
            record: evaluate(world, &trained(world)?)?,
            max_intelligence: run(&[best], &compressor, alpha)?.0.intelligence,
            untrained_intelligence: None,
            validation_mse: None,
        })
    })?;
    let bests = mazes
        .iter()
        .map(|(_, w)| max_oracle(w))
        .collect::<predint_core::Result<Vec<_>>>()?;
    report(
        "measure-maze",
        config,
        measured,
        |_| Ok(run(&bests, &compressor, alpha)?.0.intelligence),
        started,
    )
}

fn measure_one_series(
    source: &str,
    data: &SeriesDataset,
    regressor: &RegressorConfig,
    config: &RunConfig,
) -> Result<Measured> {
    let seeds = regressor.seeds(config.seed);
    let models = train_ensemble(data, regressor, &seeds)?;
    let untrained = untrained_ensemble(regressor, &seeds);
    let alone = |record: UmweltRecord| -> Result<f64> {
        Ok(run(&[record], &config.compressor, regressor.alpha)?
            .0
            .intelligence)
    };
    let validation = prepare(data, regressor.window)?.validation;
    Ok(Measured {
        source: source.to_owned(),
        record: evaluate_series(data, &models, regressor)?,
        max_intelligence: max_intelligence(data, regressor.window, &config.compressor)?,
        untrained_intelligence: Some(alone(evaluate_series(data, &untrained, regressor)?)?),
        validation_mse: if validation.is_empty() {
            None
        } else {
            Some(ensemble_mse(&models, &validation)?)
        },
    })
}

pub fn measure_series(config: &RunConfig) -> Result<ResultRecord> {
    let started = Instant::now();
    let regressor = config.regressor()?;
    let datasets = config.resolve_data()?;
    for (_, d) in &datasets {
        d.check_window(regressor.window)
            .map_err(|e| data_error(e.to_string()))?;
    }
    let measured = map_maybe_parallel(&datasets, config.parallel, |(source, data)| {
        measure_one_series(source, data, &regressor, config)
    })?;
    // Best case for the set: a match on every window, weighted by each
    // series' own compressibility and by the joint factor.
    let perfect: f64 = datasets
        .iter()
        .map(|(_, d)| -> Result<f64> {
            let ratio = k_ratio(&serialize_series(&d.values).bytes, &config.compressor)?;
            Ok(ratio * (d.len() - regressor.window) as f64)
        })
        .sum::<Result<f64>>()?;
    report(
        "measure-series",
        config,
        measured,
        |result| Ok(intelligence(result.joint_factor * perfect)?),
        started,
    )
}
