//! Next-value forecasting with an ensemble of recurrent networks.

mod data;
mod ensemble;
mod lstm;

pub use data::{
    gen_line, gen_noisy_line, gen_sine, gen_sine_trend_noise, load_csv, windows, Normalizer,
    SeriesDataset, Split, WindowSample, MIN_GENERATED,
};
pub use ensemble::{
    ensemble_mse, evaluate_series, max_intelligence, predict_ensemble, prepare, train_ensemble,
    untrained_ensemble, Prepared, Regressor, RegressorConfig, Trainer, LEARNING_RATE,
};
pub use lstm::{Adam, Lstm, INIT_SCALE};
