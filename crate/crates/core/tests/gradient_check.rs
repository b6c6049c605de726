use predint_core::timeseries::{Lstm, WindowSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const TOLERANCE: f64 = 1e-4;

fn max_relative_error(model: &Lstm, samples: &[WindowSample]) -> f64 {
    let (_, analytic) = model.loss_and_gradient(samples);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (k, a) in analytic.iter().enumerate() {
        let orig = probe.params()[k];
        probe.params_mut()[k] = orig + STEP;
        let up = probe.loss(samples);
        probe.params_mut()[k] = orig - STEP;
        let down = probe.loss(samples);
        probe.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let denom = a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    hidden: usize,
    steps: usize,
    batch: usize,
) -> (Lstm, Vec<WindowSample>) {
    let mut model = Lstm::new(hidden, rng.random());
    // Larger weights than the default initialization exercise the nonlinearities.
    for p in model.params_mut() {
        *p = rng.random_range(-1.0..1.0);
    }
    let samples = (0..batch)
        .map(|_| WindowSample {
            input: (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect(),
            target: rng.random_range(-1.0..1.0),
        })
        .collect();
    (model, samples)
}

#[test]
fn two_units_one_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let (model, samples) = random_instance(&mut rng, 2, 1, 1);
        let err = max_relative_error(&model, &samples);
        assert!(err <= TOLERANCE, "relative error {err}");
    }
}

#[test]
fn longer_sequences_and_batches() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (hidden, steps, batch) in [(2, 3, 4), (3, 5, 2), (5, 3, 10)] {
        let (model, samples) = random_instance(&mut rng, hidden, steps, batch);
        let err = max_relative_error(&model, &samples);
        assert!(
            err <= TOLERANCE,
            "h={hidden} steps={steps}: relative error {err}"
        );
    }
}
