use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::WindowSample;

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.08;

/// A scalar-input LSTM layer followed by a dense scalar head.
///
/// Parameters live in one flat vector laid out as input weights `[4h]`,
/// recurrent weights `[4h x h]` (row-major), gate biases `[4h]`, head weights
/// `[h]` and the head bias. Gate rows are ordered input, forget, candidate,
/// output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    hidden: usize,
    seed: u64,
    params: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Layout {
    h: usize,
}

impl Layout {
    fn wx(&self) -> usize {
        0
    }
    fn wh(&self) -> usize {
        4 * self.h
    }
    fn b(&self) -> usize {
        4 * self.h + 4 * self.h * self.h
    }
    fn w_out(&self) -> usize {
        self.b() + 4 * self.h
    }
    fn b_out(&self) -> usize {
        self.w_out() + self.h
    }
    fn len(&self) -> usize {
        self.b_out() + 1
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-step activations kept for the backward pass.
struct StepCache {
    x: f64,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl Lstm {
    pub fn param_count(hidden: usize) -> usize {
        Layout { h: hidden }.len()
    }

    pub fn new(hidden: usize, seed: u64) -> Self {
        assert!(hidden > 0, "hidden size must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..Self::param_count(hidden))
            .map(|_| rng.random_range(-INIT_SCALE..=INIT_SCALE))
            .collect();
        Self {
            hidden,
            seed,
            params,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        Layout { h: self.hidden }
    }

    fn run(&self, input: &[f64], mut cache: Option<&mut Vec<StepCache>>) -> (f64, Vec<f64>) {
        let l = self.layout();
        let h = self.hidden;
        let p = &self.params;
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut gates = vec![0.0; 4 * h];
        for &x in input {
            for (r, g) in gates.iter_mut().enumerate() {
                let row = &p[l.wh() + r * h..l.wh() + (r + 1) * h];
                let rec: f64 = row.iter().zip(&hs).map(|(w, v)| w * v).sum();
                *g = p[l.wx() + r] * x + rec + p[l.b() + r];
            }
            for j in 0..h {
                gates[j] = sigmoid(gates[j]);
                gates[h + j] = sigmoid(gates[h + j]);
                gates[2 * h + j] = gates[2 * h + j].tanh();
                gates[3 * h + j] = sigmoid(gates[3 * h + j]);
            }
            let c_prev = cs.clone();
            let h_prev = hs.clone();
            let mut tanh_c = vec![0.0; h];
            for j in 0..h {
                cs[j] = gates[h + j] * cs[j] + gates[j] * gates[2 * h + j];
                tanh_c[j] = cs[j].tanh();
                hs[j] = gates[3 * h + j] * tanh_c[j];
            }
            if let Some(cache) = cache.as_deref_mut() {
                cache.push(StepCache {
                    x,
                    h_prev,
                    c_prev,
                    gates: gates.clone(),
                    tanh_c,
                });
            }
        }
        let y = p[l.b_out()]
            + p[l.w_out()..l.w_out() + h]
                .iter()
                .zip(&hs)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        (y, hs)
    }

    pub fn forward(&self, input: &[f64]) -> f64 {
        self.run(input, None).0
    }

    /// Mean squared error over `samples`.
    pub fn loss(&self, samples: &[WindowSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        samples
            .iter()
            .map(|s| (self.forward(&s.input) - s.target).powi(2))
            .sum::<f64>()
            / samples.len() as f64
    }

    /// Loss and its gradient with respect to the flat parameter vector.
    pub fn loss_and_gradient(&self, samples: &[WindowSample]) -> (f64, Vec<f64>) {
        let l = self.layout();
        let h = self.hidden;
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        if samples.is_empty() {
            return (0.0, grad);
        }
        let scale = 1.0 / samples.len() as f64;
        let mut loss = 0.0;
        let mut cache = Vec::new();
        let mut da = vec![0.0; 4 * h];
        for sample in samples {
            cache.clear();
            let (y, h_last) = self.run(&sample.input, Some(&mut cache));
            let err = y - sample.target;
            loss += err * err * scale;
            let dy = 2.0 * err * scale;

            grad[l.b_out()] += dy;
            let mut dh = vec![0.0; h];
            for j in 0..h {
                grad[l.w_out() + j] += dy * h_last[j];
                dh[j] = dy * p[l.w_out() + j];
            }
            let mut dc = vec![0.0; h];
            for step in cache.iter().rev() {
                let g = &step.gates;
                for j in 0..h {
                    let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let do_ = dh[j] * step.tanh_c[j];
                    dc[j] += dh[j] * o * (1.0 - step.tanh_c[j] * step.tanh_c[j]);
                    da[j] = dc[j] * cand * i * (1.0 - i);
                    da[h + j] = dc[j] * step.c_prev[j] * f * (1.0 - f);
                    da[2 * h + j] = dc[j] * i * (1.0 - cand * cand);
                    da[3 * h + j] = do_ * o * (1.0 - o);
                    dc[j] *= f;
                }
                dh.iter_mut().for_each(|v| *v = 0.0);
                for (r, &d) in da.iter().enumerate() {
                    grad[l.wx() + r] += d * step.x;
                    grad[l.b() + r] += d;
                    let row = l.wh() + r * h;
                    for k in 0..h {
                        grad[row + k] += d * step.h_prev[k];
                        dh[k] += d * p[row + k];
                    }
                }
            }
        }
        (loss, grad)
    }
}

/// Adam optimizer state for one flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(input: &[f64], target: f64) -> WindowSample {
        WindowSample {
            input: input.to_vec(),
            target,
        }
    }

    #[test]
    fn parameter_count() {
        assert_eq!(Lstm::param_count(20), 4 * 20 + 4 * 400 + 4 * 20 + 20 + 1);
        assert_eq!(Lstm::new(20, 0).params().len(), 1781);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Lstm::new(4, 9);
        assert_eq!(a, Lstm::new(4, 9));
        assert_ne!(a.params(), Lstm::new(4, 10).params());
        assert!(a.params().iter().all(|p| p.abs() <= INIT_SCALE));
    }

    #[test]
    fn forward_is_deterministic_for_any_length() {
        let m = Lstm::new(3, 1);
        for w in 0..6 {
            let input: Vec<f64> = (0..w).map(|i| i as f64 * 0.1).collect();
            let y = m.forward(&input);
            assert!(y.is_finite());
            assert_eq!(y.to_bits(), m.forward(&input).to_bits());
        }
        // With no input the output is the head bias.
        assert_eq!(m.forward(&[]), m.params()[Lstm::param_count(3) - 1]);
    }

    #[test]
    fn adam_reduces_loss() {
        let mut m = Lstm::new(5, 2);
        let data = vec![sample(&[0.1, 0.2, 0.3], 0.4), sample(&[0.5, 0.6, 0.7], 0.8)];
        let mut adam = Adam::new(m.params().len(), 1e-2);
        let before = m.loss(&data);
        for _ in 0..200 {
            let (_, g) = m.loss_and_gradient(&data);
            adam.step(m.params_mut(), &g);
        }
        assert!(m.loss(&data) < before / 10.0);
    }

    #[test]
    fn reported_loss_matches_forward() {
        let m = Lstm::new(3, 5);
        let data = vec![sample(&[0.3, -0.2], 0.1), sample(&[1.0, 0.0], -0.5)];
        let (loss, _) = m.loss_and_gradient(&data);
        assert!((loss - m.loss(&data)).abs() < 1e-15);
    }
}
