use std::collections::BTreeMap;
use std::sync::LazyLock;

use serde::Serialize;

use super::world::{apply_action, sense, Action, AgentPose, MazeWorld, SensorState};
use crate::error::Result;
use crate::measure::{pm_discrete, Alphabet, CategoricalDistribution};

static SENSOR_LABELS: LazyLock<Alphabet> =
    LazyLock::new(|| Alphabet::new(["W", "E", "R"]).expect("distinct labels"));

/// The `W, E, R` label set every maze sensor reports over.
pub fn sensor_alphabet() -> Alphabet {
    SENSOR_LABELS.clone()
}

/// Per-sensor outcome counts observed after one (state, action) pair.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TransitionCounts {
    pub sensors: [[u64; 3]; 4],
    pub total: u64,
}

impl TransitionCounts {
    pub fn record(&mut self, next: SensorState) {
        for (counts, cell) in self.sensors.iter_mut().zip(next.0) {
            counts[cell.index()] += 1;
        }
        self.total += 1;
    }

    pub fn distributions(&self) -> [CategoricalDistribution; 4] {
        let labels = sensor_alphabet();
        self.sensors.map(|counts| {
            let probs = counts
                .iter()
                .map(|&c| c as f64 / self.total as f64)
                .collect();
            CategoricalDistribution::new(labels.clone(), probs).expect("frequencies sum to 1")
        })
    }
}

/// Frequencies of the sensor states that followed each (state, action) pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransitionTable {
    entries: BTreeMap<(SensorState, Action), TransitionCounts>,
}

impl TransitionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_transition(&mut self, state: SensorState, action: Action, next: SensorState) {
        self.entries
            .entry((state, action))
            .or_default()
            .record(next);
    }

    pub fn counts(&self, state: SensorState, action: Action) -> Option<&TransitionCounts> {
        self.entries.get(&(state, action))
    }

    /// Empirical per-sensor distributions, or uniform ones for a pair never
    /// observed (which score zero against the random baseline).
    pub fn predict(&self, state: SensorState, action: Action) -> [CategoricalDistribution; 4] {
        match self.entries.get(&(state, action)) {
            Some(c) if c.total > 0 => c.distributions(),
            _ => std::array::from_fn(|_| CategoricalDistribution::uniform(sensor_alphabet())),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(SensorState, Action), &TransitionCounts)> {
        self.entries.iter()
    }
}

/// Result of one executed action.
#[derive(Clone, Debug, Serialize)]
pub struct Step {
    pub action: Action,
    pub before: SensorState,
    pub prediction: [CategoricalDistribution; 4],
    pub after: SensorState,
    pub pose: AgentPose,
    pub pm: [f64; 4],
}

impl Step {
    pub fn total_pm(&self) -> f64 {
        self.pm.iter().sum()
    }
}

/// Per-sensor random-guess-corrected match of `prediction` against `actual`.
pub fn score_prediction(
    prediction: &[CategoricalDistribution; 4],
    actual: SensorState,
) -> Result<[f64; 4]> {
    let random = CategoricalDistribution::uniform(sensor_alphabet());
    let mut pm = [0.0; 4];
    for ((slot, p), cell) in pm.iter_mut().zip(prediction).zip(actual.0) {
        let u = CategoricalDistribution::one_hot(sensor_alphabet(), &cell.symbol().to_string())?;
        *slot = pm_discrete(p, &u, &random)?;
    }
    Ok(pm)
}

/// A maze agent: where it is, what it has learnt, and whether it is learning.
#[derive(Clone, Debug)]
pub struct MazeAgent {
    pub pose: AgentPose,
    pub table: TransitionTable,
    pub learning: bool,
}

impl MazeAgent {
    pub fn new(world: &MazeWorld) -> Self {
        Self {
            pose: world.start(),
            table: TransitionTable::new(),
            learning: false,
        }
    }

    pub fn sensors(&self, world: &MazeWorld) -> SensorState {
        sense(world, self.pose)
    }

    /// Predicts, acts, observes and (when learning) records the transition.
    pub fn step(&mut self, world: &MazeWorld, action: Action) -> Result<Step> {
        let before = sense(world, self.pose);
        let prediction = self.table.predict(before, action);
        self.pose = apply_action(world, self.pose, action);
        let after = sense(world, self.pose);
        let pm = score_prediction(&prediction, after)?;
        if self.learning {
            self.table.record_transition(before, action, after);
        }
        Ok(Step {
            action,
            before,
            prediction,
            after,
            pose: self.pose,
            pm,
        })
    }
}
