//! Exhaustive evaluation of a maze agent and the best-possible reference.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::agent::{MazeAgent, Step, TransitionTable};
use super::world::{apply_action, sense, Action, AgentPose, MazeWorld, Orientation, SensorState};
use crate::complexity::serialize_maze;
use crate::error::Result;
use crate::measure::{PredictionEvent, UmweltId, UmweltRecord};

/// One enumerated configuration and what it leads to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub pose: AgentPose,
    pub action: Action,
    pub before: SensorState,
    pub after: SensorState,
    pub next_pose: AgentPose,
}

/// Every (pose, action) the evaluation executes: per reachable cell in
/// row-major order, the four rotations from an upward heading, then `Move`
/// from each of the four headings. Eight configurations per cell.
pub fn enumerate_configurations(world: &MazeWorld) -> Vec<(AgentPose, Action)> {
    let cells = world.reachable_cells();
    let mut out = Vec::with_capacity(cells.len() * 8);
    for (x, y) in cells {
        let up = AgentPose {
            x,
            y,
            orientation: Orientation::Up,
        };
        for o in Orientation::ALL {
            out.push((up, Action::facing(o)));
        }
        for orientation in Orientation::ALL {
            out.push((AgentPose { orientation, ..up }, Action::Move));
        }
    }
    out
}

pub fn transitions(world: &MazeWorld) -> Vec<Transition> {
    enumerate_configurations(world)
        .into_iter()
        .map(|(pose, action)| {
            let next_pose = apply_action(world, pose, action);
            Transition {
                pose,
                action,
                before: sense(world, pose),
                after: sense(world, next_pose),
                next_pose,
            }
        })
        .collect()
}

/// Runs `passes` full sweeps of the enumerated configurations, recording
/// every transition.
pub fn explore(world: &MazeWorld, table: &mut TransitionTable, passes: usize) {
    let sweep = transitions(world);
    for _ in 0..passes {
        for t in &sweep {
            table.record_transition(t.before, t.action, t.after);
        }
    }
}

/// Takes `steps` uniformly random actions, learning as it goes.
pub fn random_walk<R: Rng + ?Sized>(
    world: &MazeWorld,
    agent: &mut MazeAgent,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<Step>> {
    let was_learning = agent.learning;
    agent.learning = true;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let action = *Action::ALL.choose(rng).expect("non-empty");
        out.push(agent.step(world, action)?);
    }
    agent.learning = was_learning;
    Ok(out)
}

/// A learning agent after executing `actions` from the world's start pose.
pub fn replay(world: &MazeWorld, actions: &[Action]) -> Result<MazeAgent> {
    let mut agent = MazeAgent::new(world);
    agent.learning = true;
    for &action in actions {
        agent.step(world, action)?;
    }
    Ok(agent)
}

/// Scores the table's predictions on every enumerated configuration. The
/// table is only read.
pub fn evaluate(world: &MazeWorld, table: &TransitionTable) -> Result<UmweltRecord> {
    let id = UmweltId::new(world.name());
    let events = transitions(world)
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let outcome = t.after.0.iter().map(|c| c.symbol().to_string()).collect();
            PredictionEvent::discrete(
                id.clone(),
                i as u64,
                1,
                table.predict(t.before, t.action).to_vec(),
                outcome,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    UmweltRecord::new(id, serialize_maze(world.grid()), events)
}

/// The table an agent would hold had it seen every configuration exactly
/// once: the true outcome frequencies, aliasing between cells included.
pub fn oracle_table(world: &MazeWorld) -> TransitionTable {
    let mut table = TransitionTable::new();
    explore(world, &mut table, 1);
    table
}

/// Evaluation with the best statistical predictions available from the
/// agent's sensors.
pub fn max_oracle(world: &MazeWorld) -> Result<UmweltRecord> {
    evaluate(world, &oracle_table(world))
}
