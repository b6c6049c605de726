//! Grid-maze agent with relative sensors and a transition-frequency predictor.

mod agent;
mod eval;
mod world;

pub use agent::{
    score_prediction, sensor_alphabet, MazeAgent, Step, TransitionCounts, TransitionTable,
};
pub use eval::{
    enumerate_configurations, evaluate, explore, max_oracle, oracle_table, random_walk, replay,
    transitions, Transition,
};
pub use world::{
    apply_action, sense, Action, AgentPose, Cell, Grid, MazeWorld, Orientation, SensorState,
};

use crate::error::{Error, Result};

const BUILTIN: [(&str, &str); 6] = [
    ("t-maze", include_str!("../../mazes/t-maze.maze")),
    (
        "straight-line",
        include_str!("../../mazes/straight-line.maze"),
    ),
    ("u-maze", include_str!("../../mazes/u-maze.maze")),
    ("square-room", include_str!("../../mazes/square-room.maze")),
    ("s-maze", include_str!("../../mazes/s-maze.maze")),
    ("x-maze", include_str!("../../mazes/x-maze.maze")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(name, _)| *name)
}

pub fn builtin(name: &str) -> Result<MazeWorld> {
    let (name, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::invalid(format!("no built-in maze named `{name}`")))?;
    MazeWorld::parse(*name, text)
}

pub fn builtins() -> Vec<MazeWorld> {
    BUILTIN
        .iter()
        .map(|(name, text)| MazeWorld::parse(*name, text).expect("built-in maze parses"))
        .collect()
}
