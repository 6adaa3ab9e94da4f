use thiserror::Error;

/// A malformed benchmark file, located by 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError { line, message: message.into() }
    }
}

/// Rejected instance data.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("requested {requested} agents but the scenario has only {available} entries")]
    NotEnoughAgents { requested: usize, available: usize },
    #[error("scenario declares a {scen_width}x{scen_height} map but the grid is {grid_width}x{grid_height}")]
    DimensionMismatch { scen_width: usize, scen_height: usize, grid_width: usize, grid_height: usize },
    #[error("agent {agent}: {which} ({x},{y}) is not a passable cell")]
    BlockedCell { agent: usize, which: &'static str, x: usize, y: usize },
    #[error("agents {first} and {second} share the same {which} vertex")]
    DuplicateEndpoint { first: usize, second: usize, which: &'static str },
    #[error("agent {agent}: goal is unreachable from its start")]
    Unreachable { agent: usize },
    #[error("start and goal lists differ in length ({starts} vs {goals})")]
    LengthMismatch { starts: usize, goals: usize },
    #[error("instance has no agents")]
    Empty,
}

/// Misuse of the traffic map or its distance oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("invalid penalty bounds [{lower}, {upper}]: need 0 <= lower < upper")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("removing history would drive the raw count of edge {edge} below zero")]
    Underflow { edge: usize },
    #[error("distance oracle is bound to traffic map version {oracle} but the map is at version {current}")]
    StaleOracle { oracle: u64, current: u64 },
    #[error("vertices {from} -> {to} are not adjacent")]
    NotAnEdge { from: u32, to: u32 },
}

/// Invalid use of the high-level search tree.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("node {0} is not part of the search tree")]
    UnknownNode(u32),
    #[error("configuration is not present in the search tree")]
    UnknownConfiguration,
}

/// Invalid solver configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("time limit must be positive, got {0}")]
    TimeLimit(f64),
    #[error("execution time per action must be positive, got {0}")]
    ExecTime(f64),
    #[error("commitment horizon must be at least 1")]
    Commit,
    #[error("budget factor must be at least 1, got {0}")]
    BudgetFactor(u64),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}
