//! Anytime LaCAM* multi-agent path finding guided by a lightweight traffic map.

pub mod anytime;
pub mod bench;
pub mod cli;
pub mod dist;
pub mod error;
pub mod grid;
pub mod instance;
pub mod pibt;
pub mod report;
pub mod search;
pub mod traffic;
pub mod validate;

pub use error::{ConfigError, InstanceError, ParseError, SearchError, TrafficError};
pub use grid::{parse_map, serialize_map, Grid, VertexId};
pub use instance::{parse_scen, Configuration, Instance, Solution};
pub use search::{edge_cost, lacam_run, HighLevelNode, NodeId, RunResult, SearchTree, Termination};
pub use traffic::{AgentDistances, Cost, DistanceOracle, HistoryRecord, Ltm};
pub use validate::{sum_of_loss, validate_solution, LossConvention, Metrics, ValidationReport};
pub use anytime::{solve_oneshot, solve_pe, ExecutionTrace, Mode, OneShotResult, PeSession, RestartStrategy, SolveConfig};
