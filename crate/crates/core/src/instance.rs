//! MAPF instances, configurations, solutions and the MovingAI `.scen` format.

use std::sync::Arc;

use crate::dist::{bfs_dist, DistTable};
use crate::error::{InstanceError, ParseError};
use crate::grid::{Grid, VertexId};

/// One vertex per agent at a single timestep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub Vec<VertexId>);

impl Configuration {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.0
    }

    /// True when no two agents share a vertex.
    pub fn is_conflict_free(&self) -> bool {
        let mut seen: Vec<VertexId> = self.0.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = VertexId;

    fn index(&self, i: usize) -> &VertexId {
        &self.0[i]
    }
}

impl From<Vec<VertexId>> for Configuration {
    fn from(v: Vec<VertexId>) -> Self {
        Configuration(v)
    }
}

/// A joint plan: one configuration per timestep.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Solution {
    pub steps: Vec<Configuration>,
}

impl Solution {
    pub fn new(steps: Vec<Configuration>) -> Self {
        Solution { steps }
    }

    /// Index of the last timestep.
    pub fn makespan(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn num_agents(&self) -> usize {
        self.steps.first().map_or(0, Configuration::len)
    }

    /// Path of one agent over all timesteps.
    pub fn path(&self, agent: usize) -> Vec<VertexId> {
        self.steps.iter().map(|c| c[agent]).collect()
    }
}

/// `((start_x, start_y), (goal_x, goal_y))`.
pub type AgentCells = ((usize, usize), (usize, usize));

/// A MAPF problem on a grid.
#[derive(Debug, Clone)]
pub struct Instance {
    grid: Arc<Grid>,
    starts: Configuration,
    goals: Configuration,
}

impl Instance {
    /// Validates endpoints (passable, pairwise distinct, goal reachable from start).
    pub fn new(
        grid: Arc<Grid>,
        starts: Vec<VertexId>,
        goals: Vec<VertexId>,
    ) -> Result<Self, InstanceError> {
        if starts.len() != goals.len() {
            return Err(InstanceError::LengthMismatch { starts: starts.len(), goals: goals.len() });
        }
        if starts.is_empty() {
            return Err(InstanceError::Empty);
        }
        for (which, list) in [("start", &starts), ("goal", &goals)] {
            let mut owner = vec![usize::MAX; grid.num_vertices()];
            for (i, &v) in list.iter().enumerate() {
                if v as usize >= grid.num_vertices() {
                    return Err(InstanceError::BlockedCell { agent: i, which, x: usize::MAX, y: usize::MAX });
                }
                if owner[v as usize] != usize::MAX {
                    return Err(InstanceError::DuplicateEndpoint { first: owner[v as usize], second: i, which });
                }
                owner[v as usize] = i;
            }
        }
        let instance = Instance { grid, starts: Configuration(starts), goals: Configuration(goals) };
        for i in 0..instance.num_agents() {
            if bfs_dist(&instance.grid, instance.goals[i]).get(instance.starts[i]).is_none() {
                return Err(InstanceError::Unreachable { agent: i });
            }
        }
        Ok(instance)
    }

    /// Builds an instance from `(x, y)` coordinates.
    pub fn from_coords(
        grid: Arc<Grid>,
        agents: &[AgentCells],
    ) -> Result<Self, InstanceError> {
        let mut starts = Vec::with_capacity(agents.len());
        let mut goals = Vec::with_capacity(agents.len());
        for (i, &((sx, sy), (gx, gy))) in agents.iter().enumerate() {
            starts.push(
                grid.vertex_at(sx, sy)
                    .ok_or(InstanceError::BlockedCell { agent: i, which: "start", x: sx, y: sy })?,
            );
            goals.push(
                grid.vertex_at(gx, gy)
                    .ok_or(InstanceError::BlockedCell { agent: i, which: "goal", x: gx, y: gy })?,
            );
        }
        Instance::new(grid, starts, goals)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn starts(&self) -> &Configuration {
        &self.starts
    }

    pub fn goals(&self) -> &Configuration {
        &self.goals
    }

    pub fn num_agents(&self) -> usize {
        self.starts.len()
    }

    /// BFS table towards each agent's goal.
    pub fn dist_tables(&self) -> Vec<DistTable> {
        self.goals.0.iter().map(|&g| bfs_dist(&self.grid, g)).collect()
    }
}

/// Parses a MovingAI `.scen` file, keeping the first `n` entries.
pub fn parse_scen(text: &str, n: usize, grid: Arc<Grid>) -> Result<Instance, InstanceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim_start().starts_with("version") => {}
        Some((no, _)) => return Err(ParseError::new(no, "expected `version` header").into()),
        None => return Err(ParseError::new(1, "empty scenario file").into()),
    }

    let mut entries = Vec::new();
    for (no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 9 {
            return Err(ParseError::new(no, format!("expected 9 fields, found {}", fields.len())).into());
        }
        // bucket, map, width, height, sx, sy, gx, gy, optimal length
        let num = |k: usize| -> Result<usize, ParseError> {
            fields[k]
                .parse()
                .map_err(|_| ParseError::new(no, format!("field {} (`{}`) is not an integer", k + 1, fields[k])))
        };
        let (w, h) = (num(2)?, num(3)?);
        if w != grid.width() || h != grid.height() {
            return Err(InstanceError::DimensionMismatch {
                scen_width: w,
                scen_height: h,
                grid_width: grid.width(),
                grid_height: grid.height(),
            });
        }
        entries.push(((num(4)?, num(5)?), (num(6)?, num(7)?)));
    }
    if n > entries.len() {
        return Err(InstanceError::NotEnoughAgents { requested: n, available: entries.len() });
    }
    entries.truncate(n);
    Instance::from_coords(grid, &entries)
}
