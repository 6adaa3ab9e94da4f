use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Cost, Ltm};
use crate::error::TrafficError;
use crate::grid::{Grid, VertexId};

/// Resumable backward A* over the weighted traffic map towards one goal.
///
/// Settled vertices keep exact distances; a query for an unsettled vertex
/// re-keys the frontier with the Manhattan distance to that vertex and
/// continues until it is settled. Edge costs are at least one unit, so the
/// heuristic is consistent for every query target.
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    goal: VertexId,
    version: u64,
    dist: Vec<u64>,
    closed: Vec<bool>,
    /// (g + h, g, vertex)
    open: BinaryHeap<Reverse<(u64, u64, VertexId)>>,
    target: Option<VertexId>,
}

impl DistanceOracle {
    pub fn new(ltm: &Ltm, goal: VertexId) -> Self {
        let n = ltm.grid().num_vertices();
        let mut oracle = DistanceOracle {
            goal,
            version: ltm.version(),
            dist: vec![u64::MAX; n],
            closed: vec![false; n],
            open: BinaryHeap::new(),
            target: None,
        };
        oracle.reset(ltm);
        oracle
    }

    pub fn goal(&self) -> VertexId {
        self.goal
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Discards all search state and rebinds to the current map version.
    pub fn reset(&mut self, ltm: &Ltm) {
        self.version = ltm.version();
        self.dist.fill(u64::MAX);
        self.closed.fill(false);
        self.open.clear();
        self.target = None;
        self.dist[self.goal as usize] = 0;
        self.open.push(Reverse((0, 0, self.goal)));
    }

    /// Already settled distance, without advancing the search.
    pub fn settled(&self, v: VertexId) -> Option<Cost> {
        self.closed[v as usize].then(|| Cost(self.dist[v as usize]))
    }

    /// Weighted distance from `v` to the goal; `None` when unreachable.
    pub fn dist(&mut self, ltm: &Ltm, v: VertexId) -> Result<Option<Cost>, TrafficError> {
        if self.version != ltm.version() {
            return Err(TrafficError::StaleOracle { oracle: self.version, current: ltm.version() });
        }
        if self.closed[v as usize] {
            return Ok(Some(Cost(self.dist[v as usize])));
        }
        let grid = ltm.grid().as_ref();
        if self.target != Some(v) {
            self.retarget(grid, v);
        }
        while let Some(Reverse((_, g, u))) = self.open.pop() {
            if self.closed[u as usize] || g != self.dist[u as usize] {
                continue;
            }
            self.closed[u as usize] = true;
            // predecessors p with edge p -> u
            for &p in grid.neighbors(u) {
                if self.closed[p as usize] {
                    continue;
                }
                let e = grid.edge_index(p, u).expect("grid adjacency is symmetric");
                let cand = g + ltm.edge_cost_by_index(e).0;
                if cand < self.dist[p as usize] {
                    self.dist[p as usize] = cand;
                    self.open.push(Reverse((cand + heuristic(grid, p, v), cand, p)));
                }
            }
            if u == v {
                return Ok(Some(Cost(g)));
            }
        }
        Ok(None)
    }

    fn retarget(&mut self, grid: &Grid, target: VertexId) {
        let old = std::mem::take(&mut self.open).into_vec();
        self.open = old
            .into_iter()
            .filter(|Reverse((_, g, u))| !self.closed[*u as usize] && *g == self.dist[*u as usize])
            .map(|Reverse((_, g, u))| Reverse((g + heuristic(grid, u, target), g, u)))
            .collect();
        self.target = Some(target);
    }
}

fn heuristic(grid: &Grid, u: VertexId, target: VertexId) -> u64 {
    grid.manhattan(u, target) as u64 * Cost::UNIT.0
}

/// Lazily created per-agent oracles, invalidated whenever the map version changes.
#[derive(Debug, Clone)]
pub struct AgentDistances {
    goals: Vec<VertexId>,
    oracles: Vec<Option<DistanceOracle>>,
}

impl AgentDistances {
    pub fn new(goals: &[VertexId]) -> Self {
        AgentDistances { goals: goals.to_vec(), oracles: vec![None; goals.len()] }
    }

    /// Weighted distance from `v` to `agent`'s goal; [`Cost::INFINITY`] if unreachable.
    pub fn get(&mut self, ltm: &Ltm, agent: usize, v: VertexId) -> Cost {
        let goal = self.goals[agent];
        let oracle = self.oracles[agent].get_or_insert_with(|| DistanceOracle::new(ltm, goal));
        if oracle.version() != ltm.version() {
            oracle.reset(ltm);
        }
        oracle
            .dist(ltm, v)
            .expect("oracle rebound to the current version")
            .unwrap_or(Cost::INFINITY)
    }

    pub fn num_agents(&self) -> usize {
        self.goals.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::bfs_dist;
    use crate::traffic::HistoryRecord;
    use std::sync::Arc;

    #[test]
    fn uniform_map_matches_bfs() {
        let g = Arc::new(Grid::from_mask(4, 3, &[
            true, true, true, true, //
            true, false, false, true, //
            true, true, true, true,
        ]));
        let ltm = Ltm::new(g.clone(), 0.0, 10.0).unwrap();
        for goal in 0..g.num_vertices() as VertexId {
            let table = bfs_dist(&g, goal);
            let mut o = DistanceOracle::new(&ltm, goal);
            for v in (0..g.num_vertices() as VertexId).rev() {
                let d = o.dist(&ltm, v).unwrap().unwrap();
                assert_eq!(d, Cost::units(u64::from(table.get(v).unwrap())));
            }
        }
    }

    #[test]
    fn corridor_single_penalized_edge() {
        let g = Arc::new(Grid::open(3, 1));
        let mut ltm = Ltm::new(g, 0.0, 10.0).unwrap();
        ltm.apply_history([&HistoryRecord {
            node: None,
            committed: vec![(0, 1)],
            at_goal: vec![false],
            blocked: vec![],
        }]);
        let mut o = DistanceOracle::new(&ltm, 2);
        assert_eq!(o.dist(&ltm, 0).unwrap(), Some(Cost::units(12)));
        assert_eq!(o.dist(&ltm, 2).unwrap(), Some(Cost::ZERO));
    }

    #[test]
    fn detour_around_penalized_edge() {
        let g = Arc::new(Grid::open(2, 2));
        let (a, b, goal) = (g.vertex_at(0, 0).unwrap(), g.vertex_at(1, 0).unwrap(), g.vertex_at(1, 1).unwrap());
        let mut ltm = Ltm::new(g.clone(), 0.0, 10.0).unwrap();
        ltm.apply_history([&HistoryRecord { node: None, committed: vec![(a, b)], at_goal: vec![false], blocked: vec![] }]);
        let mut o = DistanceOracle::new(&ltm, goal);
        assert_eq!(o.dist(&ltm, a).unwrap(), Some(Cost::units(2)));
    }

    #[test]
    fn stale_oracle_is_rejected() {
        let g = Arc::new(Grid::open(3, 1));
        let mut ltm = Ltm::new(g, 0.0, 10.0).unwrap();
        let mut o = DistanceOracle::new(&ltm, 0);
        ltm.apply_history([]);
        assert!(matches!(o.dist(&ltm, 2), Err(TrafficError::StaleOracle { .. })));
        o.reset(&ltm);
        assert_eq!(o.dist(&ltm, 2).unwrap(), Some(Cost::units(2)));
    }

    #[test]
    fn unreachable_vertex() {
        let g = Arc::new(Grid::from_mask(3, 1, &[true, false, true]));
        let ltm = Ltm::new(g, 0.0, 10.0).unwrap();
        let mut o = DistanceOracle::new(&ltm, 0);
        assert_eq!(o.dist(&ltm, 1).unwrap(), None);
    }

    #[test]
    fn agent_distances_follow_version() {
        let g = Arc::new(Grid::open(3, 1));
        let mut ltm = Ltm::new(g, 0.0, 10.0).unwrap();
        let mut d = AgentDistances::new(&[2]);
        assert_eq!(d.get(&ltm, 0, 0), Cost::units(2));
        ltm.apply_history([&HistoryRecord { node: None, committed: vec![(0, 1)], at_goal: vec![false], blocked: vec![] }]);
        assert_eq!(d.get(&ltm, 0, 0), Cost::units(12));
    }
}
