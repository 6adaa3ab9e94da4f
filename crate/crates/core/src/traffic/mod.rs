//! Lightweight traffic map: directed edge traffic counts observed from PIBT,
//! normalized into bounded penalties, and weighted distance queries over them.

mod oracle;

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::TrafficError;
use crate::grid::{Grid, VertexId};

pub use oracle::{AgentDistances, DistanceOracle};

/// Fixed-point traversal cost in units of 1e-9.
///
/// One unit move costs [`Cost::UNIT`]; penalties are added on top, so every
/// edge costs at least one unit and the Manhattan heuristic stays admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Cost(pub u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const UNIT: Cost = Cost(1_000_000_000);
    pub const INFINITY: Cost = Cost(u64::MAX);

    pub fn from_f64(x: f64) -> Cost {
        Cost((x * Self::UNIT.0 as f64).round() as u64)
    }

    pub fn units(n: u64) -> Cost {
        Cost(n * Self::UNIT.0)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / Self::UNIT.0 as f64
    }

    pub fn is_finite(self) -> bool {
        self != Self::INFINITY
    }
}

impl std::ops::Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0.saturating_add(rhs.0))
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finite() {
            write!(f, "{}.{:09}", self.0 / Self::UNIT.0, self.0 % Self::UNIT.0)
        } else {
            f.write_str("inf")
        }
    }
}

/// An action attempted by an agent but pre-empted by a conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockedAction {
    pub agent: u32,
    pub from: VertexId,
    pub to: VertexId,
}

/// Traffic observed in one PIBT transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// High-level search node that generated the transition.
    pub node: Option<u32>,
    /// `(from, to)` per agent.
    pub committed: Vec<(VertexId, VertexId)>,
    /// Whether each agent stood on its goal in the `from` configuration.
    pub at_goal: Vec<bool>,
    pub blocked: Vec<BlockedAction>,
}

impl HistoryRecord {
    /// Every recorded action as `(agent, from, to)`, committed first.
    pub fn actions(&self) -> impl Iterator<Item = (usize, VertexId, VertexId)> + '_ {
        self.committed
            .iter()
            .enumerate()
            .map(|(i, &(f, t))| (i, f, t))
            .chain(self.blocked.iter().map(|b| (b.agent as usize, b.from, b.to)))
    }
}

/// Calls `f` with the directed edge index of every raw-count increment in `record`.
pub fn record_increments(grid: &Grid, record: &HistoryRecord, mut f: impl FnMut(usize)) {
    for (agent, from, to) in record.actions() {
        if from == to {
            if !record.at_goal[agent] {
                grid.out_edges(from).for_each(&mut f);
            }
        } else if let Some(e) = grid.edge_index(from, to) {
            f(e);
        }
    }
}

/// Directed traffic counts and their normalized penalties.
#[derive(Debug, Clone)]
pub struct Ltm {
    grid: Arc<Grid>,
    raw: Vec<u64>,
    penalty: Vec<Cost>,
    lower: Cost,
    upper: Cost,
    max_raw: u64,
    version: u64,
}

impl Ltm {
    pub const DEFAULT_LOWER: f64 = 0.0;
    pub const DEFAULT_UPPER: f64 = 10.0;

    /// Uniform map: all raw counts zero, all penalties at the lower bound.
    pub fn new(grid: Arc<Grid>, w_lb: f64, w_ub: f64) -> Result<Self, TrafficError> {
        let (lower, upper) = Self::check_bounds(w_lb, w_ub)?;
        let m = grid.num_directed_edges();
        Ok(Ltm { grid, raw: vec![0; m], penalty: vec![lower; m], lower, upper, max_raw: 0, version: 0 })
    }

    /// Fixed-point penalty bounds, or an error unless `0 <= w_lb < w_ub`.
    pub fn check_bounds(w_lb: f64, w_ub: f64) -> Result<(Cost, Cost), TrafficError> {
        let err = TrafficError::InvalidBounds { lower: w_lb, upper: w_ub };
        if !(w_lb.is_finite() && w_ub.is_finite() && w_lb >= 0.0 && w_lb < w_ub) {
            return Err(err);
        }
        let (lower, upper) = (Cost::from_f64(w_lb), Cost::from_f64(w_ub));
        if lower >= upper {
            return Err(err);
        }
        Ok((lower, upper))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn max_raw(&self) -> u64 {
        self.max_raw
    }

    pub fn bounds(&self) -> (Cost, Cost) {
        (self.lower, self.upper)
    }

    pub fn raw_counts(&self) -> &[u64] {
        &self.raw
    }

    pub fn penalties(&self) -> &[Cost] {
        &self.penalty
    }

    pub fn raw(&self, from: VertexId, to: VertexId) -> Result<u64, TrafficError> {
        Ok(self.raw[self.edge(from, to)?])
    }

    pub fn penalty(&self, from: VertexId, to: VertexId) -> Result<Cost, TrafficError> {
        Ok(self.penalty[self.edge(from, to)?])
    }

    /// Traversal cost of a directed edge: one unit plus its penalty.
    pub fn edge_cost(&self, from: VertexId, to: VertexId) -> Result<Cost, TrafficError> {
        Ok(Cost::UNIT + self.penalty[self.edge(from, to)?])
    }

    /// Traversal cost by directed edge index.
    pub fn edge_cost_by_index(&self, e: usize) -> Cost {
        Cost::UNIT + self.penalty[e]
    }

    fn edge(&self, from: VertexId, to: VertexId) -> Result<usize, TrafficError> {
        self.grid.edge_index(from, to).ok_or(TrafficError::NotAnEdge { from, to })
    }

    /// Adds the traffic of `records` and re-normalizes.
    pub fn apply_history<'a>(&mut self, records: impl IntoIterator<Item = &'a HistoryRecord>) {
        for r in records {
            record_increments(&self.grid, r, |e| self.raw[e] += 1);
        }
        self.renormalize();
    }

    /// Subtracts the traffic of previously applied `records` and re-normalizes.
    ///
    /// The map is left untouched if any count would go negative.
    pub fn remove_history<'a>(
        &mut self,
        records: impl IntoIterator<Item = &'a HistoryRecord>,
    ) -> Result<(), TrafficError> {
        let mut delta = vec![0u64; self.raw.len()];
        for r in records {
            record_increments(&self.grid, r, |e| delta[e] += 1);
        }
        if let Some(edge) = (0..delta.len()).find(|&e| delta[e] > self.raw[e]) {
            return Err(TrafficError::Underflow { edge });
        }
        for (r, d) in self.raw.iter_mut().zip(delta) {
            *r -= d;
        }
        self.renormalize();
        Ok(())
    }

    /// Linear scaling of raw counts against the global maximum, rounded to 1e-9.
    fn renormalize(&mut self) {
        self.max_raw = self.raw.iter().copied().max().unwrap_or(0);
        let span = u128::from(self.upper.0 - self.lower.0);
        let max = u128::from(self.max_raw);
        for (p, &r) in self.penalty.iter_mut().zip(&self.raw) {
            *p = if max == 0 {
                self.lower
            } else {
                // round half up
                let scaled = (u128::from(r) * span * 2 + max) / (max * 2);
                Cost(self.lower.0 + scaled as u64)
            };
        }
        self.version += 1;
    }

    /// CSV dump: `from_x,from_y,to_x,to_y,raw,penalty`.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "from_x,from_y,to_x,to_y,raw,penalty")?;
        for (e, from, to) in self.grid.directed_edges() {
            let (fx, fy) = self.grid.coord(from);
            let (tx, ty) = self.grid.coord(to);
            writeln!(out, "{fx},{fy},{tx},{ty},{},{}", self.raw[e], self.penalty[e])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor(n: usize) -> Arc<Grid> {
        Arc::new(Grid::open(n, 1))
    }

    fn record(committed: &[(u32, u32)], at_goal: &[bool], blocked: &[(u32, u32, u32)]) -> HistoryRecord {
        HistoryRecord {
            node: None,
            committed: committed.to_vec(),
            at_goal: at_goal.to_vec(),
            blocked: blocked.iter().map(|&(agent, from, to)| BlockedAction { agent, from, to }).collect(),
        }
    }

    #[test]
    fn fresh_map_is_uniform() {
        let ltm = Ltm::new(corridor(3), 0.0, 10.0).unwrap();
        assert_eq!(ltm.grid().num_directed_edges(), 4);
        assert!(ltm.penalties().iter().all(|&p| p == Cost::ZERO));
        assert_eq!(ltm.edge_cost(0, 1).unwrap(), Cost::UNIT);
        assert_eq!(ltm.edge_cost(2, 1).unwrap().as_f64(), 1.0);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(Ltm::new(corridor(3), 5.0, 5.0).is_err());
        assert!(Ltm::new(corridor(3), -1.0, 5.0).is_err());
        assert!(Ltm::new(corridor(3), 0.0, f64::NAN).is_err());
    }

    #[test]
    fn single_committed_move_saturates_its_edge() {
        let mut ltm = Ltm::new(corridor(3), 0.0, 10.0).unwrap();
        ltm.apply_history([&record(&[(0, 1)], &[false], &[])]);
        assert_eq!(ltm.raw(0, 1).unwrap(), 1);
        assert_eq!(ltm.penalty(0, 1).unwrap(), Cost::units(10));
        for (from, to) in [(1, 0), (1, 2), (2, 1)] {
            assert_eq!(ltm.penalty(from, to).unwrap(), Cost::ZERO);
        }
        assert_eq!(ltm.version(), 1);
    }

    #[test]
    fn wait_away_from_goal_hits_all_outgoing_edges() {
        let g = Arc::new(Grid::from_mask(3, 2, &[true, true, true, false, true, false]));
        let v = g.vertex_at(1, 0).unwrap();
        assert_eq!(g.degree(v), 3);
        let mut ltm = Ltm::new(g.clone(), 0.0, 10.0).unwrap();
        ltm.apply_history([&record(&[(v, v)], &[false], &[])]);
        for &u in g.neighbors(v) {
            assert_eq!(ltm.raw(v, u).unwrap(), 1);
        }
        assert_eq!(ltm.raw_counts().iter().sum::<u64>(), 3);
    }

    #[test]
    fn goal_wait_is_ignored() {
        let mut ltm = Ltm::new(corridor(3), 0.0, 10.0).unwrap();
        ltm.apply_history([&record(&[(1, 1)], &[true], &[(0, 1, 1)])]);
        assert!(ltm.raw_counts().iter().all(|&r| r == 0));
        assert_eq!(ltm.max_raw(), 0);
    }

    #[test]
    fn blocked_actions_count_like_committed() {
        let mut ltm = Ltm::new(corridor(3), 0.0, 10.0).unwrap();
        // committed wait at 1 (not goal) + blocked move 1->2
        ltm.apply_history([&record(&[(1, 1)], &[false], &[(0, 1, 2)])]);
        assert_eq!(ltm.raw(1, 0).unwrap(), 1);
        assert_eq!(ltm.raw(1, 2).unwrap(), 2);
        assert_eq!(ltm.penalty(1, 2).unwrap(), Cost::units(10));
        assert_eq!(ltm.penalty(1, 0).unwrap(), Cost::units(5));
    }

    #[test]
    fn remove_is_inverse_of_apply() {
        let mut ltm = Ltm::new(corridor(4), 0.0, 10.0).unwrap();
        let r1 = record(&[(0, 1), (2, 2)], &[false, false], &[(1, 2, 1)]);
        let r2 = record(&[(1, 2), (3, 3)], &[false, true], &[]);
        ltm.apply_history([&r1]);
        ltm.remove_history([&r1]).unwrap();
        assert!(ltm.raw_counts().iter().all(|&r| r == 0));
        assert!(ltm.penalties().iter().all(|&p| p == Cost::ZERO));

        let mut only_r2 = Ltm::new(corridor(4), 0.0, 10.0).unwrap();
        only_r2.apply_history([&r2]);
        ltm.apply_history([&r1, &r2]);
        ltm.remove_history([&r1]).unwrap();
        assert_eq!(ltm.raw_counts(), only_r2.raw_counts());
        assert_eq!(ltm.penalties(), only_r2.penalties());
    }

    #[test]
    fn remove_from_fresh_map_underflows() {
        let mut ltm = Ltm::new(corridor(3), 0.0, 10.0).unwrap();
        let err = ltm.remove_history([&record(&[(0, 1)], &[false], &[])]).unwrap_err();
        assert!(matches!(err, TrafficError::Underflow { .. }));
        assert_eq!(ltm.version(), 0);
    }

    #[test]
    fn csv_dump_has_one_row_per_directed_edge() {
        let ltm = Ltm::new(corridor(3), 0.0, 10.0).unwrap();
        let mut buf = Vec::new();
        ltm.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "from_x,from_y,to_x,to_y,raw,penalty");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,0,1,0,0,0.000000000");
    }
}
