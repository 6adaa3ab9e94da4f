//! The anytime outer loop: repeated bounded LaCAM* runs with traffic-map
//! updates between them, for one-shot solving and for planning-and-execution.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SearchError};
use crate::instance::{Configuration, Instance, Solution};
use crate::search::{NodeId, SearchTree, Termination};
use crate::traffic::Ltm;
use crate::validate::{sol_lower_bound, sum_of_loss, LossConvention, Metrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Oneshot,
    Pe,
}

/// Where each run after the first continues the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartStrategy {
    /// Restart at the root (at the current configuration in PE mode).
    Root,
    /// Experimental: restart halfway along the best solution's path.
    NearGoal,
    /// Continue the paused depth-first search, as plain LaCAM* does.
    Resume,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub mode: Mode,
    /// Seconds; one-shot only.
    pub time_limit: f64,
    /// Seconds per action; PE only.
    pub exec_time: f64,
    /// Actions committed per window; PE only.
    pub commit: usize,
    pub budget_factor: u64,
    pub w_lb: f64,
    pub w_ub: f64,
    pub seed: u64,
    /// Keep the traffic map uniform and never budget runs.
    pub disable_ltm: bool,
    /// Defaults to `Root`, or `Resume` when the traffic map is disabled.
    pub restart: Option<RestartStrategy>,
    /// PE wall-clock cap in seconds before giving up.
    pub max_wall: Option<f64>,
    /// Caps the total generations spent in the first PE window.
    pub first_window_generation_cap: Option<u64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            mode: Mode::Oneshot,
            time_limit: 30.0,
            exec_time: 0.1,
            commit: 5,
            budget_factor: 10,
            w_lb: 0.0,
            w_ub: 10.0,
            seed: 0,
            disable_ltm: false,
            restart: None,
            max_wall: None,
            first_window_generation_cap: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.mode == Mode::Oneshot && !positive(self.time_limit) {
            return Err(ConfigError::TimeLimit(self.time_limit));
        }
        if self.mode == Mode::Pe {
            if !positive(self.exec_time) {
                return Err(ConfigError::ExecTime(self.exec_time));
            }
            if self.commit == 0 {
                return Err(ConfigError::Commit);
            }
        }
        if self.budget_factor == 0 {
            return Err(ConfigError::BudgetFactor(self.budget_factor));
        }
        Ltm::check_bounds(self.w_lb, self.w_ub)?;
        Ok(())
    }

    pub fn restart_strategy(&self) -> RestartStrategy {
        self.restart.unwrap_or(if self.disable_ltm { RestartStrategy::Resume } else { RestartStrategy::Root })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnytimeEvent {
    /// Nanoseconds since the solver started.
    pub time_ns: u64,
    pub sol: u64,
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: u64,
    pub budget: Option<u64>,
    pub reason: Termination,
    pub high_level_generations: u64,
    pub low_level_generations: u64,
    /// Cost of the solution returned by this iteration, if any.
    pub cost: Option<u64>,
}

/// Why the one-shot loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeLimit,
    /// Best cost equals the sum of individual shortest paths.
    LowerBound,
    /// Search space exhausted: the best solution is optimal, or none exists.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct OneShotResult {
    pub solution: Option<Solution>,
    /// Solution of the first successful iteration.
    pub first_solution: Option<Solution>,
    pub sol: Option<u64>,
    pub events: Vec<AnytimeEvent>,
    pub iterations: Vec<IterationStats>,
    pub stop: StopReason,
    pub ltm: Ltm,
}

struct EventClock {
    start: Instant,
    last: Option<u64>,
}

impl EventClock {
    fn stamp(&mut self) -> u64 {
        let now = self.start.elapsed().as_nanos() as u64;
        let t = match self.last {
            Some(prev) if now <= prev => prev + 1,
            _ => now,
        };
        self.last = Some(t);
        t
    }
}

/// Picks where the next run resumes. `current` is the PE node of the
/// committed configuration; one-shot uses the root.
pub fn select_restart_node(
    tree: &SearchTree,
    strategy: RestartStrategy,
    current: Option<NodeId>,
) -> Result<Option<NodeId>, SearchError> {
    let base = match current {
        Some(c) => {
            tree.node(c)?;
            if c != tree.root() {
                return Err(SearchError::UnknownConfiguration);
            }
            c
        }
        None => tree.root(),
    };
    Ok(match strategy {
        RestartStrategy::Root => Some(base),
        RestartStrategy::Resume => None,
        RestartStrategy::NearGoal => match tree.goal_node() {
            Some(goal) => {
                // halfway along the incumbent, backing off towards the root
                // until the node is not dominated by the incumbent itself
                let path = tree.path_nodes(goal)?;
                let best = tree.node(goal)?.g();
                let pick = path[path.len() / 2..]
                    .iter()
                    .copied()
                    .find(|&id| tree.node(id).is_ok_and(|n| n.f() < best))
                    .unwrap_or(base);
                Some(pick)
            }
            None => Some(base),
        },
    })
}

fn budget_for(cfg: &SolveConfig, best: Option<&Solution>) -> Option<u64> {
    if cfg.disable_ltm {
        return None;
    }
    best.map(|s| (cfg.budget_factor * s.makespan() as u64).max(1))
}

/// Anytime one-shot solving until the time limit, a proven optimum, or the
/// lower bound is reached.
pub fn solve_oneshot(instance: &Instance, cfg: &SolveConfig) -> Result<OneShotResult, ConfigError> {
    cfg.validate()?;
    let mut clock = EventClock { start: Instant::now(), last: None };
    let deadline = clock.start + Duration::from_secs_f64(cfg.time_limit);
    let mut ltm = Ltm::new(instance.grid_arc().clone(), cfg.w_lb, cfg.w_ub)?;
    let mut tree = SearchTree::new(instance, &ltm, cfg.seed, false);
    let strategy = cfg.restart_strategy();
    let lb = sol_lower_bound(instance);

    let mut best: Option<(Solution, u64)> = None;
    let mut first_solution = None;
    let mut events = Vec::new();
    let mut iterations: Vec<IterationStats> = Vec::new();
    let mut iteration = 0u64;
    let mut pending: Option<IterationStats> = None;
    let stop = loop {
        if best.as_ref().is_some_and(|(_, c)| *c <= lb) {
            break StopReason::LowerBound;
        }
        if Instant::now() >= deadline {
            break StopReason::TimeLimit;
        }
        let restart = if iteration == 0 && pending.is_none() {
            None
        } else if pending.is_some() {
            // dominated pop while resuming: same iteration continues
            None
        } else {
            select_restart_node(&tree, strategy, None).expect("root is always live")
        };
        if restart.is_some() {
            tree.refresh_priorities(&ltm);
        }
        let budget = budget_for(cfg, best.as_ref().map(|(s, _)| s));
        let r = tree
            .run(restart, &ltm, budget, best.as_ref().map(|(_, c)| *c), Some(deadline))
            .expect("restart node comes from the tree");
        if !cfg.disable_ltm && !r.records.is_empty() {
            ltm.apply_history(&r.records);
        }
        let stats = pending.get_or_insert(IterationStats {
            iteration,
            budget,
            reason: r.reason,
            high_level_generations: 0,
            low_level_generations: 0,
            cost: None,
        });
        stats.reason = r.reason;
        stats.high_level_generations += r.high_level_generations;
        stats.low_level_generations += r.low_level_generations;
        stats.cost = r.cost;
        if r.reason == Termination::Pruned && strategy == RestartStrategy::Resume {
            continue;
        }
        iterations.push(pending.take().unwrap());
        if let (Some(sol), Some(cost)) = (r.solution, r.cost) {
            if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                log::info!("iteration {iteration}: sol {cost}");
                events.push(AnytimeEvent { time_ns: clock.stamp(), sol: cost, iteration });
                first_solution.get_or_insert_with(|| sol.clone());
                best = Some((sol, cost));
            }
        }
        iteration += 1;
        match r.reason {
            Termination::Exhausted => break StopReason::Exhausted,
            Termination::Deadline => break StopReason::TimeLimit,
            _ => {}
        }
    };
    if let Some(p) = pending {
        iterations.push(p);
    }
    let (solution, sol) = match best {
        Some((s, c)) => (Some(s), Some(c)),
        None => (None, None),
    };
    Ok(OneShotResult { solution, first_solution, sol, events, iterations, stop, ltm })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeStatus {
    Running,
    Solved,
    /// Wall-clock cap hit before all agents reached their goals.
    WallCapExceeded,
    /// Search space exhausted without a solution.
    Unsolvable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowStats {
    pub window: u64,
    pub iterations: u64,
    pub high_level_generations: u64,
    pub low_level_generations: u64,
    /// Remaining cost from the window's start configuration, if a plan existed.
    pub best_cost: Option<u64>,
    /// True when the window committed waits only, for lack of a plan.
    pub waited: bool,
    /// Committed configurations after this window.
    pub prefix_len: usize,
    pub prefix_hash: u64,
}

#[derive(Debug, Clone)]
pub struct ExecutionTrace {
    pub committed: Vec<Configuration>,
    pub windows: Vec<WindowStats>,
    pub status: PeStatus,
    pub metrics: Option<Metrics>,
}

impl ExecutionTrace {
    pub fn solution(&self) -> Solution {
        Solution::new(self.committed.clone())
    }
}

/// Hash of a committed prefix, used to check that it never changes.
pub fn prefix_hash(steps: &[Configuration]) -> u64 {
    let mut h = DefaultHasher::new();
    steps.hash(&mut h);
    h.finish()
}

/// Planning-and-execution state, advanced one window at a time.
pub struct PeSession {
    instance: Instance,
    cfg: SolveConfig,
    ltm: Ltm,
    tree: SearchTree,
    committed: Vec<Configuration>,
    windows: Vec<WindowStats>,
    status: PeStatus,
    started: Instant,
    iteration: u64,
}

impl PeSession {
    pub fn new(instance: &Instance, cfg: &SolveConfig) -> Result<Self, ConfigError> {
        let mut cfg = cfg.clone();
        cfg.mode = Mode::Pe;
        cfg.validate()?;
        let ltm = Ltm::new(instance.grid_arc().clone(), cfg.w_lb, cfg.w_ub)?;
        let tree = SearchTree::new(instance, &ltm, cfg.seed, true);
        let status = if instance.starts() == instance.goals() { PeStatus::Solved } else { PeStatus::Running };
        Ok(PeSession {
            instance: instance.clone(),
            cfg,
            ltm,
            tree,
            committed: vec![instance.starts().clone()],
            windows: Vec::new(),
            status,
            started: Instant::now(),
            iteration: 0,
        })
    }

    pub fn status(&self) -> PeStatus {
        self.status
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn ltm(&self) -> &Ltm {
        &self.ltm
    }

    pub fn committed(&self) -> &[Configuration] {
        &self.committed
    }

    pub fn windows(&self) -> &[WindowStats] {
        &self.windows
    }

    fn window_length(&self) -> Duration {
        Duration::from_secs_f64(self.cfg.exec_time * self.cfg.commit as f64)
    }

    /// Plans for one window of E×X seconds, then commits X actions.
    pub fn step_window(&mut self) -> PeStatus {
        if self.status != PeStatus::Running {
            return self.status;
        }
        if self
            .cfg
            .max_wall
            .is_some_and(|cap| self.started.elapsed() >= Duration::from_secs_f64(cap))
        {
            self.status = PeStatus::WallCapExceeded;
            return self.status;
        }
        let window = self.windows.len() as u64;
        let deadline = Instant::now() + self.window_length();
        let cap = if window == 0 { self.cfg.first_window_generation_cap } else { None };
        let strategy = self.cfg.restart_strategy();
        let (mut high, mut low, mut iterations) = (0u64, 0u64, 0u64);
        let mut exhausted = false;
        loop {
            let best = self.tree.goal_node().map(|g| self.tree.node(g).unwrap().g());
            let root_h = self.tree.node(self.tree.root()).unwrap().h();
            if best.is_some_and(|b| b <= root_h) || Instant::now() >= deadline {
                break;
            }
            let spent = high + low;
            if cap.is_some_and(|c| spent >= c) {
                break;
            }
            let best_sol = match self.tree.goal_node() {
                Some(g) => Some(self.tree.extract(g).unwrap()),
                None => None,
            };
            let restart = if best.is_some() && self.iteration > 0 {
                select_restart_node(&self.tree, strategy, Some(self.tree.root())).unwrap()
            } else {
                None
            };
            if restart.is_some() {
                self.tree.refresh_priorities(&self.ltm);
            }
            let mut budget = if self.iteration == 0 { None } else { budget_for(&self.cfg, best_sol.as_ref()) };
            if let Some(c) = cap {
                budget = Some(budget.map_or(c - spent, |b| b.min(c - spent)));
            }
            let r = self
                .tree
                .run(restart, &self.ltm, budget, best, Some(deadline))
                .expect("restart node comes from the tree");
            if !self.cfg.disable_ltm && !r.records.is_empty() {
                self.ltm.apply_history(&r.records);
            }
            high += r.high_level_generations;
            low += r.low_level_generations;
            iterations += 1;
            self.iteration += 1;
            if r.reason == Termination::Exhausted {
                exhausted = true;
                break;
            }
        }

        let x = self.cfg.commit;
        let goal = self.tree.goal_node();
        let best_cost = goal.map(|g| self.tree.node(g).unwrap().g());
        match goal {
            Some(g) => {
                let path = self.tree.path_nodes(g).unwrap();
                for k in 1..=x {
                    let node = path[k.min(path.len() - 1)];
                    self.committed.push(Configuration(self.tree.node(node).unwrap().config().to_vec()));
                }
                let next = path[x.min(path.len() - 1)];
                let removed = self.tree.reroot(next).unwrap();
                if !self.cfg.disable_ltm && !removed.is_empty() {
                    self.ltm
                        .remove_history(&removed)
                        .expect("discarded records were applied earlier");
                }
                self.tree.refresh_priorities(&self.ltm);
            }
            None => {
                let cur = self.committed.last().unwrap().clone();
                self.committed.extend(std::iter::repeat_n(cur, x));
            }
        }
        self.windows.push(WindowStats {
            window,
            iterations,
            high_level_generations: high,
            low_level_generations: low,
            best_cost,
            waited: goal.is_none(),
            prefix_len: self.committed.len(),
            prefix_hash: prefix_hash(&self.committed),
        });
        if self.committed.last() == Some(self.instance.goals()) {
            self.status = PeStatus::Solved;
        } else if exhausted && goal.is_none() {
            self.status = PeStatus::Unsolvable;
        }
        self.status
    }

    pub fn finish(self) -> ExecutionTrace {
        let sol = Solution::new(self.committed.clone());
        let metrics = match self.status {
            PeStatus::Solved => sum_of_loss(&self.instance, &sol, LossConvention::FromVertex).ok(),
            _ => None,
        };
        ExecutionTrace { committed: self.committed, windows: self.windows, status: self.status, metrics }
    }
}

/// Runs windows until all agents are at their goals or the session fails.
pub fn solve_pe(instance: &Instance, cfg: &SolveConfig) -> Result<ExecutionTrace, ConfigError> {
    let mut session = PeSession::new(instance, cfg)?;
    while session.step_window() == PeStatus::Running {}
    Ok(session.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::traffic::record_increments;
    use crate::validate::validate_solution;
    use std::sync::Arc;

    fn quick(limit: f64) -> SolveConfig {
        SolveConfig { time_limit: limit, ..SolveConfig::default() }
    }

    #[test]
    fn config_validation_names_the_problem() {
        assert!(matches!(
            SolveConfig { time_limit: 0.0, ..SolveConfig::default() }.validate(),
            Err(ConfigError::TimeLimit(_))
        ));
        let pe = SolveConfig { mode: Mode::Pe, commit: 0, ..SolveConfig::default() };
        assert_eq!(pe.validate(), Err(ConfigError::Commit));
        assert!(SolveConfig { budget_factor: 0, ..SolveConfig::default() }.validate().is_err());
        assert!(SolveConfig { w_lb: 5.0, w_ub: 1.0, ..SolveConfig::default() }.validate().is_err());
    }

    #[test]
    fn all_at_goal_returns_single_step() {
        let g = Arc::new(Grid::open(3, 3));
        let inst = Instance::new(g, vec![0, 4], vec![0, 4]).unwrap();
        let r = solve_oneshot(&inst, &quick(1.0)).unwrap();
        assert_eq!(r.sol, Some(0));
        assert_eq!(r.solution.unwrap().steps.len(), 1);
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.stop, StopReason::LowerBound);
    }

    #[test]
    fn oneshot_events_strictly_decrease() {
        let g = Arc::new(Grid::open(5, 5));
        let inst = Instance::from_coords(
            g,
            &[((0, 0), (4, 4)), ((4, 4), (0, 0)), ((0, 4), (4, 0)), ((4, 0), (0, 4)), ((2, 2), (2, 0))],
        )
        .unwrap();
        let r = solve_oneshot(&inst, &quick(1.0)).unwrap();
        let sol = r.solution.as_ref().unwrap();
        assert!(validate_solution(&inst, sol).ok);
        assert!(r.events.windows(2).all(|w| w[0].sol > w[1].sol && w[0].time_ns < w[1].time_ns));
        assert_eq!(r.events.last().unwrap().sol, r.sol.unwrap());
        assert_eq!(sum_of_loss(&inst, sol, LossConvention::FromVertex).unwrap().sol, r.sol.unwrap());
    }

    #[test]
    fn restart_selection() {
        let g = Arc::new(Grid::open(3, 1));
        let inst = Instance::new(g.clone(), vec![0], vec![2]).unwrap();
        let ltm = Ltm::new(g, 0.0, 10.0).unwrap();
        let mut tree = SearchTree::new(&inst, &ltm, 0, false);
        assert_eq!(select_restart_node(&tree, RestartStrategy::Root, None).unwrap(), Some(tree.root()));
        assert_eq!(select_restart_node(&tree, RestartStrategy::Resume, None).unwrap(), None);
        tree.run(None, &ltm, None, None, None).unwrap();
        let goal = tree.goal_node().unwrap();
        // a live node that is not the committed configuration
        assert_eq!(
            select_restart_node(&tree, RestartStrategy::Root, Some(goal)),
            Err(SearchError::UnknownConfiguration)
        );
        assert!(select_restart_node(&tree, RestartStrategy::Root, Some(99)).is_err());
        // every node on an optimal corridor plan has f equal to the incumbent
        let near = select_restart_node(&tree, RestartStrategy::NearGoal, None).unwrap();
        assert_eq!(near, Some(tree.root()));
    }

    #[test]
    fn pe_corridor_pads_with_goal_waits() {
        let g = Arc::new(Grid::open(3, 1));
        let inst = Instance::new(g, vec![0], vec![2]).unwrap();
        let cfg = SolveConfig { mode: Mode::Pe, exec_time: 0.1, commit: 5, ..SolveConfig::default() };
        let trace = solve_pe(&inst, &cfg).unwrap();
        assert_eq!(trace.status, PeStatus::Solved);
        let cells: Vec<u32> = trace.committed.iter().map(|c| c[0]).collect();
        assert_eq!(cells, vec![0, 1, 2, 2, 2, 2]);
        assert_eq!(trace.windows.len(), 1);
        assert_eq!(trace.metrics.unwrap().sol, 2);
    }

    #[test]
    fn pe_trivial_instance_commits_nothing() {
        let g = Arc::new(Grid::open(2, 2));
        let inst = Instance::new(g, vec![0], vec![0]).unwrap();
        let cfg = SolveConfig { mode: Mode::Pe, ..SolveConfig::default() };
        let trace = solve_pe(&inst, &cfg).unwrap();
        assert_eq!(trace.committed.len(), 1);
        assert!(trace.windows.is_empty());
        assert_eq!(trace.metrics.unwrap().sol, 0);
    }

    #[test]
    fn pe_ltm_matches_retained_records() {
        let g = Arc::new(Grid::open(5, 5));
        let inst = Instance::from_coords(
            g.clone(),
            &[((0, 0), (4, 4)), ((4, 4), (0, 0)), ((0, 4), (4, 0)), ((2, 2), (2, 4))],
        )
        .unwrap();
        let cfg = SolveConfig { mode: Mode::Pe, exec_time: 0.01, commit: 2, ..SolveConfig::default() };
        let mut s = PeSession::new(&inst, &cfg).unwrap();
        while s.step_window() == PeStatus::Running {
            let mut expect = vec![0u64; g.num_directed_edges()];
            for r in s.tree().retained_records() {
                record_increments(&g, r, |e| expect[e] += 1);
            }
            assert_eq!(s.ltm().raw_counts(), &expect[..]);
        }
        let trace = s.finish();
        assert_eq!(trace.status, PeStatus::Solved);
        assert!(validate_solution(&inst, &trace.solution()).ok);
    }
}
