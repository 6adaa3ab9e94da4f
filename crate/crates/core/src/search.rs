//! Bounded LaCAM* runs: depth-first search over configurations with lazily
//! expanded constraint trees, Dijkstra-style cost relaxation and early
//! termination on goal, improvement, domination, node budget or deadline.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::DistTable;
use crate::error::SearchError;
use crate::grid::VertexId;
use crate::instance::{Configuration, Instance, Solution};
use crate::pibt::{priority_order, successor_steps, Pibt, PibtOutcome, PositionConstraint};
use crate::traffic::{AgentDistances, Cost, HistoryRecord, Ltm};

pub type NodeId = u32;

/// Chance of pushing the root instead of a rediscovered configuration.
pub const RESTART_RATE: f64 = 0.001;

/// Sum-of-loss cost of a transition: agents not at their goal in `from`.
pub fn edge_cost(instance: &Instance, from: &[VertexId], _to: &[VertexId]) -> u64 {
    loss(instance.goals().as_slice(), from)
}

fn loss(goals: &[VertexId], config: &[VertexId]) -> u64 {
    config.iter().zip(goals).filter(|(v, g)| v != g).count() as u64
}

/// A configuration in the high-level search.
#[derive(Debug, Clone)]
pub struct HighLevelNode {
    config: Arc<[VertexId]>,
    g: u64,
    h: u64,
    /// Cost of any transition out of this configuration.
    loss: u64,
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    steps: Vec<u32>,
    /// Agent order of the constraint tree, fixed on first expansion.
    order: Option<Vec<u32>>,
    lowlevel: VecDeque<PositionConstraint>,
    records: Vec<u32>,
    depth: u32,
    alive: bool,
}

impl HighLevelNode {
    pub fn config(&self) -> &[VertexId] {
        &self.config
    }

    pub fn g(&self) -> u64 {
        self.g
    }

    pub fn h(&self) -> u64 {
        self.h
    }

    pub fn f(&self) -> u64 {
        self.g + self.h
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Ids of history records generated while expanding this node.
    pub fn record_ids(&self) -> &[u32] {
        &self.records
    }

    /// Dynamic priority component per agent.
    pub fn priority_steps(&self) -> &[u32] {
        &self.steps
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Popped the goal configuration.
    Goal,
    /// Relaxation lowered the cost of the known goal node.
    Improved,
    /// Generation budget spent.
    Bound,
    /// Popped a node whose f reaches the best known cost.
    Pruned,
    Deadline,
    /// Open stack empty.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub solution: Option<Solution>,
    /// g of the goal node when a solution is returned.
    pub cost: Option<u64>,
    pub records: Vec<HistoryRecord>,
    pub reason: Termination,
    pub high_level_generations: u64,
    pub low_level_generations: u64,
}

impl RunResult {
    pub fn generations(&self) -> u64 {
        self.high_level_generations + self.low_level_generations
    }
}

/// Explored configurations, the depth-first open stack and per-run scratch state.
#[derive(Debug, Clone)]
pub struct SearchTree {
    instance: Instance,
    goals: Vec<VertexId>,
    uniform: Vec<DistTable>,
    nodes: Vec<HighLevelNode>,
    explored: HashMap<Arc<[VertexId]>, NodeId>,
    open: Vec<NodeId>,
    root: NodeId,
    goal_node: Option<NodeId>,
    base: Vec<Cost>,
    high_gens: u64,
    low_gens: u64,
    retain_history: bool,
    history: Vec<Option<HistoryRecord>>,
    rng: ChaCha8Rng,
    pibt: Pibt,
    dists: AgentDistances,
}

impl SearchTree {
    /// A tree holding only the start configuration, which is also on the open stack.
    pub fn new(instance: &Instance, ltm: &Ltm, seed: u64, retain_history: bool) -> Self {
        let goals = instance.goals().0.clone();
        let mut tree = SearchTree {
            instance: instance.clone(),
            uniform: instance.dist_tables(),
            goals: goals.clone(),
            nodes: Vec::new(),
            explored: HashMap::new(),
            open: Vec::new(),
            root: 0,
            goal_node: None,
            base: Vec::new(),
            high_gens: 0,
            low_gens: 0,
            retain_history,
            history: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            pibt: Pibt::new(instance),
            dists: AgentDistances::new(&goals),
        };
        let start: Arc<[VertexId]> = instance.starts().0.clone().into();
        let root = tree.insert(start, None, 0, vec![0; goals.len()], 0);
        tree.root = root;
        tree.open.push(root);
        tree.refresh_priorities(ltm);
        tree
    }

    fn insert(
        &mut self,
        config: Arc<[VertexId]>,
        parent: Option<NodeId>,
        g: u64,
        steps: Vec<u32>,
        depth: u32,
    ) -> NodeId {
        let id = self.nodes.len() as NodeId;
        let h = config
            .iter()
            .zip(&self.uniform)
            .map(|(&v, t)| u64::from(t.get(v).expect("goals reachable from every explored vertex")))
            .sum();
        if *config == *self.goals {
            self.goal_node = Some(id);
        }
        self.nodes.push(HighLevelNode {
            loss: loss(&self.goals, &config),
            config: config.clone(),
            g,
            h,
            parent,
            children: Vec::new(),
            steps,
            order: None,
            lowlevel: VecDeque::from([PositionConstraint::empty()]),
            records: Vec::new(),
            depth,
            alive: true,
        });
        self.explored.insert(config, id);
        if let Some(p) = parent {
            self.nodes[p as usize].children.push(id);
        }
        id
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn goal_node(&self) -> Option<NodeId> {
        self.goal_node
    }

    pub fn node(&self, id: NodeId) -> Result<&HighLevelNode, SearchError> {
        self.nodes
            .get(id as usize)
            .filter(|n| n.alive)
            .ok_or(SearchError::UnknownNode(id))
    }

    pub fn find(&self, config: &[VertexId]) -> Option<NodeId> {
        self.explored.get(config).copied()
    }

    /// Ids of live nodes in creation order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.alive).map(|(i, _)| i as NodeId)
    }

    /// Number of live nodes.
    pub fn len(&self) -> usize {
        self.explored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.explored.is_empty()
    }

    pub fn open_stack(&self) -> &[NodeId] {
        &self.open
    }

    pub fn high_level_generations(&self) -> u64 {
        self.high_gens
    }

    pub fn low_level_generations(&self) -> u64 {
        self.low_gens
    }

    /// Retained history records, by id.
    pub fn record(&self, id: u32) -> Option<&HistoryRecord> {
        self.history.get(id as usize).and_then(Option::as_ref)
    }

    /// All retained records attached to live nodes.
    pub fn retained_records(&self) -> impl Iterator<Item = &HistoryRecord> {
        self.history.iter().flatten()
    }

    /// Uniform-cost remaining-loss estimate of a configuration.
    pub fn heuristic(&self, config: &[VertexId]) -> u64 {
        config.iter().zip(&self.uniform).map(|(&v, t)| u64::from(t.raw(v))).sum()
    }

    /// Re-derives base priorities from traffic-map distances of the root configuration.
    pub fn refresh_priorities(&mut self, ltm: &Ltm) {
        let root = self.nodes[self.root as usize].config.clone();
        self.base = root.iter().enumerate().map(|(i, &v)| self.dists.get(ltm, i, v)).collect();
    }

    /// Pushes a node on top of the open stack.
    pub fn push_open(&mut self, id: NodeId) -> Result<(), SearchError> {
        self.node(id)?;
        self.open.push(id);
        Ok(())
    }

    /// Yields the node's next constraint from its low-level tree, expanding
    /// that constraint's children breadth-first; `None` once exhausted.
    pub fn next_constraint(&mut self, id: NodeId, ltm: &Ltm) -> Result<Option<PositionConstraint>, SearchError> {
        self.node(id)?;
        let n = self.goals.len();
        if self.nodes[id as usize].order.is_none() {
            let order = priority_order(&self.nodes[id as usize].steps, &self.base);
            self.nodes[id as usize].order = Some(order);
        }
        let Some(constraint) = self.nodes[id as usize].lowlevel.pop_front() else {
            return Ok(None);
        };
        self.low_gens += 1;
        if constraint.len() < n {
            let node = &self.nodes[id as usize];
            let agent = node.order.as_ref().unwrap()[constraint.len()];
            let v = node.config[agent as usize];
            let config = node.config.clone();
            let grid = self.instance.grid();
            let mut cands: Vec<(Cost, VertexId)> = grid
                .neighbors(v)
                .iter()
                .chain(std::iter::once(&v))
                .map(|&u| (self.dists.get(ltm, agent as usize, u), u))
                .collect();
            cands.sort_unstable();
            let node = &mut self.nodes[id as usize];
            for (_, u) in cands {
                let clash = constraint
                    .pins
                    .iter()
                    .any(|&(j, w)| w == u || (w == v && config[j as usize] == u));
                if !clash {
                    node.lowlevel.push_back(constraint.with(agent, u));
                }
            }
        }
        Ok(Some(constraint))
    }

    /// Offers `candidate_parent` as a cheaper predecessor of `node` and
    /// propagates any decrease to descendants; true iff the goal node's g dropped.
    pub fn relax_g(&mut self, node: NodeId, candidate_parent: NodeId) -> Result<bool, SearchError> {
        self.node(node)?;
        self.node(candidate_parent)?;
        let cp = &mut self.nodes[candidate_parent as usize];
        if !cp.children.contains(&node) {
            cp.children.push(node);
        }
        let goal_before = self.goal_node.map(|g| self.nodes[g as usize].g);
        let bound = goal_before;
        let mut heap = BinaryHeap::from([Reverse((self.nodes[candidate_parent as usize].g, candidate_parent))]);
        while let Some(Reverse((g, u))) = heap.pop() {
            if g != self.nodes[u as usize].g {
                continue;
            }
            let through = g + self.nodes[u as usize].loss;
            let depth = self.nodes[u as usize].depth + 1;
            for k in 0..self.nodes[u as usize].children.len() {
                let c = self.nodes[u as usize].children[k];
                let child = &mut self.nodes[c as usize];
                if through < child.g {
                    child.g = through;
                    child.parent = Some(u);
                    child.depth = depth;
                    heap.push(Reverse((through, c)));
                    if bound.is_some_and(|b| child.g + child.h < b) {
                        self.open.push(c);
                    }
                }
            }
        }
        Ok(match (self.goal_node, goal_before) {
            (Some(goal), Some(before)) => self.nodes[goal as usize].g < before,
            _ => false,
        })
    }

    /// Configurations from the root to `id` along parent links.
    pub fn extract(&self, id: NodeId) -> Result<Solution, SearchError> {
        self.node(id)?;
        let mut steps = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            steps.push(Configuration(self.nodes[c as usize].config.to_vec()));
            if c == self.root {
                break;
            }
            cur = self.nodes[c as usize].parent;
        }
        steps.reverse();
        Ok(Solution::new(steps))
    }

    /// Nodes on the root-to-`id` path, root first.
    pub fn path_nodes(&self, id: NodeId) -> Result<Vec<NodeId>, SearchError> {
        self.node(id)?;
        let mut path = vec![id];
        let mut cur = id;
        while cur != self.root {
            match self.nodes[cur as usize].parent {
                Some(p) => {
                    path.push(p);
                    cur = p;
                }
                None => break,
            }
        }
        path.reverse();
        Ok(path)
    }

    /// One bounded LaCAM* run. `restart`, when given, is pushed on top of the
    /// open stack before searching; otherwise the paused search resumes.
    pub fn run(
        &mut self,
        restart: Option<NodeId>,
        ltm: &Ltm,
        budget: Option<u64>,
        best_sol_cost: Option<u64>,
        deadline: Option<Instant>,
    ) -> Result<RunResult, SearchError> {
        if let Some(r) = restart {
            self.push_open(r)?;
        }
        let (high0, low0) = (self.high_gens, self.low_gens);
        let mut records = Vec::new();
        let reason = 'search: loop {
            let spent = self.high_gens + self.low_gens - high0 - low0;
            if deadline.is_some_and(|d| Instant::now() >= d) {
                break Termination::Deadline;
            }
            let Some(id) = self.open.pop() else {
                break Termination::Exhausted;
            };
            let node = &self.nodes[id as usize];
            if !node.alive {
                continue;
            }
            if Some(id) == self.goal_node {
                if best_sol_cost.is_none_or(|b| node.g < b) {
                    break Termination::Goal;
                }
                continue;
            }
            if best_sol_cost.is_some_and(|b| node.f() >= b) {
                break Termination::Pruned;
            }
            if budget.is_some_and(|b| spent >= b) {
                self.open.push(id);
                break Termination::Bound;
            }
            let Some(constraint) = self.next_constraint(id, ltm)? else {
                continue;
            };
            self.open.push(id);
            let order = priority_order(&self.nodes[id as usize].steps, &self.base);
            let from = self.nodes[id as usize].config.clone();
            let outcome = self.pibt.step(ltm, &mut self.dists, &from, &order, &constraint, &mut self.rng);
            let PibtOutcome::Success { to, mut record } = outcome else {
                continue;
            };
            record.node = Some(id);
            if self.retain_history {
                let rid = self.history.len() as u32;
                self.history.push(Some(record.clone()));
                self.nodes[id as usize].records.push(rid);
            }
            records.push(record);

            if let Some(existing) = self.find(to.as_slice()) {
                if self.relax_g(existing, id)? {
                    break 'search Termination::Improved;
                }
                // occasionally re-insert the root instead, to escape deep dead ends
                let insert = if self.rng.gen::<f64>() < RESTART_RATE { self.root } else { existing };
                let e = &self.nodes[insert as usize];
                if best_sol_cost.is_none_or(|b| e.f() < b) {
                    self.open.push(insert);
                }
            } else {
                if budget.is_some_and(|b| spent + 1 >= b) {
                    break Termination::Bound;
                }
                let parent = &self.nodes[id as usize];
                let steps = successor_steps(&parent.steps, to.as_slice(), &self.goals);
                let (g, depth) = (parent.g + parent.loss, parent.depth + 1);
                let new = self.insert(to.0.into(), Some(id), g, steps, depth);
                self.high_gens += 1;
                self.open.push(new);
            }
        };
        let (solution, cost) = match reason {
            Termination::Goal | Termination::Improved => {
                let goal = self.goal_node.expect("goal node exists");
                (Some(self.extract(goal)?), Some(self.nodes[goal as usize].g))
            }
            _ => (None, None),
        };
        Ok(RunResult {
            solution,
            cost,
            records,
            reason,
            high_level_generations: self.high_gens - high0,
            low_level_generations: self.low_gens - low0,
        })
    }

    /// Makes `new_root` the root: keeps only nodes reachable from it, recomputes
    /// g and parents relative to it, and returns the history records that were
    /// attached to discarded nodes.
    pub fn reroot(&mut self, new_root: NodeId) -> Result<Vec<HistoryRecord>, SearchError> {
        self.node(new_root)?;
        let mut reachable = vec![false; self.nodes.len()];
        let mut stack = vec![new_root];
        reachable[new_root as usize] = true;
        while let Some(u) = stack.pop() {
            for &c in &self.nodes[u as usize].children {
                if self.nodes[c as usize].alive && !reachable[c as usize] {
                    reachable[c as usize] = true;
                    stack.push(c);
                }
            }
        }

        let mut removed = Vec::new();
        for (id, node) in self.nodes.iter_mut().enumerate() {
            if !node.alive {
                continue;
            }
            if reachable[id] {
                node.g = u64::MAX;
                node.children.retain(|&c| reachable[c as usize]);
            } else {
                node.alive = false;
                self.explored.remove(&node.config);
                for &rid in &node.records {
                    if let Some(r) = self.history[rid as usize].take() {
                        removed.push(r);
                    }
                }
                node.records = Vec::new();
                node.children = Vec::new();
                node.steps = Vec::new();
                node.order = None;
                node.lowlevel = VecDeque::new();
            }
        }

        let root = &mut self.nodes[new_root as usize];
        root.g = 0;
        root.parent = None;
        root.depth = 0;
        let mut heap = BinaryHeap::from([Reverse((0u64, new_root))]);
        while let Some(Reverse((g, u))) = heap.pop() {
            if g != self.nodes[u as usize].g {
                continue;
            }
            let through = g + self.nodes[u as usize].loss;
            let depth = self.nodes[u as usize].depth + 1;
            for k in 0..self.nodes[u as usize].children.len() {
                let c = self.nodes[u as usize].children[k];
                let child = &mut self.nodes[c as usize];
                if through < child.g {
                    child.g = through;
                    child.parent = Some(u);
                    child.depth = depth;
                    heap.push(Reverse((through, c)));
                }
            }
        }

        self.root = new_root;
        if self.goal_node.is_some_and(|g| !reachable[g as usize]) {
            self.goal_node = None;
        }
        self.open.retain(|&id| reachable[id as usize]);
        Ok(removed)
    }
}

/// Free-function form of [`SearchTree::run`].
pub fn lacam_run(
    tree: &mut SearchTree,
    restart: Option<NodeId>,
    ltm: &Ltm,
    budget: Option<u64>,
    best_sol_cost: Option<u64>,
    deadline: Option<Instant>,
) -> Result<RunResult, SearchError> {
    tree.run(restart, ltm, budget, best_sol_cost, deadline)
}
