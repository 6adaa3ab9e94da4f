//! One-step configuration generator: PIBT with priority inheritance,
//! backtracking, position constraints, the swap operator and traffic recording.

use std::sync::Arc;

use rand::Rng;

use crate::grid::{Grid, VertexId};
use crate::instance::{Configuration, Instance};
use crate::traffic::{AgentDistances, BlockedAction, Cost, HistoryRecord, Ltm};

const NONE: u32 = u32::MAX;

/// Pins `(agent, vertex)` that PIBT must honor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PositionConstraint {
    pub pins: Vec<(u32, VertexId)>,
}

impl PositionConstraint {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pins.is_empty()
    }

    /// A copy extended by one more pin.
    pub fn with(&self, agent: u32, v: VertexId) -> Self {
        let mut pins = Vec::with_capacity(self.pins.len() + 1);
        pins.extend_from_slice(&self.pins);
        pins.push((agent, v));
        PositionConstraint { pins }
    }
}

/// Agent priorities: steps spent away from the goal, then the base distance,
/// then agent id (lower id first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityState {
    pub base: Vec<Cost>,
    pub steps: Vec<u32>,
}

impl PriorityState {
    /// Root priorities from traffic-map distances of `config`.
    pub fn root(ltm: &Ltm, dists: &mut AgentDistances, config: &[VertexId]) -> Self {
        let base = config.iter().enumerate().map(|(i, &v)| dists.get(ltm, i, v)).collect();
        PriorityState { base, steps: vec![0; config.len()] }
    }

    /// Priorities after moving to `to`: +1 for agents away from their goal, reset otherwise.
    pub fn successor(&self, to: &[VertexId], goals: &[VertexId]) -> Self {
        PriorityState { base: self.base.clone(), steps: successor_steps(&self.steps, to, goals) }
    }

    /// Agents in descending priority.
    pub fn order(&self) -> Vec<u32> {
        priority_order(&self.steps, &self.base)
    }
}

pub(crate) fn successor_steps(steps: &[u32], to: &[VertexId], goals: &[VertexId]) -> Vec<u32> {
    steps
        .iter()
        .zip(to.iter().zip(goals))
        .map(|(&s, (&v, &g))| if v == g { 0 } else { s.saturating_add(1) })
        .collect()
}

pub(crate) fn priority_order(steps: &[u32], base: &[Cost]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..steps.len() as u32).collect();
    order.sort_by(|&i, &j| {
        let (i, j) = (i as usize, j as usize);
        (steps[j], base[j]).cmp(&(steps[i], base[i])).then(i.cmp(&j))
    });
    order
}

/// Outcome of one PIBT call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PibtOutcome {
    Success { to: Configuration, record: HistoryRecord },
    Failure,
}

/// Reusable PIBT scratch space for one instance.
#[derive(Debug, Clone)]
pub struct Pibt {
    grid: Arc<Grid>,
    goals: Vec<VertexId>,
    occupied_now: Vec<u32>,
    occupied_next: Vec<u32>,
    now: Vec<VertexId>,
    next: Vec<u32>,
    /// Sorted candidates per agent for the current call.
    cands: Vec<Vec<VertexId>>,
}

struct Eval<'a> {
    ltm: &'a Ltm,
    dists: &'a mut AgentDistances,
}

impl Eval<'_> {
    fn f(&mut self, agent: usize, v: VertexId) -> Cost {
        self.dists.get(self.ltm, agent, v)
    }
}

impl Pibt {
    pub fn new(instance: &Instance) -> Self {
        let n = instance.num_agents();
        let nv = instance.grid().num_vertices();
        Pibt {
            grid: instance.grid_arc().clone(),
            goals: instance.goals().0.clone(),
            occupied_now: vec![NONE; nv],
            occupied_next: vec![NONE; nv],
            now: vec![NONE; n],
            next: vec![NONE; n],
            cands: vec![Vec::with_capacity(5); n],
        }
    }

    fn reset(&mut self, from: &[VertexId]) {
        for i in 0..self.now.len() {
            if self.now[i] != NONE && self.occupied_now[self.now[i] as usize] == i as u32 {
                self.occupied_now[self.now[i] as usize] = NONE;
            }
            if self.next[i] != NONE {
                self.occupied_next[self.next[i] as usize] = NONE;
                self.next[i] = NONE;
            }
        }
        for (i, &v) in from.iter().enumerate() {
            self.now[i] = v;
            self.occupied_now[v as usize] = i as u32;
        }
    }

    /// Generates one successor of `from`, agents processed in `order`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        ltm: &Ltm,
        dists: &mut AgentDistances,
        from: &[VertexId],
        order: &[u32],
        constraint: &PositionConstraint,
        rng: &mut R,
    ) -> PibtOutcome {
        self.reset(from);
        for &(i, v) in &constraint.pins {
            if self.occupied_next[v as usize] != NONE {
                return PibtOutcome::Failure;
            }
            let pre = from[i as usize];
            let mover = self.occupied_next[pre as usize];
            if mover != NONE && mover == self.occupied_now[v as usize] {
                return PibtOutcome::Failure;
            }
            self.next[i as usize] = v;
            self.occupied_next[v as usize] = i;
        }
        let mut ev = Eval { ltm, dists };
        for &k in order {
            if self.next[k as usize] == NONE && !self.plan(&mut ev, rng, k as usize) {
                return PibtOutcome::Failure;
            }
        }
        let to = Configuration(self.next.clone());
        let record = self.record(&mut ev, from, &to);
        PibtOutcome::Success { to, record }
    }

    fn record(&self, ev: &mut Eval<'_>, from: &[VertexId], to: &Configuration) -> HistoryRecord {
        let n = from.len();
        let mut committed = Vec::with_capacity(n);
        let mut at_goal = Vec::with_capacity(n);
        let mut blocked = Vec::new();
        for i in 0..n {
            let (v, w) = (from[i], to[i]);
            committed.push((v, w));
            at_goal.push(v == self.goals[i]);
            let f_to = ev.f(i, w);
            for &u in self.grid.neighbors(v).iter().chain(std::iter::once(&v)) {
                if u != w && ev.f(i, u) < f_to {
                    blocked.push(BlockedAction { agent: i as u32, from: v, to: u });
                }
            }
        }
        HistoryRecord { node: None, committed, at_goal, blocked }
    }

    fn sort_candidates<R: Rng + ?Sized>(&mut self, ev: &mut Eval<'_>, rng: &mut R, i: usize) {
        let v = self.now[i];
        let mut keyed: Vec<(Cost, u64, VertexId)> = self
            .grid
            .neighbors(v)
            .iter()
            .chain(std::iter::once(&v))
            .map(|&u| (ev.f(i, u), rng.gen::<u64>(), u))
            .collect();
        keyed.sort_unstable();
        let c = &mut self.cands[i];
        c.clear();
        c.extend(keyed.into_iter().map(|(_, _, u)| u));
    }

    fn plan<R: Rng + ?Sized>(&mut self, ev: &mut Eval<'_>, rng: &mut R, i: usize) -> bool {
        let v_now = self.now[i];
        self.sort_candidates(ev, rng, i);
        let swap_agent = self.swap_partner(ev, i, self.cands[i][0]);
        if swap_agent.is_some() {
            self.cands[i].reverse();
        }
        for k in 0..self.cands[i].len() {
            let u = self.cands[i][k];
            if self.occupied_next[u as usize] != NONE {
                continue;
            }
            let ak = self.occupied_now[u as usize];
            if ak != NONE && self.next[ak as usize] == v_now {
                continue;
            }
            self.occupied_next[u as usize] = i as u32;
            self.next[i] = u;
            if ak != NONE
                && ak as usize != i
                && self.next[ak as usize] == NONE
                && !self.plan(ev, rng, ak as usize)
            {
                continue;
            }
            if k == 0 {
                if let Some(sa) = swap_agent {
                    if self.next[sa] == NONE && self.occupied_next[v_now as usize] == NONE {
                        self.next[sa] = v_now;
                        self.occupied_next[v_now as usize] = sa as u32;
                    }
                }
            }
            return true;
        }
        self.occupied_next[v_now as usize] = i as u32;
        self.next[i] = v_now;
        false
    }

    /// Agent to pull along when `i` needs to swap places through a narrow passage.
    fn swap_partner(&self, ev: &mut Eval<'_>, i: usize, best: VertexId) -> Option<usize> {
        let v_now = self.now[i];
        if best == v_now {
            return None;
        }
        // direct head-on situation
        let aj = self.occupied_now[best as usize];
        if aj != NONE
            && self.next[aj as usize] == NONE
            && self.is_swap_required(ev, i, aj as usize, v_now, self.now[aj as usize])
            && self.is_swap_possible(self.now[aj as usize], v_now)
        {
            return Some(aj as usize);
        }
        // clearing the way for a neighbor behind
        for &u in self.grid.neighbors(v_now) {
            let ak = self.occupied_now[u as usize];
            if ak == NONE || best == self.now[ak as usize] {
                continue;
            }
            if self.is_swap_required(ev, ak as usize, i, v_now, best)
                && self.is_swap_possible(best, v_now)
            {
                return Some(ak as usize);
            }
        }
        None
    }

    fn pull_options(&self, v_puller: VertexId, v_pusher: VertexId) -> (usize, Option<VertexId>) {
        let mut n = self.grid.degree(v_puller);
        let mut tmp = None;
        for &u in self.grid.neighbors(v_puller) {
            let a = self.occupied_now[u as usize];
            if u == v_pusher || (self.grid.degree(u) == 1 && a != NONE && self.goals[a as usize] == u) {
                n -= 1;
            } else {
                tmp = Some(u);
            }
        }
        (n, tmp)
    }

    /// Simulates the pusher driving the puller along a corridor; a swap is
    /// required when no branching point lets them pass each other.
    fn is_swap_required(
        &self,
        ev: &mut Eval<'_>,
        pusher: usize,
        puller: usize,
        pusher_origin: VertexId,
        puller_origin: VertexId,
    ) -> bool {
        let mut v_pusher = pusher_origin;
        let mut v_puller = puller_origin;
        while ev.f(pusher, v_puller) < ev.f(pusher, v_pusher) {
            let (n, tmp) = self.pull_options(v_puller, v_pusher);
            if n >= 2 {
                return false;
            }
            let Some(next) = tmp.filter(|_| n > 0) else {
                break;
            };
            v_pusher = v_puller;
            v_puller = next;
        }
        ev.f(puller, v_pusher) < ev.f(puller, v_puller)
            && (ev.f(pusher, v_pusher) == Cost::ZERO || ev.f(pusher, v_puller) < ev.f(pusher, v_pusher))
    }

    /// Simulates pulling back until a vertex with room for both agents is found.
    fn is_swap_possible(&self, pusher_origin: VertexId, puller_origin: VertexId) -> bool {
        let mut v_pusher = pusher_origin;
        let mut v_puller = puller_origin;
        while v_puller != pusher_origin {
            let (n, tmp) = self.pull_options(v_puller, v_pusher);
            if n >= 2 {
                return true;
            }
            let Some(next) = tmp.filter(|_| n > 0) else {
                return false;
            };
            v_pusher = v_puller;
            v_puller = next;
        }
        false
    }
}

/// Runs one PIBT step from scratch. See [`Pibt::step`] for the reusable form.
pub fn pibt_step<R: Rng + ?Sized>(
    instance: &Instance,
    ltm: &Ltm,
    dists: &mut AgentDistances,
    from: &Configuration,
    prio: &PriorityState,
    constraints: &PositionConstraint,
    rng: &mut R,
) -> PibtOutcome {
    let mut pibt = Pibt::new(instance);
    pibt.step(ltm, dists, from.as_slice(), &prio.order(), constraints, rng)
}

/// Candidate ordering for `agent` when the swap rule fires, reversed so the
/// agent retreats; `None` when no swap pattern is present.
pub fn swap_assist(
    instance: &Instance,
    ltm: &Ltm,
    dists: &mut AgentDistances,
    from: &Configuration,
    agent: usize,
) -> Option<Vec<VertexId>> {
    let mut pibt = Pibt::new(instance);
    pibt.reset(from.as_slice());
    let mut ev = Eval { ltm, dists };
    let v = from[agent];
    let mut cands: Vec<VertexId> = instance.grid().neighbors(v).iter().copied().chain([v]).collect();
    cands.sort_by_key(|&u| (ev.f(agent, u), u));
    pibt.swap_partner(&mut ev, agent, cands[0])?;
    cands.reverse();
    Some(cands)
}
