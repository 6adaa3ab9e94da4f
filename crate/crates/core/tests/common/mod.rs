//! Reference computations written without the solver's code paths.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use mapf_ltm::{Grid, Instance, Ltm};

/// 4-neighbours of cell `(x, y)` that are free.
fn free_neighbors(grid: &Grid, v: u32) -> Vec<u32> {
    let (x, y) = grid.coord(v);
    let mut out = Vec::new();
    let cand = [
        (x.wrapping_sub(1), y),
        (x + 1, y),
        (x, y.wrapping_sub(1)),
        (x, y + 1),
    ];
    for (cx, cy) in cand {
        if let Some(u) = grid.vertex_at(cx, cy) {
            out.push(u);
        }
    }
    out
}

/// Optimal sum-of-loss by Dijkstra over joint configurations. A step costs the
/// number of agents away from their goals before the step.
pub fn joint_optimum(inst: &Instance) -> Option<u64> {
    let grid = inst.grid();
    let n = inst.num_agents();
    let starts: Vec<u32> = inst.starts().0.clone();
    let goals: Vec<u32> = inst.goals().0.clone();
    let mut dist: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(starts.clone(), 0);
    heap.push(Reverse((0u64, starts)));
    while let Some(Reverse((d, cur))) = heap.pop() {
        if dist.get(&cur) != Some(&d) {
            continue;
        }
        if cur == goals {
            return Some(d);
        }
        let step = cur.iter().zip(&goals).filter(|(a, b)| a != b).count() as u64;
        let options: Vec<Vec<u32>> = cur
            .iter()
            .map(|&v| {
                let mut o = free_neighbors(grid, v);
                o.push(v);
                o
            })
            .collect();
        let mut idx = vec![0usize; n];
        'product: loop {
            let next: Vec<u32> = (0..n).map(|i| options[i][idx[i]]).collect();
            let mut ok = true;
            for i in 0..n {
                for j in i + 1..n {
                    if next[i] == next[j] || (next[i] == cur[j] && next[j] == cur[i]) {
                        ok = false;
                    }
                }
            }
            if ok {
                let nd = d + step;
                if dist.get(&next).is_none_or(|&old| nd < old) {
                    dist.insert(next.clone(), nd);
                    heap.push(Reverse((nd, next)));
                }
            }
            for i in 0..n {
                idx[i] += 1;
                if idx[i] < options[i].len() {
                    continue 'product;
                }
                idx[i] = 0;
            }
            break;
        }
    }
    None
}

/// Distances to `goal` on the weighted map, by plain Dijkstra from the goal
/// over reversed edges. Units of 1e-9.
pub fn weighted_distances(ltm: &Ltm, goal: u32) -> Vec<Option<u64>> {
    let grid = ltm.grid();
    let mut dist = vec![None; grid.num_vertices()];
    let mut heap = BinaryHeap::from([Reverse((0u64, goal))]);
    dist[goal as usize] = Some(0);
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u as usize] != Some(d) {
            continue;
        }
        for p in free_neighbors(grid, u) {
            let w = ltm.edge_cost(p, u).unwrap().0;
            if dist[p as usize].is_none_or(|old| d + w < old) {
                dist[p as usize] = Some(d + w);
                heap.push(Reverse((d + w, p)));
            }
        }
    }
    dist
}

/// Raw counts implied by a list of records: moves count on their edge, waits
/// away from the goal on every outgoing edge.
pub fn expected_raw(grid: &Grid, records: &[mapf_ltm::HistoryRecord]) -> Vec<u64> {
    let mut raw = vec![0u64; grid.num_directed_edges()];
    for r in records {
        let mut bump = |agent: usize, from: u32, to: u32| {
            if from == to {
                if !r.at_goal[agent] {
                    for u in free_neighbors(grid, from) {
                        raw[grid.edge_index(from, u).unwrap()] += 1;
                    }
                }
            } else {
                raw[grid.edge_index(from, to).unwrap()] += 1;
            }
        };
        for (i, &(from, to)) in r.committed.iter().enumerate() {
            bump(i, from, to);
        }
        for b in &r.blocked {
            bump(b.agent as usize, b.from, b.to);
        }
    }
    raw
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
