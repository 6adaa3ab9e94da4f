//! Unit-cost shortest-path distances.

use std::collections::VecDeque;

use crate::grid::{Grid, VertexId};

/// Per-vertex BFS distance to one goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistTable {
    goal: VertexId,
    dist: Vec<u32>,
}

impl DistTable {
    pub const UNREACHABLE: u32 = u32::MAX;

    pub fn goal(&self) -> VertexId {
        self.goal
    }

    /// Number of unit moves from `v` to the goal, `None` if unreachable.
    pub fn get(&self, v: VertexId) -> Option<u32> {
        let d = self.dist[v as usize];
        (d != Self::UNREACHABLE).then_some(d)
    }

    /// Raw distance with [`DistTable::UNREACHABLE`] as the sentinel.
    pub fn raw(&self, v: VertexId) -> u32 {
        self.dist[v as usize]
    }
}

/// Breadth-first distances from every vertex to `goal`.
pub fn bfs_dist(grid: &Grid, goal: VertexId) -> DistTable {
    let mut dist = vec![DistTable::UNREACHABLE; grid.num_vertices()];
    let mut queue = VecDeque::new();
    dist[goal as usize] = 0;
    queue.push_back(goal);
    while let Some(v) = queue.pop_front() {
        let d = dist[v as usize] + 1;
        for &u in grid.neighbors(v) {
            if dist[u as usize] == DistTable::UNREACHABLE {
                dist[u as usize] = d;
                queue.push_back(u);
            }
        }
    }
    DistTable { goal, dist }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn open_grid_corner_to_corner() {
        let g = Grid::open(3, 3);
        let goal = g.vertex_at(0, 0).unwrap();
        let t = bfs_dist(&g, goal);
        assert_eq!(t.get(g.vertex_at(2, 2).unwrap()), Some(4));
        assert_eq!(t.get(goal), Some(0));
    }

    #[test]
    fn walled_off_region_is_unreachable() {
        // . @ .
        let g = Grid::from_mask(3, 1, &[true, false, true]);
        let t = bfs_dist(&g, g.vertex_at(0, 0).unwrap());
        assert_eq!(t.get(g.vertex_at(2, 0).unwrap()), None);
    }

    proptest! {
        #[test]
        fn adjacent_distances_differ_by_at_most_one(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
            let mask: Vec<bool> = (0..w * h).map(|i| (seed >> (i % 61)) & 3 != 0).collect();
            let g = Grid::from_mask(w, h, &mask);
            prop_assume!(g.num_vertices() > 0);
            let t = bfs_dist(&g, (seed % g.num_vertices() as u64) as VertexId);
            for v in 0..g.num_vertices() as VertexId {
                for &u in g.neighbors(v) {
                    match (t.get(u), t.get(v)) {
                        (Some(a), Some(b)) => prop_assert!(a.abs_diff(b) <= 1),
                        (None, None) => {}
                        _ => prop_assert!(false, "adjacent vertices in different components"),
                    }
                }
            }
        }
    }
}
