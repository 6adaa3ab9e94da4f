//! Seeded random maps and scenarios for experiments and tests.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, VertexId};
use crate::instance::Instance;

/// A `width`×`height` grid with roughly `obstacle_ratio` blocked cells,
/// keeping only the largest 4-connected open region.
pub fn random_grid(width: usize, height: usize, obstacle_ratio: f64, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = width * height;
    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(&mut rng);
    let mut mask = vec![true; cells];
    let blocked = ((cells as f64) * obstacle_ratio).round() as usize;
    for &c in order.iter().take(blocked.min(cells.saturating_sub(1))) {
        mask[c] = false;
    }

    let mut comp = vec![usize::MAX; cells];
    let mut best = (0, 0);
    let mut label = 0;
    for s in 0..cells {
        if !mask[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut size = 0;
        let mut queue = VecDeque::from([s]);
        comp[s] = label;
        while let Some(c) = queue.pop_front() {
            size += 1;
            let (x, y) = (c % width, c / width);
            let nbrs = [
                (x > 0).then(|| c - 1),
                (x + 1 < width).then(|| c + 1),
                (y > 0).then(|| c - width),
                (y + 1 < height).then(|| c + width),
            ];
            for n in nbrs.into_iter().flatten() {
                if mask[n] && comp[n] == usize::MAX {
                    comp[n] = label;
                    queue.push_back(n);
                }
            }
        }
        if size > best.0 {
            best = (size, label);
        }
        label += 1;
    }
    for c in 0..cells {
        mask[c] = mask[c] && comp[c] == best.1;
    }
    Grid::from_mask(width, height, &mask)
}

/// `n` agents with distinct random starts and distinct random goals.
/// Panics if the grid has fewer than `n` vertices.
pub fn random_instance(grid: Arc<Grid>, n: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<VertexId> = (0..grid.num_vertices() as VertexId).collect();
    assert!(n <= vertices.len(), "not enough free cells for {n} agents");
    let starts: Vec<VertexId> = vertices.choose_multiple(&mut rng, n).copied().collect();
    let mut goals: Vec<VertexId> = vertices.choose_multiple(&mut rng, n).copied().collect();
    goals.shuffle(&mut rng);
    Instance::new(grid, starts, goals).expect("single connected component")
}

/// Renders an instance as a MovingAI `.scen` file for `map_name`.
pub fn scen_text(instance: &Instance, map_name: &str) -> String {
    let g = instance.grid();
    let bfs = instance.dist_tables();
    let mut out = String::from("version 1\n");
    for (i, table) in bfs.iter().enumerate() {
        let (sx, sy) = g.coord(instance.starts()[i]);
        let (gx, gy) = g.coord(instance.goals()[i]);
        let d = table.raw(instance.starts()[i]);
        out.push_str(&format!(
            "0\t{map_name}\t{}\t{}\t{sx}\t{sy}\t{gx}\t{gy}\t{d}\n",
            g.width(),
            g.height()
        ));
    }
    out
}
