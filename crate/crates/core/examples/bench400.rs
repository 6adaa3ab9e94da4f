use std::sync::Arc;
use mapf_ltm::bench::{random_grid, random_instance};
use mapf_ltm::{solve_oneshot, SolveConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(400, |s| s.parse().unwrap());
    let t: f64 = args.get(2).map_or(10.0, |s| s.parse().unwrap());
    let seed: u64 = args.get(3).map_or(0, |s| s.parse().unwrap());
    let g = Arc::new(random_grid(32, 32, 0.2, 0));
    let inst = random_instance(g, n, seed);
    for disable in [false, true] {
        let cfg = SolveConfig { time_limit: t, disable_ltm: disable, seed, ..SolveConfig::default() };
        let r = solve_oneshot(&inst, &cfg).unwrap();
        println!("disable={disable} sol={:?} events={} iters={} first={:?} stop={:?}",
            r.sol, r.events.len(), r.iterations.len(), r.events.first(), r.stop);
    }
}
