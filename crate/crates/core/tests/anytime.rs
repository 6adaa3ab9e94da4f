mod common;

use std::sync::Arc;

use mapf_ltm::anytime::{PeStatus, StopReason};
use mapf_ltm::{solve_oneshot, solve_pe, validate_solution, Grid, Instance, Mode, SolveConfig};

#[test]
fn two_agents_on_open_4x4_reach_the_optimum() {
    let g = Arc::new(Grid::open(4, 4));
    let cases = [
        [((0, 0), (3, 3)), ((3, 3), (0, 0))],
        [((0, 1), (3, 1)), ((3, 1), (0, 1))],
        [((1, 1), (2, 1)), ((2, 1), (1, 1))],
    ];
    for agents in cases {
        let inst = Instance::from_coords(g.clone(), &agents).unwrap();
        let opt = common::joint_optimum(&inst).unwrap();
        let r = solve_oneshot(&inst, &SolveConfig { time_limit: 30.0, ..SolveConfig::default() }).unwrap();
        assert_eq!(r.sol, Some(opt), "{agents:?}");
        assert_ne!(r.stop, StopReason::TimeLimit);
        assert!(validate_solution(&inst, r.solution.as_ref().unwrap()).ok);
    }
}

#[test]
fn restart_strategies_all_converge_on_tiny_instances() {
    use mapf_ltm::RestartStrategy::*;
    let g = Arc::new(Grid::from_mask(5, 2, &[true, true, true, true, true, false, true, false, false, false]));
    let inst = Instance::from_coords(g, &[((0, 0), (4, 0)), ((4, 0), (0, 0))]).unwrap();
    let opt = common::joint_optimum(&inst).unwrap();
    for strategy in [Root, NearGoal, Resume] {
        for disable_ltm in [false, true] {
            let cfg = SolveConfig { time_limit: 30.0, restart: Some(strategy), disable_ltm, ..SolveConfig::default() };
            let r = solve_oneshot(&inst, &cfg).unwrap();
            assert_eq!(r.sol, Some(opt), "{strategy:?} disable_ltm={disable_ltm}");
        }
    }
}

#[test]
fn disabled_traffic_map_stays_uniform() {
    let g = Arc::new(Grid::open(5, 5));
    let inst = Instance::from_coords(g, &[((0, 0), (4, 4)), ((4, 4), (0, 0)), ((0, 4), (4, 0))]).unwrap();
    let r = solve_oneshot(&inst, &SolveConfig { time_limit: 0.5, disable_ltm: true, ..SolveConfig::default() }).unwrap();
    assert!(r.ltm.raw_counts().iter().all(|&c| c == 0));
    assert!(r.iterations.iter().all(|it| it.budget.is_none()));
}

#[test]
fn starved_first_window_commits_waits() {
    let g = Arc::new(Grid::open(6, 6));
    let inst = Instance::from_coords(g, &[((0, 0), (5, 5)), ((5, 5), (0, 0)), ((0, 5), (5, 0))]).unwrap();
    for x in [5, 10] {
        let cfg = SolveConfig {
            mode: Mode::Pe,
            exec_time: 0.01,
            commit: x,
            first_window_generation_cap: Some(1),
            ..SolveConfig::default()
        };
        let trace = solve_pe(&inst, &cfg).unwrap();
        assert_eq!(trace.status, PeStatus::Solved);
        assert!(trace.windows[0].waited);
        assert!(trace.committed[..=x].iter().all(|c| c == inst.starts()));
        assert!(validate_solution(&inst, &trace.solution()).ok);
        // waiting costs one unit per agent per step for the first X steps
        let unstarved = solve_pe(&inst, &SolveConfig { first_window_generation_cap: None, ..cfg.clone() }).unwrap();
        assert!(trace.metrics.unwrap().sol >= unstarved.metrics.unwrap().sol);
        assert!(trace.metrics.unwrap().sol >= (3 * x) as u64);
    }
}

#[test]
fn wall_cap_reports_failure() {
    let g = Arc::new(Grid::open(2, 1));
    let inst = Instance::from_coords(g, &[((0, 0), (1, 0)), ((1, 0), (0, 0))]).unwrap();
    let cfg = SolveConfig { mode: Mode::Pe, exec_time: 0.01, commit: 1, max_wall: Some(0.2), ..SolveConfig::default() };
    let trace = solve_pe(&inst, &cfg).unwrap();
    assert!(matches!(trace.status, PeStatus::WallCapExceeded | PeStatus::Unsolvable));
    assert!(trace.metrics.is_none());
}
