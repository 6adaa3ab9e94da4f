"""Smoke test for the mapf_ltm_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import os

import mapf_ltm_py as m

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures")


def corridor():
    grid = m.Grid.open(3, 1)
    inst = m.Instance(grid, [((0, 0), (2, 0))])
    r = m.solve(inst, time_limit=1.0)
    assert r.sol == 2, r
    assert r.stop in ("lower_bound", "exhausted"), r.stop
    assert r.paths == [[(0, 0), (1, 0), (2, 0)]]
    assert inst.validate(r.paths) == (True, None)
    assert inst.sum_of_loss(r.paths) == 2


def room():
    grid = m.Grid.load(os.path.join(FIXTURES, "room.map"))
    inst = m.Instance.load(grid, os.path.join(FIXTURES, "room.scen"), 6)
    lb = inst.sol_lower_bound()

    r = m.solve(inst, time_limit=0.5, seed=3)
    assert r.paths is not None
    ok, why = inst.validate(r.paths)
    assert ok, why
    assert r.sol >= lb
    sols = [e[1] for e in r.events]
    assert sols == sorted(sols, reverse=True) and len(set(sols)) == len(sols)
    assert r.traffic.max_raw >= 0
    assert all(0.0 <= p <= 10.0 for *_, p in r.traffic.edges())

    base = m.solve(inst, time_limit=0.5, seed=3, disable_ltm=True)
    assert base.traffic.max_raw == 0

    t = m.solve_pe(inst, exec_time=0.01, commit=5)
    assert t.status == "solved", t
    ok, why = inst.validate(t.paths)
    assert ok, why
    print(f"room: oneshot sol={r.sol} lb={lb} stop={r.stop}; pe sol={t.sol} windows={t.windows}")


def errors():
    grid = m.Grid.open(2, 2)
    for bad in (
        lambda: m.Instance(grid, [((0, 0), (5, 5))]),
        lambda: m.solve(m.Instance(grid, [((0, 0), (1, 1))]), w_lb=5.0, w_ub=1.0),
        lambda: m.solve(m.Instance(grid, [((0, 0), (1, 1))]), restart="sideways"),
    ):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")


if __name__ == "__main__":
    corridor()
    room()
    errors()
    print("python smoke test passed")
