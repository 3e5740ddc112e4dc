"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
appear.  Criterion 5 documents a known blocking analysis (see the README's
note on the rendezvous preset): the rendezvous task with heading-weighted consensus stalls on a
stationary configuration that no gradient-based per-agent update can leave,
so its target threshold is not reachable; the test states the criterion
faithfully and reports the measured plateau.
"""

import time

import numpy as np
import pytest

from optcons import CostSpec, adjoint, scenarios
from optcons.cost import NeighborBundle
from optcons import dynamics as dyn
from optcons.solver import (LocalProblem, SolverConfig, contraction_factor,
                            msa_solve, ocp_solve)

from conftest import conditioned_quadratic, lq_batch_solution, random_instance, random_spd


def report(num, name, ok, detail=""):
    print(f"\n[acceptance] criterion {num} ({name}): "
          f"{'PASS' if ok else 'FAIL'}{' - ' + detail if detail else ''}")
    return ok


# -- criterion 1: adjoint exactness -----------------------------------------

def test_criterion_1_adjoint_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(20240501)
    worst_g, worst_h, worst_sym = 0.0, 0.0, 0.0
    for k in range(50):
        kind = "unicycle" if k % 2 == 0 else "linear_sine"
        problem, u = random_instance(rng, kind)
        traj, lam, g = problem.sweep(u)
        g_fd = adjoint.fd_gradient(problem.i, problem.model, problem.x0, u,
                                   problem.nb, problem.spec)
        worst_g = max(worst_g, np.linalg.norm(g - g_fd) / (1 + np.linalg.norm(g_fd)))
        H = problem.hessian(u, traj, lam)
        H_fd = adjoint.fd_hessian(problem.i, problem.model, problem.x0, u,
                                  problem.nb, problem.spec)
        worst_h = max(worst_h, np.linalg.norm(H - H_fd) / (1 + np.linalg.norm(H_fd)))
        scale = max(np.linalg.norm(H), 1e-300)
        worst_sym = max(worst_sym, np.linalg.norm(H - H.T) / scale)
    elapsed = time.perf_counter() - start
    ok = worst_g < 1e-5 and worst_h < 1e-3 and worst_sym < 1e-8 and elapsed < 30
    assert report(1, "adjoint exactness", ok,
                  f"grad {worst_g:.2e}, hess {worst_h:.2e}, "
                  f"sym {worst_sym:.2e}, {elapsed:.1f}s")


# -- criterion 2: LQ oracle equivalence --------------------------------------

def test_criterion_2_lq_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    p, m, H = 3, 2, 10
    A = rng.normal(size=(p, p)) * 0.4
    B = rng.normal(size=(p, m))
    Q = random_spd(rng, p, floor=0.4)
    R = random_spd(rng, m, floor=0.6)
    D = random_spd(rng, p, floor=0.4)
    x0 = rng.normal(size=p) * 2.0
    spec = CostSpec(Q={(1, 2): Q}, R={1: R}, D={(1, 2): D})
    problem = LocalProblem(1, dyn.linear(A, B), x0,
                           NeighborBundle({2: np.zeros((H + 1, p))}), spec)
    res = ocp_solve(problem, np.zeros((H, m)),
                    SolverConfig(c=1.0, eps_grad=1e-11, max_outer=20))
    u_star = lq_batch_solution(A, B, Q, R, D, x0, H)
    gap = np.abs(res.u.reshape(-1) - u_star).max()
    elapsed = time.perf_counter() - start
    ok = res.converged and res.iterations <= 20 and gap < 1e-8 and elapsed < 1.0
    assert report(2, "LQ oracle equivalence", ok,
                  f"gap {gap:.2e}, {res.iterations} iters, {elapsed:.2f}s")


# -- criterion 3: superlinear rate and MSA comparison -------------------------

def test_criterion_3_superlinear_rate():
    start = time.perf_counter()
    problem, Hmat, u_star = conditioned_quadratic()
    rho = contraction_factor(Hmat, np.eye(2))

    res = ocp_solve(problem, np.zeros((1, 2)),
                    SolverConfig(c=1.0, eps_grad=1e-12, max_outer=40, L_max=100))
    errs = [np.linalg.norm(h - u_star) for h in res.history]
    ratios = [errs[k + 1] / errs[k] for k in range(len(errs) - 1)
              if errs[k] > 1e-10]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    c1 = ratios[1] / rho ** 2
    bounded = all(ratio <= 1.05 * c1 * rho ** (r + 1)
                  for r, ratio in enumerate(ratios))

    cfg = SolverConfig(eps_grad=1e-8, max_outer=20000, L_max=50)
    fast = ocp_solve(problem, np.zeros((1, 2)), cfg)
    slow = msa_solve(problem, np.zeros((1, 2)), cfg)
    ratio = slow.iterations / fast.iterations
    elapsed = time.perf_counter() - start
    ok = (decreasing and bounded and len(ratios) >= 4
          and fast.converged and slow.converged and ratio >= 5.0
          and elapsed < 5.0)
    assert report(3, "superlinear rate", ok,
                  f"rho {rho:.3f}, ratios decreasing={decreasing}, "
                  f"bounded={bounded}, msa/ocp {ratio:.0f}x, {elapsed:.1f}s")


# -- criteria 4 and 5 share one 200-step rendezvous run ----------------------

@pytest.fixture(scope="module")
def rendezvous_run():
    spec = scenarios.load_preset("agv_rendezvous")
    assert spec.mpc.T == 200
    start = time.perf_counter()
    result = scenarios.run_scenario(spec)
    return spec, result, time.perf_counter() - start


def test_criterion_4_window_cost_monotone(rendezvous_run):
    spec, result, elapsed = rendezvous_run
    assert all(np.all(D == 0) for D in spec.cost.D.values())
    wc = result.window_costs
    violations = [(k, wc[k], wc[k + 1]) for k in range(len(wc) - 1)
                  if wc[k + 1] > wc[k] * (1 + 1e-6) + 1e-12]
    ok = not violations and len(wc) == 200 and elapsed < 60
    assert report(4, "window cost monotonicity", ok,
                  f"{len(violations)} violations over 200 steps, {elapsed:.1f}s")


def test_criterion_5_rendezvous_position_errors(rendezvous_run):
    spec, result, elapsed = rendezvous_run
    per_step_max = result.max_errors  # mask [0, 1]: position components
    settled = scenarios.steps_to_threshold(per_step_max, 0.05)
    ok = settled is not None and settled <= 200 and elapsed < 60
    report(5, "rendezvous position errors", ok,
           f"settle step {settled}, plateau {per_step_max[-1]:.3f} "
           f"(known blocker: heading-locked stationary configuration; "
           f"see README), {elapsed:.1f}s")
    assert ok, (
        "position errors plateau at "
        f"{per_step_max[-1]:.3f} > 0.05: stationary configuration of the "
        "per-agent subproblems (verified globally optimal per window); "
        "unreachable threshold with the printed weights")


# -- criterion 6: leader-follower tracking ------------------------------------

def test_criterion_6_leader_follower_tracking():
    start = time.perf_counter()
    spec = scenarios.load_preset("leader_follower")
    result = scenarios.run_scenario(spec)
    xl = result.leader_states
    settle_all = 0
    stays = True
    for i in sorted(result.states):
        e1 = np.abs(result.states[i][:, 0] - xl[:, 0])
        e2 = np.abs(result.states[i][:, 1] - xl[:, 1])
        bad = np.nonzero((e1 > 0.016) | (e2 > 0.04))[0]
        settle = int(bad[-1]) + 1 if bad.size else 0
        if settle >= len(e1):
            stays = False
        settle_all = max(settle_all, settle)
    elapsed = time.perf_counter() - start
    ok = stays and settle_all <= 30 and elapsed < 30
    assert report(6, "leader-follower tracking", ok,
                  f"all settle by step {settle_all} (budget 30), {elapsed:.1f}s")


# -- criterion 7: unified-framework reduction ---------------------------------

def test_criterion_7_unified_reduction():
    from optcons.coordinator import run_mpc_leaderless, run_mpc_leader_follower
    from optcons.graph import Topology
    start = time.perf_counter()
    top = Topology.from_edge_list(3, [[1, 2, 1.0], [2, 3, 1.0], [3, 1, 1.0],
                                      [2, 1, 1.0], [3, 2, 1.0], [1, 3, 1.0]])
    spec = CostSpec.uniform(top, p=2, q=2.0, r=1.0, control_dims={i: 2 for i in (1, 2, 3)})
    models = {i: dyn.linear(np.array([[1.0, 0.1], [0.0, 1.0]]), np.eye(2))
              for i in (1, 2, 3)}
    states = {1: [1.0, 0.0], 2: [-1.0, 0.5], 3: [0.0, -0.5]}
    from optcons.coordinator import MpcConfig
    mpc = MpcConfig(N_p=5, T=12)
    cfg = SolverConfig(stop="step", eps_step=1e-8)
    a = run_mpc_leaderless(top, models, spec, cfg, mpc, states, seed=1)
    b = run_mpc_leader_follower(top, models, None, spec, cfg, mpc, states,
                                None, seed=1)
    same = (all(np.array_equal(a.states[i], b.states[i]) for i in a.states)
            and all(np.array_equal(a.controls[i], b.controls[i]) for i in a.controls)
            and np.array_equal(a.window_costs, b.window_costs)
            and np.array_equal(a.max_errors, b.max_errors)
            and np.array_equal(a.rounds, b.rounds)
            and a.leader_states is None and b.leader_states is None)
    elapsed = time.perf_counter() - start
    ok = same and elapsed < 10
    assert report(7, "unified-framework reduction", ok,
                  f"bit-exact={same}, {elapsed:.1f}s")


# -- criterion 8: scaling argmin invariance -----------------------------------

def test_criterion_8_scaling_invariance():
    # Short run so the final window cost stays macroscopic; a relative
    # comparison on a fully-converged (near-zero) cost would be vacuous.
    start = time.perf_counter()
    base = {
        "name": "scale_check",
        "topology": {"n": 2, "edges": [[1, 2, 1.0], [2, 1, 1.0]]},
        "models": {"default": {"type": "linear", "A": [[1.0]], "B": [[1.0]]}},
        "cost": {"Q": 1.0, "R": 1.0, "D": 0.5},
        "solver": {"eps": 1e-10, "max_outer": 200},
        "mpc": {"N_p": 3, "T": 4},
        "initial_states": {"1": [3.0], "2": [-2.0]},
    }
    scaled = dict(base, cost={"Q": 10.0, "R": 10.0, "D": 5.0})
    res1 = scenarios.run_scenario(scenarios.load_scenario(base))
    res10 = scenarios.run_scenario(scenarios.load_scenario(scaled))
    final1, final10 = res1.window_costs[-1], res10.window_costs[-1]
    assert final1 > 1e-4  # comparison is meaningful
    cost_rel = abs(final10 - 10.0 * final1) / (10.0 * final1)
    ctrl_gap = max(np.abs(res10.controls[i] - res1.controls[i]).max()
                   for i in res1.controls)
    elapsed = time.perf_counter() - start
    ok = cost_rel < 1e-9 and ctrl_gap < 1e-6 and elapsed < 10
    assert report(8, "scaling argmin invariance", ok,
                  f"final cost rel {cost_rel:.2e}, control gap {ctrl_gap:.2e}, "
                  f"{elapsed:.1f}s")


# -- criterion 9: determinism and scheduling independence ---------------------

def test_criterion_9_scheduling_independence(tmp_path):
    start = time.perf_counter()
    spec = scenarios.load_preset(
        "leader_follower", overrides=["mpc.T=8", "mpc.drop_probability=0.3"])
    blobs = {}
    for executor in (None, "thread"):
        result = scenarios.run_scenario(spec, executor=executor)
        arts = scenarios.emit_results(result, spec, tmp_path / str(executor))
        blobs[executor] = tuple(
            open(p, "rb").read() for p in (arts.trajectories_csv,
                                           arts.errors_csv, arts.metrics_json,
                                           arts.config_json))
    same = blobs[None] == blobs["thread"]
    elapsed = time.perf_counter() - start
    ok = same and elapsed < 30
    assert report(9, "scheduling independence", ok,
                  f"artifact bytes identical={same}, {elapsed:.1f}s")
