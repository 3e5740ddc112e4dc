"""Synchronous round protocol: trajectory exchange, per-agent updates, and
the receding-horizon closed loop for leaderless and leader-follower runs.

Within a round every agent rolls out its current window controls,
broadcasts the predicted trajectory to its listeners, receives its
neighbors' (and possibly the leader's) predictions, and performs one
accelerated update on its own window.  Rounds repeat until every agent's
control change falls under tolerance, then the first control of each
window is applied and the horizon shifts.

All cross-agent data flows through immutable RoundMessage snapshots
collected at a barrier, so per-agent solves may run sequentially or on a
thread pool with bit-identical results.  Message-drop injection (for the
disturbance experiments) draws its Bernoulli stream in a fixed order from
a dedicated generator, keeping runs reproducible and schedule-independent;
a dropped message makes the receiver reuse the sender's last delivered
trajectory.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from .cost import CostSpec, NeighborBundle, global_cost
from .errors import ConfigError
from .graph import (LEADER, Topology, neighbors, require_spanning_tree,
                    require_strongly_connected)
from .solver import (SolverConfig, LocalProblem, backtrack_step,
                     ocp_direction, regularize)
from . import adjoint


@dataclass(frozen=True)
class RoundMessage:
    """One trajectory broadcast: immutable once emitted."""

    sender: int
    r: int
    t_k: int
    payload: np.ndarray

    def __post_init__(self):
        self.payload.setflags(write=False)


@dataclass(frozen=True)
class MpcConfig:
    N_p: int
    T: int
    warm_start: bool = True
    drop_probability: float = 0.0

    def __post_init__(self):
        if self.N_p < 1:
            raise ValueError(f"prediction horizon must be >= 1, got {self.N_p}")
        if self.T < 1:
            raise ValueError(f"closed-loop length must be >= 1, got {self.T}")
        if not 0.0 <= self.drop_probability < 1.0:
            raise ValueError(
                f"drop probability must lie in [0, 1), got {self.drop_probability}")


@dataclass
class RunResult:
    """Closed-loop history of one receding-horizon run."""

    states: dict
    controls: dict
    leader_states: np.ndarray | None
    edge_errors: list
    max_errors: np.ndarray
    window_costs: np.ndarray
    rounds: np.ndarray
    converged: np.ndarray


@dataclass
class FiniteHorizonResult:
    """Output of the one-shot (non-MPC) round loop."""

    controls: dict
    trajectories: dict
    leader_trajectory: np.ndarray | None
    rounds: int
    converged: bool
    grad_norms: np.ndarray
    global_costs: list


def consensus_error(states: dict, topology: Topology, offsets: dict | None = None,
                    mask=None, leader_state=None) -> tuple[dict, float]:
    """Offset-corrected disagreement per directed edge (and per leader link).

    Returns ({"i-j": error, ..., "i-l": error, ...}, max over entries);
    ``mask`` restricts the norm to the given state components.
    """
    offsets = offsets or {}

    def shifted(idx, x):
        d = offsets.get(idx)
        z = np.asarray(x, dtype=float) if d is None else np.asarray(x, dtype=float) - d
        return z if mask is None else z[list(mask)]

    errors = {}
    for (i, j) in sorted(topology.edges):
        errors[f"{i}-{j}"] = float(np.linalg.norm(shifted(i, states[i]) - shifted(j, states[j])))
    if leader_state is not None:
        zl = shifted(LEADER, leader_state)
        for i in sorted(topology.leader_links):
            errors[f"{i}-l"] = float(np.linalg.norm(shifted(i, states[i]) - zl))
    return errors, (max(errors.values()) if errors else 0.0)


def _agent_round_update(i, model, x_i, u_i, nb, spec, cfg, r, k0, msa_eta):
    """One update of agent i's window; returns (u_new, step_norm, eta)."""
    problem = LocalProblem(i, model, x_i, nb, spec, mode="auto", k0=k0)
    traj = problem.rollout(u_i)
    lam = adjoint.costate_sweep(i, model, traj, u_i, nb, spec, mode="auto", k0=k0)
    g = adjoint.gradient(i, model, traj, u_i, lam, spec, k0=k0)
    H, m = u_i.shape
    if cfg.method == "msa":
        taken = backtrack_step(problem.cost, u_i, g, problem.cost(u_i), msa_eta)
        if taken is None:
            return u_i, 0.0, msa_eta
        u_new, _, eta, step = taken
        return u_new, step, eta
    Hmat = regularize(problem.hessian(u_i, traj, lam), cfg.reg_floor)
    G = cfg.c * np.eye(H * m)
    d = ocp_direction(g, Hmat, G, r, cfg.L_max)
    return u_i - d.reshape(H, m), float(np.linalg.norm(d)), msa_eta


class Session:
    """Receding-horizon run over a shared topology; advance with step()/run().

    ``executor=None`` solves agents sequentially; ``executor="thread"``
    uses a thread pool.  Both produce bit-identical results.
    """

    def __init__(self, topology: Topology, models: dict, spec: CostSpec,
                 solver_cfg: SolverConfig, mpc_cfg: MpcConfig, initial_states: dict,
                 leader_model: dyn.Model | None = None, leader_x0=None,
                 seed: int = 0, executor: str | None = None, error_mask=None,
                 record_messages: bool = False):
        self.topology = topology
        self.models = models
        self.spec = spec
        self.cfg = solver_cfg
        self.mpc = mpc_cfg
        self.error_mask = error_mask
        self.executor = executor
        self.record_messages = record_messages
        self.message_log = []

        self.leader_mode = bool(topology.leader_links)
        if self.leader_mode:
            if leader_model is None or leader_x0 is None:
                raise ConfigError("topology has leader links but no leader model/state")
            require_spanning_tree(topology)
        else:
            require_strongly_connected(topology)

        agents = set(range(1, topology.n + 1))
        if set(initial_states) != agents or not agents <= set(models):
            raise ConfigError("models and initial states must cover agents 1..n")
        dims = {np.asarray(initial_states[i]).shape for i in agents}
        if len(dims) != 1:
            raise ConfigError(f"agents must share one state dimension, got {dims}")
        self.p = dims.pop()[0]
        control_dims = {i: models[i].control_dim for i in models}
        spec.validate(topology, self.p, control_dims)

        self.x = {i: np.asarray(initial_states[i], dtype=float).copy()
                  for i in range(1, topology.n + 1)}
        self.leader_model = leader_model if self.leader_mode else None
        self.xl = (np.asarray(leader_x0, dtype=float).copy()
                   if self.leader_mode else None)
        self.t = 0
        self.u_prev = None
        self.stale = {}
        self.rng = np.random.default_rng(seed)

        self.state_hist = {i: [self.x[i].copy()] for i in self.x}
        self.control_hist = {i: [] for i in self.x}
        self.leader_hist = [self.xl.copy()] if self.xl is not None else None
        self.edge_errors = []
        self.max_errors = []
        self.window_costs = []
        self.round_counts = []
        self.window_converged = []
        self._record_errors()

    # -- internal helpers ---------------------------------------------------

    def _record_errors(self):
        errs, mx = consensus_error(self.x, self.topology, self.spec.offsets,
                                   mask=self.error_mask, leader_state=self.xl)
        self.edge_errors.append(errs)
        self.max_errors.append(mx)

    def _initial_window(self):
        H = self.mpc.N_p
        if self.mpc.warm_start and self.u_prev is not None:
            out = {}
            for i, u in self.u_prev.items():
                shifted = np.zeros_like(u)
                shifted[:-1] = u[1:]
                out[i] = shifted
            return out
        return {i: np.zeros((H, self.models[i].control_dim)) for i in self.x}

    def _exchange(self, trajs, leader_traj, r):
        """Barrier exchange with optional message dropping; returns bundles.

        Broadcasts are snapshotted into immutable RoundMessages first; drop
        decisions are drawn here, in fixed receiver/sender order, so they
        are independent of how the solves are scheduled afterwards.  A
        dropped message falls back to the sender's last delivered one (or
        is delivered anyway when nothing stale exists yet).
        """
        msgs = {j: RoundMessage(j, r, self.t, trajs[j].copy()) for j in trajs}
        if leader_traj is not None:
            msgs[LEADER] = RoundMessage(LEADER, r, self.t, leader_traj.copy())
        drop_p = self.mpc.drop_probability

        def deliver(i, j):
            dropped = drop_p > 0.0 and self.rng.random() < drop_p
            if dropped and (i, j) in self.stale:
                msg = self.stale[(i, j)]
            else:
                msg = msgs[j]
                self.stale[(i, j)] = msg
            if self.record_messages:
                self.message_log.append((self.t, r, i, msg.sender))
            return msg.payload

        bundles = {}
        for i in range(1, self.topology.n + 1):
            received = {j: deliver(i, j) for j in neighbors(self.topology, i)}
            leader_payload = None
            if self.leader_mode and i in self.topology.leader_links:
                leader_payload = deliver(i, LEADER)
            bundles[i] = NeighborBundle(received, leader=leader_payload)
        return bundles

    def _solve_round(self, u, bundles, r, msa_etas):
        agents = sorted(self.x)

        def work(i):
            return _agent_round_update(i, self.models[i], self.x[i], u[i],
                                       bundles[i], self.spec, self.cfg, r,
                                       self.t, msa_etas[i])

        if self.executor == "thread":
            with ThreadPoolExecutor(max_workers=len(agents)) as pool:
                results = dict(zip(agents, pool.map(work, agents)))
        else:
            results = {i: work(i) for i in agents}
        steps = {}
        for i in agents:
            u[i], steps[i], msa_etas[i] = results[i]
        return steps

    # -- public API ---------------------------------------------------------

    def step(self) -> dict:
        """Advance one closed-loop step; returns a per-window summary."""
        t = self.t
        H = self.mpc.N_p
        u = self._initial_window()
        msa_etas = {i: self.cfg.msa_eta0 for i in self.x}
        leader_traj = None
        converged = False
        rounds = 0
        for r in range(self.cfg.max_outer):
            trajs = {i: dyn.rollout(self.models[i], self.x[i], u[i], t)
                     for i in sorted(self.x)}
            if self.leader_mode:
                leader_traj = dyn.rollout(self.leader_model, self.xl,
                                          np.zeros((H, 0)), t)
            bundles = self._exchange(trajs, leader_traj, r)
            steps = self._solve_round(u, bundles, r, msa_etas)
            rounds = r + 1
            if max(steps.values()) < self.cfg.eps_step:
                converged = True
                break

        final_trajs = {i: dyn.rollout(self.models[i], self.x[i], u[i], t)
                       for i in sorted(self.x)}
        cost_now = global_cost(final_trajs, u, self.spec, self.topology,
                               leader_traj=leader_traj)

        for i in sorted(self.x):
            applied = u[i][0]
            self.x[i] = dyn.step(self.models[i], self.x[i], applied, t)
            self.control_hist[i].append(applied.copy())
            self.state_hist[i].append(self.x[i].copy())
        if self.xl is not None:
            self.xl = dyn.step(self.leader_model, self.xl, np.zeros(0), t)
            self.leader_hist.append(self.xl.copy())

        self.u_prev = u
        self.t += 1
        self._record_errors()
        self.window_costs.append(cost_now)
        self.round_counts.append(rounds)
        self.window_converged.append(converged)
        return {"t": t, "rounds": rounds, "converged": converged,
                "window_cost": cost_now, "max_error": self.max_errors[-1]}

    def run(self, T: int | None = None) -> RunResult:
        T = self.mpc.T if T is None else T
        while self.t < T:
            self.step()
        return self.result()

    def result(self) -> RunResult:
        return RunResult(
            states={i: np.array(h) for i, h in self.state_hist.items()},
            controls={i: np.array(h).reshape(len(h), -1)
                      for i, h in self.control_hist.items()},
            leader_states=None if self.leader_hist is None else np.array(self.leader_hist),
            edge_errors=list(self.edge_errors),
            max_errors=np.array(self.max_errors),
            window_costs=np.array(self.window_costs),
            rounds=np.array(self.round_counts, dtype=int),
            converged=np.array(self.window_converged, dtype=bool),
        )


def run_mpc_leaderless(topology, models, spec, solver_cfg, mpc_cfg,
                       initial_states, seed=0, executor=None,
                       error_mask=None) -> RunResult:
    """Receding-horizon leaderless consensus (requires strong connectivity)."""
    session = Session(topology, models, spec, solver_cfg, mpc_cfg,
                      initial_states, seed=seed, executor=executor,
                      error_mask=error_mask)
    return session.run()


def run_mpc_leader_follower(topology, models, leader_model, spec, solver_cfg,
                            mpc_cfg, initial_states, leader_x0, seed=0,
                            executor=None, error_mask=None) -> RunResult:
    """Receding-horizon tracking of an autonomous leader (spanning tree from
    the leader required); formation offsets ride in the cost spec."""
    session = Session(topology, models, spec, solver_cfg, mpc_cfg,
                      initial_states, leader_model=leader_model,
                      leader_x0=leader_x0, seed=seed, executor=executor,
                      error_mask=error_mask)
    return session.run()


def run_algorithm1(topology, models, spec, solver_cfg, horizon, initial_states,
                   leader_model=None, leader_x0=None,
                   executor=None) -> FiniteHorizonResult:
    """One-shot finite-horizon consensus: exchange / sweep / update rounds
    until every agent's gradient norm is under tolerance.

    The gradient test runs before the update, so a consensus fixed point
    terminates at round zero with the initial controls.
    """
    leader_mode = bool(topology.leader_links)
    if leader_mode:
        if leader_model is None or leader_x0 is None:
            raise ConfigError("topology has leader links but no leader model/state")
        require_spanning_tree(topology)
    else:
        require_strongly_connected(topology)
    p = np.asarray(next(iter(initial_states.values()))).shape[0]
    spec.validate(topology, p, {i: models[i].control_dim for i in models})

    agents = sorted(initial_states)
    x0 = {i: np.asarray(initial_states[i], dtype=float) for i in agents}
    u = {i: np.zeros((horizon, models[i].control_dim)) for i in agents}
    leader_traj = None
    if leader_mode:
        leader_traj = dyn.rollout(leader_model, leader_x0, np.zeros((horizon, 0)), 0)

    cost_history = []
    converged = False
    rounds = 0
    gnorms = {}
    msa_etas = {i: solver_cfg.msa_eta0 for i in agents}
    for r in range(solver_cfg.max_outer):
        trajs = {i: dyn.rollout(models[i], x0[i], u[i], 0) for i in agents}
        bundles = {}
        for i in agents:
            received = {j: trajs[j] for j in neighbors(topology, i)}
            lp = leader_traj if (leader_mode and i in topology.leader_links) else None
            bundles[i] = NeighborBundle(received, leader=lp)
        cost_history.append(global_cost(trajs, u, spec, topology, leader_traj))

        sweeps = {}
        for i in agents:
            lam = adjoint.costate_sweep(i, models[i], trajs[i], u[i], bundles[i],
                                        spec, mode="auto", k0=0)
            g = adjoint.gradient(i, models[i], trajs[i], u[i], lam, spec, k0=0)
            sweeps[i] = (lam, g)
            gnorms[i] = float(np.linalg.norm(g))
        if max(gnorms.values()) < solver_cfg.eps_grad:
            converged = True
            rounds = r
            break

        def work(i):
            lam, g = sweeps[i]
            if solver_cfg.method == "msa":
                problem = LocalProblem(i, models[i], x0[i], bundles[i], spec)
                taken = backtrack_step(problem.cost, u[i], g, problem.cost(u[i]),
                                       msa_etas[i])
                if taken is None:
                    return u[i]
                msa_etas[i] = taken[2]
                return taken[0]
            Hmat = adjoint.hessian(i, models[i], trajs[i], u[i], lam, spec,
                                   mode="auto", k0=0)
            Hmat = regularize(Hmat, solver_cfg.reg_floor)
            G = solver_cfg.c * np.eye(u[i].size)
            d = ocp_direction(g, Hmat, G, r, solver_cfg.L_max)
            return u[i] - d.reshape(u[i].shape)

        if executor == "thread":
            with ThreadPoolExecutor(max_workers=len(agents)) as pool:
                new_u = dict(zip(agents, pool.map(work, agents)))
        else:
            new_u = {i: work(i) for i in agents}
        u = new_u
        rounds = r + 1

    trajs = {i: dyn.rollout(models[i], x0[i], u[i], 0) for i in agents}
    return FiniteHorizonResult(
        controls=u, trajectories=trajs, leader_trajectory=leader_traj,
        rounds=rounds, converged=converged,
        grad_norms=np.array([gnorms[i] for i in agents]),
        global_costs=cost_history,
    )
