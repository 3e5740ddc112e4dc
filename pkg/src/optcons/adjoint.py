"""Costate sweeps, exact gradients and Hessians of the local cost.

The gradient comes from one backward costate pass: the costate lambda(t)
accumulates the cost's sensitivity to the state, and the stationarity
residual R u(t) + lambda(t+1) df/du is exactly the derivative of the local
cost with respect to u(t) (neighbors frozen).

The Hessian is the exact second derivative of the same local cost with
respect to the flattened control sequence.  It is assembled one column
block per control coordinate via a forward sensitivity pass (seeded at the
perturbed stage, zero initial condition) and a backward second-order
adjoint pass (zero terminal condition when terminal weights vanish) that
carries the lambda-weighted dynamics curvature; all columns are propagated
together as one batch.

Finite-difference twins of both quantities serve as independent oracles in
the tests and as a debugging aid.
"""

from __future__ import annotations

import numpy as np

from . import dynamics as dyn
from .cost import CostSpec, NeighborBundle, local_cost, _check_horizons
from .errors import NumericError


def _resolve_mode(i: int, spec: CostSpec, mode: str) -> bool:
    """Return True when leader terms participate for agent i."""
    has_leader_terms = i in spec.W or i in spec.E
    if mode == "auto":
        return has_leader_terms
    if mode == "leaderless":
        if has_leader_terms:
            raise ValueError(
                f"agent {i} has leader weights but the sweep runs in leaderless mode")
        return False
    if mode == "leader_follower":
        return has_leader_terms
    raise ValueError(f"unknown mode {mode!r}")


def costate_sweep(i: int, model: dyn.Model, traj_i, u_i, nb: NeighborBundle,
                  spec: CostSpec, mode: str = "auto", k0: int = 0) -> np.ndarray:
    """Backward costate recursion; returns the (H+1, p) array of lambda(t).

    lambda(H) collects the terminal weights; going backward,
    lambda(t) = sum_j Q_ij e_ij(t) [+ W_il e_il(t)] + lambda(t+1) df/dx(t).
    lambda(0) is computed for completeness but unused by the gradient.
    """
    traj_i = np.asarray(traj_i, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    H = _check_horizons(i, traj_i, u_i, nb)
    p = traj_i.shape[1]
    use_leader = _resolve_mode(i, spec, mode)

    z_i = traj_i - spec.offset(i, p)
    stage_src = np.zeros((H + 1, p))
    term_src = np.zeros(p)
    for j, Q, D in spec.edge_terms(i, p):
        if j not in nb.trajectories:
            raise ValueError(f"agent {i}: bundle is missing neighbor {j}")
        e = z_i - (np.asarray(nb.trajectories[j], dtype=float) - spec.offset(j, p))
        stage_src += e @ Q
        term_src += D @ e[H]
    if use_leader:
        if nb.leader is None:
            raise ValueError(f"agent {i} has leader weights but no leader trajectory")
        el = z_i - (np.asarray(nb.leader, dtype=float) - spec.offset(0, p))
        W = spec.W.get(i)
        E = spec.E.get(i)
        if W is not None:
            stage_src += el @ W
        if E is not None:
            term_src += E @ el[H]

    lambdas = np.empty((H + 1, p))
    lambdas[H] = term_src
    for t in range(H - 1, -1, -1):
        A, _ = dyn.linearize(model, traj_i[t], u_i[t], k0 + t)
        lambdas[t] = stage_src[t] + lambdas[t + 1] @ A
    return lambdas


def gradient(i: int, model: dyn.Model, traj_i, u_i, lambdas, spec: CostSpec,
             k0: int = 0) -> np.ndarray:
    """Exact local-cost gradient, flattened time-major (H*m,).

    Block t is the stationarity residual R u(t) + lambda(t+1) df/du(t);
    it vanishes at an optimal control sequence.
    """
    traj_i = np.asarray(traj_i, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    H, m = u_i.shape
    if lambdas.shape[0] != H + 1:
        raise ValueError(f"costate has {lambdas.shape[0]} rows, expected {H + 1}")
    R = spec.R[i]
    g = np.empty((H, m))
    for t in range(H):
        _, B = dyn.linearize(model, traj_i[t], u_i[t], k0 + t)
        g[t] = R @ u_i[t] + lambdas[t + 1] @ B
    return g.reshape(-1)


def _state_curvatures(i: int, spec: CostSpec, p: int, use_leader: bool):
    """Constant stage and terminal state curvature of the local cost."""
    C_stage = np.zeros((p, p))
    C_term = np.zeros((p, p))
    for j, Q, D in spec.edge_terms(i, p):
        C_stage += Q
        C_term += D
    if use_leader:
        if i in spec.W:
            C_stage += spec.W[i]
        if i in spec.E:
            C_term += spec.E[i]
    return C_stage, C_term


def hessian(i: int, model: dyn.Model, traj_i, u_i, lambdas, spec: CostSpec,
            mode: str = "auto", k0: int = 0, allow_fd: bool = True) -> np.ndarray:
    """Exact (H*m, H*m) Hessian of the local cost, neighbors frozen.

    One forward sensitivity pass and one backward second-order adjoint pass,
    batched over all H*m unit control perturbations; the model's
    lambda-weighted second derivatives enter both passes.  The result is
    symmetrized once if assembly drift exceeds 1e-12 (an error beyond
    1e-8 relative would indicate a broken model derivative).
    """
    traj_i = np.asarray(traj_i, dtype=float)
    u_i = np.asarray(u_i, dtype=float)
    H, m = u_i.shape
    p = traj_i.shape[1]
    n = H * m
    use_leader = _resolve_mode(i, spec, mode)
    C_stage, C_term = _state_curvatures(i, spec, p, use_leader)
    R = spec.R[i]

    A = np.empty((H, p, p))
    B = np.empty((H, p, m))
    M = np.empty((H, p + m, p + m))
    for t in range(H):
        A[t], B[t] = dyn.linearize(model, traj_i[t], u_i[t], k0 + t)
        M[t] = dyn.second_order_action(model, traj_i[t], u_i[t], k0 + t,
                                       lambdas[t + 1], allow_fd=allow_fd)

    # V[t] holds the control perturbation of every column at stage t.
    V = np.zeros((H, m, n))
    for t in range(H):
        V[t, :, t * m:(t + 1) * m] = np.eye(m)

    dx = np.zeros((p, n))
    dxs = [dx]
    for t in range(H):
        dx = A[t] @ dx + B[t] @ V[t]
        dxs.append(dx)

    blocks = [None] * H
    dlam = C_term @ dxs[H]
    for t in range(H - 1, -1, -1):
        Mxx, Mxu = M[t][:p, :p], M[t][:p, p:]
        Mux, Muu = M[t][p:, :p], M[t][p:, p:]
        blocks[t] = R @ V[t] + B[t].T @ dlam + Mux @ dxs[t] + Muu @ V[t]
        dlam = (C_stage + Mxx) @ dxs[t] + A[t].T @ dlam + Mxu @ V[t]

    Hmat = np.vstack(blocks)
    scale = np.linalg.norm(Hmat)
    drift = np.linalg.norm(Hmat - Hmat.T)
    if scale > 0 and drift > 1e-8 * scale:
        raise NumericError(
            f"agent {i}: Hessian asymmetry {drift / scale:.2e} exceeds tolerance")
    if drift > 1e-12:
        Hmat = 0.5 * (Hmat + Hmat.T)
    return Hmat


def fd_gradient(i: int, model: dyn.Model, x0, u_i, nb: NeighborBundle,
                spec: CostSpec, k0: int = 0, h=None) -> np.ndarray:
    """Central differences of local_cost; the gradient's independent oracle."""
    u_i = np.asarray(u_i, dtype=float)
    H, m = u_i.shape
    flat = u_i.reshape(-1)
    if h is not None and not h > 0.0:
        raise ValueError(f"finite-difference step must be positive, got {h}")

    def value(vec):
        u = vec.reshape(H, m)
        traj = dyn.rollout(model, x0, u, k0)
        return local_cost(i, traj, u, nb, spec)

    g = np.empty(flat.size)
    for idx in range(flat.size):
        hk = h if h is not None else 1e-6 * (1.0 + abs(flat[idx]))
        e = np.zeros(flat.size)
        e[idx] = hk
        g[idx] = (value(flat + e) - value(flat - e)) / (2.0 * hk)
    return g


def fd_hessian(i: int, model: dyn.Model, x0, u_i, nb: NeighborBundle,
               spec: CostSpec, mode: str = "auto", k0: int = 0, h=None) -> np.ndarray:
    """Central differences of the sweep gradient; the Hessian's oracle."""
    u_i = np.asarray(u_i, dtype=float)
    H, m = u_i.shape
    flat = u_i.reshape(-1)
    if h is not None and not h > 0.0:
        raise ValueError(f"finite-difference step must be positive, got {h}")

    def grad(vec):
        u = vec.reshape(H, m)
        traj = dyn.rollout(model, x0, u, k0)
        lam = costate_sweep(i, model, traj, u, nb, spec, mode=mode, k0=k0)
        return gradient(i, model, traj, u, lam, spec, k0=k0)

    Hmat = np.empty((flat.size, flat.size))
    for idx in range(flat.size):
        hk = h if h is not None else 1e-4 * (1.0 + abs(flat[idx]))
        e = np.zeros(flat.size)
        e[idx] = hk
        Hmat[:, idx] = (grad(flat + e) - grad(flat - e)) / (2.0 * hk)
    return 0.5 * (Hmat + Hmat.T)
