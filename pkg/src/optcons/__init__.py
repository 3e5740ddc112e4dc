"""Distributed optimal consensus for nonlinear multi-agent systems.

Each agent minimizes its local consensus cost over a finite horizon via
backward costate sweeps (exact gradients), exact second-order sweeps
(Hessians), and a superlinearly convergent regularized-Newton update,
exchanging predicted trajectories with neighbors in synchronous rounds.
Leaderless, leader-follower, and formation scenarios run under one
receding-horizon coordinator.
"""

from .graph import Topology, neighbors, is_strongly_connected, has_spanning_tree, LEADER
from .dynamics import (Model, step, linearize, fd_jacobian, rollout,
                       unicycle, unicycle_drift, linear, linear_sine, leader_sine)
from .cost import CostSpec, NeighborBundle, local_cost, global_cost
from .adjoint import costate_sweep, gradient, hessian, fd_gradient, fd_hessian
from .solver import (SolverConfig, LocalProblem, SolveResult, ocp_direction,
                     ocp_solve, msa_solve, contraction_factor)
from .coordinator import (MpcConfig, RoundMessage, RunResult, Session,
                          consensus_error, run_algorithm1, run_mpc_leaderless,
                          run_mpc_leader_follower)
from .scenarios import (ScenarioSpec, RunArtifacts, load_scenario, load_preset,
                        list_presets, run_scenario, emit_results)

__version__ = "0.1.0"
