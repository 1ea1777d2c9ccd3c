"""Dynamic average consensus on subgradients.

Each agent keeps ``s_i``, a running estimate of the network-average
subgradient, and ``z_i = sum_k s_{i,k}``.  One round mixes ``s`` with the
neighbours and corrects it by the change of the local subgradient:

    s_{i,t+1} = sum_j p_ij s_{j,t} + grad_i(t+1) - grad_i(t)

Starting from ``s_{i,0} = grad_i(0)`` the agent-average of ``s`` equals the
average current subgradient at every round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .topology import WeightMatrix


@dataclass(frozen=True, eq=False)
class TrackerState:
    s: np.ndarray          # (n, m) tracked subgradients
    z: np.ndarray          # (n, m) accumulated s
    last_grad: np.ndarray  # (n, m) local subgradients at the current iterates

    @property
    def n(self) -> int:
        return self.s.shape[0]


def init_tracking(grads0) -> TrackerState:
    g = np.array(grads0, dtype=float, ndmin=2)
    return TrackerState(g.copy(), g.copy(), g.copy())


def tracking_step(state: TrackerState, p: WeightMatrix, new_grads) -> TrackerState:
    new_grads = np.array(new_grads, dtype=float, ndmin=2)
    if new_grads.shape != state.s.shape:
        raise ParameterError(f"gradient shape {new_grads.shape} does not match tracker {state.s.shape}")
    if p.n != state.n:
        raise ParameterError(f"weight matrix is {p.n}x{p.n} but tracker has {state.n} agents")
    s = p.mix(state.s) + new_grads - state.last_grad
    return TrackerState(s, state.z + s, new_grads)
