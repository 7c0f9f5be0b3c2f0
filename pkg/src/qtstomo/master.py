"""Directed tunneling rates between probe-down and probe-up manifolds and the
population master equation they drive."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.integrate import solve_ivp

from .bath import BathParams, rate
from .eigensolver import CLUSTER_TOL, EigenSet, OverlapTable, cluster_levels


class IntegrationFailure(RuntimeError):
    def __init__(self, message, t_reached):
        super().__init__(message)
        self.t_reached = t_reached


@dataclass(frozen=True)
class RateMatrix:
    """``forward[n, m]``: down m -> up n (case a).  ``backward[m, n]``: up n -> down m (case b).

    Populations are ordered down states first, then up states.
    """

    down_energies: np.ndarray
    up_energies: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    eps: float

    @property
    def n_down(self) -> int:
        return len(self.down_energies)

    @property
    def n_up(self) -> int:
        return len(self.up_energies)

    @property
    def down_escape(self) -> np.ndarray:
        return self.forward.sum(axis=0)

    @property
    def up_escape(self) -> np.ndarray:
        return self.backward.sum(axis=0)

    def generator(self) -> np.ndarray:
        """G with dP/dt = G P; off-diagonal G[i, j] is the rate j -> i, columns sum to zero."""
        nd, nu = self.n_down, self.n_up
        G = np.zeros((nd + nu, nd + nu))
        G[nd:, :nd] = self.forward
        G[:nd, nd:] = self.backward
        G[np.diag_indices_from(G)] = -G.sum(axis=0)
        return G


def assemble_rates(up: EigenSet, down: EigenSet, table: OverlapTable, eps: float,
                   bath: BathParams, mode: str = "marcus", delta_p: float = 1.0,
                   cluster_tol: float = CLUSTER_TOL) -> RateMatrix:
    """Rates between every retained down state and every up cluster at probe bias ``eps``.

    Degenerate up clusters become single states carrying the summed overlap.
    With ``delta_p=1`` rates are per Delta_p^2.
    """
    if table.values.shape != (len(up), len(down)):
        raise ValueError("overlap table does not match the eigen sets")
    e_up, ov, _ = cluster_levels(up, table, cluster_tol)
    e_down = np.asarray(down.values, dtype=float)
    # omega for case a: E_n - E_m - eps; for case b: E_m + eps - E_n
    omega_a = e_up[:, None] - e_down[None, :] - eps
    dsq = delta_p ** 2 * ov
    forward = rate(dsq, omega_a, bath, mode)
    backward = rate(dsq.T, -omega_a.T, bath, mode)
    return RateMatrix(e_down, e_up, np.asarray(forward, float), np.asarray(backward, float), float(eps))


def escape_rate(rm: RateMatrix, initial: int = 0) -> float:
    """Total rate out of down state ``initial``: the initial decay slope of its population."""
    if not 0 <= initial < rm.n_down:
        raise IndexError(f"down state {initial} not retained")
    return float(rm.forward[:, initial].sum())


@dataclass(frozen=True)
class PopulationState:
    t: float
    p: np.ndarray


def initial_state(rm: RateMatrix, down_index: int = 0) -> PopulationState:
    p = np.zeros(rm.n_down + rm.n_up)
    p[down_index] = 1.0
    return PopulationState(0.0, p)


def evolve(rm: RateMatrix, p0: PopulationState, t_grid, rtol: float = 1e-9,
           atol: float = 1e-12) -> list[PopulationState]:
    """Integrate dP/dt = G P with an implicit Radau scheme, reporting at ``t_grid``."""
    p = np.asarray(p0.p, dtype=float)
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise ValueError("initial populations must be a normalized probability vector")
    t_grid = np.asarray(t_grid, dtype=float)
    G = rm.generator()
    if not np.any(G):
        return [PopulationState(float(t), p.copy()) for t in t_grid]
    sol = solve_ivp(lambda t, y: G @ y, (p0.t, t_grid[-1]), p, method="Radau",
                    t_eval=t_grid, jac=G, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise IntegrationFailure(sol.message, float(sol.t[-1]) if len(sol.t) else p0.t)
    return [PopulationState(float(t), sol.y[:, i]) for i, t in enumerate(sol.t)]


def stationary(rm: RateMatrix, initial: int = 0) -> np.ndarray:
    """Long-time populations starting from down state ``initial``.

    Rates far off resonance underflow to zero and split the generator into
    disconnected blocks; only the block holding the initial state is solved.
    """
    G = rm.generator()
    link = (G != 0) | (G.T != 0)
    _, labels = connected_components(link, directed=False)
    idx = np.flatnonzero(labels == labels[initial])
    p = np.zeros(G.shape[0])
    if len(idx) == 1:
        p[idx] = 1.0
        return p
    sub = _gth(G[np.ix_(idx, idx)].T)
    if sub is None:
        _, _, vh = np.linalg.svd(G[np.ix_(idx, idx)])
        sub = np.abs(vh[-1].real)
    p[idx] = sub / sub.sum()
    return p


def _gth(Q):
    """Grassmann-Taksar-Heyman elimination; Q[i, j] is the rate i -> j.

    Subtraction free, so populations spanning hundreds of decades stay
    accurate where a plain null-space solve does not.
    """
    A = np.array(Q, dtype=float)
    np.fill_diagonal(A, 0.0)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0:
            return None
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi
