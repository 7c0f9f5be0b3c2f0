"""Lowest eigenpairs of Pauli-sum operators and the overlaps between them."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .pauli import DENSE_MAX_QUBITS, DimensionError, PauliSum, apply_operator

log = logging.getLogger(__name__)

CLUSTER_TOL = 1e-6  # GHz; eigenvalues closer than this form one degenerate cluster


class ConvergenceError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class EigenSet:
    """Ascending eigenvalues with eigenvectors as columns and residual norms."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.values)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def vector(self, n: int) -> np.ndarray:
        return self.vectors[:, n]

    def clusters(self, tol: float = CLUSTER_TOL) -> list[list[int]]:
        """Group indices of (near) degenerate eigenvalues, chaining gaps below ``tol``."""
        groups: list[list[int]] = []
        for i, e in enumerate(self.values):
            if groups and e - self.values[groups[-1][-1]] < tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups

    def orthonormality_error(self) -> float:
        g = self.vectors.conj().T @ self.vectors
        return float(np.abs(g - np.eye(len(self))).max()) if len(self) else 0.0


def _residuals(op: PauliSum, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    r = apply_operator(op, vectors) - vectors * values[None, :]
    return np.linalg.norm(r, axis=0)


def dense_eigh(op: PauliSum) -> EigenSet:
    """Full spectrum by dense diagonalization (oracle path, N <= 12)."""
    if op.n_qubits > DENSE_MAX_QUBITS:
        raise MemoryError(f"dense_eigh refuses {op.n_qubits} qubits (limit {DENSE_MAX_QUBITS})")
    w, v = np.linalg.eigh(op.to_dense())
    return EigenSet(w, v, _residuals(op, w, v))


def _orthogonalize(r, bases):
    # two passes of classical Gram-Schmidt
    for _ in range(2):
        for B in bases:
            if B.shape[1]:
                r = r - B @ (B.conj().T @ r)
    return r


def _lanczos_complement(op, nev, locked, rng, tol, ncv, max_restarts, dtype):
    """Thick-restart Lanczos for the ``nev`` lowest eigenpairs orthogonal to ``locked``."""
    dim = op.dim
    avail = dim - locked.shape[1]
    nev = min(nev, avail)
    ncv = min(ncv, avail)
    keep = min(max(nev + (ncv - nev) // 2, nev), ncv - 1) if ncv > nev else nev

    def fresh():
        for _ in range(8):
            r = rng.standard_normal(dim).astype(dtype)
            r = _orthogonalize(r, (locked, V))
            nr = np.linalg.norm(r)
            if nr > 1e-8:
                return r / nr
        return None

    Vb = np.zeros((dim, ncv), dtype=dtype)
    AVb = np.zeros((dim, ncv), dtype=dtype)
    j = 0
    V = Vb[:, :0]
    v = fresh()
    res = None
    scale = 1.0
    for restart in range(max_restarts):
        while j < ncv and v is not None:
            w = apply_operator(op, v)
            Vb[:, j], AVb[:, j] = v, w
            j += 1
            V = Vb[:, :j]
            scale = max(scale, float(np.linalg.norm(w)))
            r = _orthogonalize(w, (locked, V))
            nr = np.linalg.norm(r)
            if nr > 1e-10 * scale:
                v = r / nr
            else:
                # invariant subspace reached; continue with a new random direction
                v = fresh() if j < avail else None
        V, AV = Vb[:, :j], AVb[:, :j]
        T = V.conj().T @ AV
        T = 0.5 * (T + T.conj().T)
        theta, S = np.linalg.eigh(T)
        X = V @ S
        AX = AV @ S
        res = np.linalg.norm(AX - X * theta[None, :], axis=0)
        if np.all(res[:nev] < tol) or j >= avail:
            return theta[:nev], X[:, :nev], res[:nev]
        # continuation vector: orthogonal to the whole current space
        if v is None:
            v = fresh()
        Vb[:, :keep], AVb[:, :keep] = X[:, :keep], AX[:, :keep]
        j = keep
        V = Vb[:, :j]
    raise ConvergenceError(
        f"Lanczos did not converge after {max_restarts} restarts; residuals {res[:nev]}",
        residuals=res[:nev],
    )


def lanczos_lowest(op: PauliSum, k: int, tol: float = 1e-10, seed: int = 0,
                   ncv: int | None = None, max_restarts: int = 500) -> EigenSet:
    """The ``k`` lowest eigenpairs with residual norms below ``tol``.

    Converged vectors are locked and deflated; a final verification run in the
    orthogonal complement pulls in degenerate partners a single Krylov space
    cannot reach.  The start vectors come from ``numpy.random.default_rng(seed)``.
    """
    dim = op.dim
    if not 1 <= k <= dim:
        raise ValueError(f"k={k} outside 1..{dim}")
    dtype = float if op.is_real else complex
    rng = np.random.default_rng(seed)
    ncv = ncv or max(2 * k + 10, 24)
    locked = np.zeros((dim, 0), dtype=dtype)
    values = np.zeros(0)

    def lock(th, X):
        nonlocal locked, values
        locked = np.column_stack([locked, X])
        values = np.concatenate([values, th])
        order = np.argsort(values, kind="stable")
        locked, values = locked[:, order], values[order]

    while len(values) < k:
        th, X, _ = _lanczos_complement(op, k - len(values), locked, rng, tol, ncv, max_restarts, dtype)
        lock(th, X)
    for _ in range(dim):
        if len(values) >= dim:
            break
        th, X, _ = _lanczos_complement(op, 1, locked, rng, tol, ncv, max_restarts, dtype)
        if th[0] >= values[-1] - max(tol, 1e-12 * max(1.0, abs(values[-1]))):
            break
        lock(th, X)
        locked, values = locked[:, :k], values[:k]
    # clean up orthonormality inside the locked set
    q, rr = np.linalg.qr(locked)
    q = q * np.sign(np.diag(rr).real)[None, :]
    T = q.conj().T @ apply_operator(op, q)
    theta, S = np.linalg.eigh(0.5 * (T + T.conj().T))
    vecs = q @ S
    res = _residuals(op, theta, vecs)
    if np.any(res >= tol):
        raise ConvergenceError(f"Lanczos residuals above tolerance: {res}", residuals=res)
    return EigenSet(theta, vecs, res)


def lowest(op: PauliSum, k: int, tol: float = 1e-10, seed: int = 0, solver: str = "auto") -> EigenSet:
    """Dispatch to ``dense_eigh`` (truncated) or ``lanczos_lowest``."""
    if solver == "auto":
        solver = "dense" if op.n_qubits <= 6 else "lanczos"
    if solver == "dense":
        es = dense_eigh(op)
        k = min(k, len(es))
        return EigenSet(es.values[:k], es.vectors[:, :k], es.residuals[:k])
    if solver == "lanczos":
        return lanczos_lowest(op, min(k, op.dim), tol=tol, seed=seed)
    raise ValueError(f"unknown solver {solver!r}")


@dataclass(frozen=True)
class OverlapTable:
    """``values[n, m] = |<up_n|down_m>|^2``."""

    values: np.ndarray

    def column(self, m: int = 0) -> np.ndarray:
        return self.values[:, m]


def overlaps(up: EigenSet, down) -> OverlapTable:
    """Squared overlaps of every up eigenvector with a down state or EigenSet."""
    D = down.vectors if isinstance(down, EigenSet) else np.asarray(down)
    if D.ndim == 1:
        D = D[:, None]
    if D.shape[0] != up.dim:
        raise DimensionError(f"state dimension {D.shape[0]} does not match {up.dim}")
    return OverlapTable(np.abs(up.vectors.conj().T @ D) ** 2)


def cluster_levels(up: EigenSet, table: OverlapTable, tol: float = CLUSTER_TOL):
    """Collapse degenerate clusters: mean energies and cluster-summed overlaps."""
    groups = up.clusters(tol)
    energies = np.array([up.values[g].mean() for g in groups])
    summed = np.array([table.values[g].sum(axis=0) for g in groups])
    return energies, summed, groups


@dataclass(frozen=True)
class GapReport:
    gap: float
    threshold: float
    flagged: bool


def gap_check(down: EigenSet, threshold: float) -> GapReport:
    if len(down) < 2:
        raise ValueError("gap_check needs at least two eigenpairs")
    gap = float(down.values[1] - down.values[0])
    return GapReport(gap, threshold, gap < threshold)


def complete_clusters(es: EigenSet, full_dim: int, tol: float = CLUSTER_TOL) -> EigenSet:
    """Drop the top cluster of a partial spectrum, which may lack degenerate partners."""
    groups = es.clusters(tol)
    if len(es) >= full_dim or len(groups) < 2:
        return es
    k = groups[-1][0]
    return EigenSet(es.values[:k], es.vectors[:, :k], es.residuals[:k])
