"""Eigenstate tomography of the single-kink sector by probe tunneling sweeps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bath import SQRT_2PI, BathParams, rate
from .eigensolver import CLUSTER_TOL, EigenSet, complete_clusters, gap_check, lowest, overlaps
from .pauli import (ModelSpec, ProbeCoupling, basis_state, build_coupling, build_down_hamiltonian,
                    build_source_hamiltonian)

log = logging.getLogger(__name__)

FIDELITY_FLOOR = 0.9
RETENTION_SIGMAS = 5.0


class GridTooCoarse(ValueError):
    pass


def _check_l(n: int, l: int):
    if not 1 <= l <= n + 1:
        raise ValueError(f"kink index l={l} outside 1..{n + 1}")


def kink_bits(n: int, l: int) -> list[int]:
    """Spins 1..l-1 up (0) and l..N down (1)."""
    _check_l(n, l)
    return [0] * (l - 1) + [1] * (n - l + 1)


def kink_reference_state(n: int, l: int) -> np.ndarray:
    return basis_state(kink_bits(n, l))


def coupler_for_kink(n: int, l: int, j_p: float, delta_p: float = 1.0) -> ProbeCoupling:
    """z-couplers whose probe-down ground state is the kink basis state ``l``.

    l = N+1 uses a negative coupler on the last qubit so the shifted ground
    state is all up.
    """
    _check_l(n, l)
    if not j_p > 0:
        raise ValueError("J_p must be positive")
    jz = [0.0] * n
    if l == 1:
        jz[0] = j_p
    elif l == n + 1:
        jz[n - 1] = -j_p
    else:
        jz[l - 2] = -j_p
        jz[l - 1] = j_p
    return ProbeCoupling.z_only(jz, delta_p)


@dataclass(frozen=True)
class ReferenceReport:
    fidelity: float
    gap: float
    flagged: bool
    reasons: tuple[str, ...] = ()


def verify_reference(model: ModelSpec, pc: ProbeCoupling, target: np.ndarray, W: float = 0.0,
                     down: EigenSet | None = None, solver: str = "auto", tol: float = 1e-10,
                     seed: int = 0) -> ReferenceReport:
    """Fidelity of the probe-down ground state with ``target`` and the down-manifold gap.

    Flags fidelity below 0.9 or a gap smaller than the line width ``W``.
    """
    if down is None:
        h_down = build_down_hamiltonian(build_source_hamiltonian(model), build_coupling(pc))
        down = lowest(h_down, 2, tol=tol, seed=seed, solver=solver)
    target = np.asarray(target)
    if target.shape[0] != down.dim:
        raise ValueError("target state dimension mismatch")
    fid = float(abs(np.vdot(target, down.vector(0))) ** 2)
    gap = gap_check(down, W)
    reasons = []
    if fid < FIDELITY_FLOOR:
        reasons.append(f"fidelity {fid:.4f} < {FIDELITY_FLOOR}")
    if gap.flagged:
        reasons.append(f"gap {gap.gap:.4g} GHz < W = {W:.4g} GHz")
    return ReferenceReport(fid, gap.gap, bool(reasons), tuple(reasons))


@dataclass(frozen=True)
class SweepSpec:
    """Probe settings for a tomography sweep.

    ``eps`` is ``None`` for the automatic grid or ``(start, stop, step)`` in GHz on
    the chosen ``axis`` ("relative": measured from each column's ground-state
    peak; "raw": the probe bias itself).
    """

    j_p: float
    delta_p: float = 1.0
    ls: tuple[int, ...] | None = None
    n_levels: int = 4
    k: int = 10
    eps: tuple[float, float, float] | None = None
    axis: str = "relative"
    mode: str = "marcus"
    solver: str = "auto"
    tol: float = 1e-10
    seed: int = 0
    threads: int = 1


@dataclass
class Column:
    l: int
    e0_down: float
    reference: ReferenceReport
    eps: np.ndarray
    eps_rel: np.ndarray
    gamma: np.ndarray
    level_overlaps: np.ndarray  # cluster-summed |<up_n|down_0>|^2 over retained levels


@dataclass
class TomographyGrid:
    """Gamma_0(eps, l) / Delta_p^2 on a grid, one column per reference index."""

    bath: BathParams
    up: EigenSet
    level_energies: np.ndarray  # retained cluster energies of H_S
    level_groups: list[list[int]]
    n_levels: int
    columns: list[Column]
    warnings: list[str] = field(default_factory=list)

    @property
    def ls(self) -> list[int]:
        return [c.l for c in self.columns]

    @property
    def gamma(self) -> np.ndarray:
        return np.array([c.gamma for c in self.columns])

    @property
    def gamma_max(self) -> float:
        return float(self.gamma.max()) if self.columns else 0.0

    @property
    def normalized(self) -> np.ndarray:
        m = self.gamma_max
        return self.gamma / m if m > 0 else self.gamma.copy()

    def predicted_peaks(self, column: Column) -> np.ndarray:
        """Raw eps of every retained level's resonance in ``column``."""
        return self.level_energies - column.e0_down + self.bath.eps_p

    @property
    def level_gaps(self) -> np.ndarray:
        return self.level_energies[: self.n_levels] - self.level_energies[0]


def _column(h_s, model, up, e_up, groups, l, spec, bath, rel_grid, raw_grid, coupler):
    n = model.n_qubits
    pc = coupler(n, l, spec.j_p, spec.delta_p)
    h_down = build_down_hamiltonian(h_s, build_coupling(pc))
    down = lowest(h_down, 2, tol=spec.tol, seed=spec.seed, solver=spec.solver)
    ref = verify_reference(model, pc, kink_reference_state(n, l), bath.W, down=down)
    ov = overlaps(up, down.vector(0)).column(0)
    ov_levels = np.array([ov[g].sum() for g in groups])
    e0d = float(down.values[0])
    ground_peak = e_up[0] - e0d + bath.eps_p
    if raw_grid is not None:
        eps = raw_grid.copy()
    else:
        eps = rel_grid + ground_peak
    eps_rel = eps - ground_peak
    omega = e_up[:, None] - e0d - eps[None, :]
    gamma = (rate(ov_levels[:, None], omega, bath, spec.mode)).sum(axis=0)
    return Column(l, e0d, ref, eps, eps_rel, np.asarray(gamma, float), ov_levels)


def auto_grid(level_gaps: np.ndarray, W: float) -> np.ndarray:
    """Relative grid from 2W below the ground peak to 2W above the highest shown level, step W/10."""
    step = W / 10.0
    start = -2.0 * W
    stop = float(level_gaps.max()) + 2.0 * W
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _explicit_grid(eps):
    start, stop, step = eps
    if not step > 0 or stop < start:
        raise ValueError("eps grid needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def run_sweep(model: ModelSpec, spec: SweepSpec, bath: BathParams,
              coupler=coupler_for_kink) -> TomographyGrid:
    """Diagonalize H_S once, then for each reference index diagonalize H_S + 2 H_C
    and evaluate the escape rate over the eps grid.

    ``coupler(n, l, j_p, delta_p)`` returns the ProbeCoupling for reference ``l``.
    """
    n = model.n_qubits
    ls = list(spec.ls) if spec.ls is not None else list(range(1, n + 2))
    for l in ls:
        _check_l(n, l)
    h_s = build_source_hamiltonian(model)
    k = min(spec.k, h_s.dim)
    up = complete_clusters(lowest(h_s, k, tol=spec.tol, seed=spec.seed, solver=spec.solver), h_s.dim)
    groups = up.clusters(CLUSTER_TOL)
    warnings = []
    e_up = np.array([up.values[g].mean() for g in groups])
    n_levels = min(spec.n_levels, len(groups))
    if n_levels < spec.n_levels:
        warnings.append(f"only {n_levels} complete levels available; raise k")
    gaps = e_up[:n_levels] - e_up[0]
    rel_grid = raw_grid = None
    if spec.eps is None:
        rel_grid = auto_grid(gaps, bath.W)
    elif spec.axis == "relative":
        rel_grid = _explicit_grid(spec.eps)
    elif spec.axis == "raw":
        raw_grid = _explicit_grid(spec.eps)
    else:
        raise ValueError(f"unknown eps axis {spec.axis!r}")

    def work(l):
        return _column(h_s, model, up, e_up, groups, l, spec, bath, rel_grid, raw_grid, coupler)

    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as pool:
            columns = list(pool.map(work, ls))
    else:
        columns = [work(l) for l in ls]

    window = max(float(c.eps_rel.max()) for c in columns) + RETENTION_SIGMAS * bath.W
    keep = int(np.searchsorted(e_up - e_up[0], window, side="right"))
    if keep >= len(e_up) and k < h_s.dim:
        warnings.append(f"retention window {window:.4g} GHz reaches past the {k} computed states; raise k")
    for c in columns:
        if c.reference.flagged:
            warnings.append(f"l={c.l}: " + "; ".join(c.reference.reasons))
    return TomographyGrid(bath, up, e_up, groups, n_levels, columns, warnings)


@dataclass(frozen=True)
class Peak:
    l: int
    eps: float
    eps_rel: float
    height: float
    width: float
    level: int | None
    detected: bool
    merged: tuple[int, ...] = ()


@dataclass
class PeakSet:
    """Per (level, column) resonance heights, plus maxima that match no level."""

    ls: list[int]
    heights: np.ndarray  # (n_levels, n_l), gamma / Delta_p^2 at the resonance
    positions: np.ndarray  # raw eps of the resonance
    positions_rel: np.ndarray
    detected: np.ndarray
    peaks: list[Peak]
    unmatched: list[Peak]
    W: float


def _log_quadratic(x, y, i):
    # vertex of the parabola through log y at i-1, i, i+1 (exact for a Gaussian)
    h = x[i + 1] - x[i]
    a, b, c = np.log(y[i - 1]), np.log(y[i]), np.log(y[i + 1])
    curv = a - 2.0 * b + c
    if curv >= 0:
        return x[i], y[i], float("nan")
    d = 0.5 * (a - c) / curv
    peak = b - 0.25 * (a - c) * d
    width = h * math.sqrt(-1.0 / curv)
    return x[i] + d * h, math.exp(peak), width


def local_maxima(x, y, floor_rel=1e-6):
    top = y.max() if len(y) else 0.0
    out = []
    for i in range(1, len(y) - 1):
        if y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] > floor_rel * top:
            out.append(_log_quadratic(x, y, i))
    return out


def extract_peaks(grid: TomographyGrid, match_tol: float | None = None) -> PeakSet:
    """Locate resonances column by column and assign them to levels.

    Maxima are refined by a parabola through the logarithm of three grid
    values and assigned to the nearest predicted level within ``match_tol``
    (default W/2).  Levels whose predicted positions lie within W of each other
    share one maximum and are recorded as merged.  A level with no maximum is
    read off the grid at its predicted position and marked undetected.
    """
    W = grid.bath.W
    match_tol = W / 2 if match_tol is None else match_tol
    nl = grid.n_levels
    heights = np.zeros((nl, len(grid.columns)))
    positions = np.zeros_like(heights)
    positions_rel = np.zeros_like(heights)
    detected = np.zeros(heights.shape, dtype=bool)
    peaks, unmatched = [], []
    for j, col in enumerate(grid.columns):
        spacing = np.diff(col.eps)
        if len(spacing) and spacing.max() > W / 4 * (1 + 1e-9):
            raise GridTooCoarse(f"grid spacing {spacing.max():.4g} GHz exceeds W/4 = {W / 4:.4g} GHz")
        pred = grid.predicted_peaks(col)
        offset = col.eps[0] - col.eps_rel[0]
        for center, height, width in local_maxima(col.eps, col.gamma):
            dist = np.abs(pred - center)
            n = int(np.argmin(dist))
            merged = tuple(int(m) for m in np.flatnonzero(dist < W))
            pk = Peak(col.l, center, center - offset, height, width, n, True, merged if len(merged) > 1 else ())
            if dist[n] <= match_tol and n < nl:
                peaks.append(pk)
                if not detected[n, j] or height > heights[n, j]:
                    heights[n, j], positions[n, j], detected[n, j] = height, center, True
            elif dist[n] <= match_tol:
                peaks.append(pk)  # resonance of a retained level above the displayed ones
            else:
                unmatched.append(Peak(col.l, center, center - offset, height, width, None, True))
        for n in range(nl):
            if not detected[n, j]:
                heights[n, j] = float(np.interp(pred[n], col.eps, col.gamma))
                positions[n, j] = pred[n]
                peaks.append(Peak(col.l, pred[n], pred[n] - offset, heights[n, j], float("nan"), n, False))
        positions_rel[:, j] = positions[:, j] - offset
    return PeakSet(grid.ls, heights, positions, positions_rel, detected, peaks, unmatched, W)


@dataclass
class AmplitudeMap:
    """Reconstructed |C_l^(n)|^2 (rows: levels, columns: reference indices)."""

    ls: list[int]
    raw: np.ndarray  # peak height / (sqrt(2 pi) / W)
    correction: np.ndarray  # per-column factor 1 / fidelity applied to ``raw``
    values: np.ndarray

    def row_normalized(self) -> np.ndarray:
        m = self.values.max(axis=1, keepdims=True)
        return np.divide(self.values, m, out=np.zeros_like(self.values), where=m > 0)


def reconstruct_amplitudes(peaks: PeakSet, fidelity=None) -> AmplitudeMap:
    """Squared amplitudes from peak heights, optionally divided by the reference fidelity."""
    raw = peaks.heights / (SQRT_2PI / peaks.W)
    if fidelity is None:
        corr = np.ones(raw.shape[1])
    else:
        f = np.asarray(fidelity, dtype=float)
        corr = np.divide(1.0, f, out=np.full_like(f, np.inf), where=f > 0)
    return AmplitudeMap(list(peaks.ls), raw, corr, raw * corr[None, :])


def grid_fidelities(grid: TomographyGrid) -> np.ndarray:
    return np.array([c.reference.fidelity for c in grid.columns])


def direct_amplitudes(up: EigenSet, groups, n: int, ls) -> np.ndarray:
    """|<psi_l|Psi_n>|^2 straight from eigenvectors, cluster-summed, shape (len(groups), len(ls))."""
    out = np.zeros((len(groups), len(ls)))
    for j, l in enumerate(ls):
        b = kink_bits(n, l)
        idx = int("".join(map(str, b)), 2)
        amp2 = np.abs(up.vectors[idx, :]) ** 2
        out[:, j] = [amp2[g].sum() for g in groups]
    return out


def signed_amplitudes(up: EigenSet, level: int, n: int) -> np.ndarray:
    """C_l^(level) for l = 1..N+1 with the global phase fixed by the largest entry."""
    idx = [int("".join(map(str, kink_bits(n, l))), 2) for l in range(1, n + 2)]
    c = up.vectors[idx, level]
    ref = c[np.argmax(np.abs(c))]
    c = c * (abs(ref) / ref)
    return c.real


def sign_changes(c: np.ndarray, rel_floor: float = 1e-8) -> int:
    top = np.abs(c).max()
    s = np.sign(c[np.abs(c) > rel_floor * top])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def node_positions(row: np.ndarray, ls, threshold: float | None = None) -> list:
    """Interior local minima of a nonnegative row; plateaus count once.

    With ``threshold`` only minima below ``threshold * max(row)`` count.
    A plateau of equal minima is reported as the tuple of its indices.
    """
    row = np.asarray(row, dtype=float)
    top = row.max()
    same = 1e-9 * top
    out = []
    i = 1
    while i < len(row) - 1:
        j = i
        while j + 1 < len(row) - 1 and abs(row[j + 1] - row[i]) <= same:
            j += 1
        if row[i - 1] > row[i] + same and row[j + 1] > row[j] + same:
            if threshold is None or row[i] < threshold * top:
                out.append(ls[i] if i == j else tuple(ls[i:j + 1]))
        i = j + 1
    return out
