"""Pauli-string operators over N source qubits.

Basis convention: qubit 1 is the most significant bit of the basis index and
bit value 0 is spin up (sigma^z = +1).  A computational basis state is written
left to right as qubit 1 ... qubit N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

PAULI_CHARS = "IXYZ"
DENSE_MAX_QUBITS = 12

# single-site products: (a, b) -> (phase, c) with a @ b = phase * c
_PRODUCT = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    pass


def pauli_string(factors: str | Sequence[str], n_qubits: int | None = None) -> str:
    s = "".join(factors).upper()
    if not s or any(c not in PAULI_CHARS for c in s):
        raise ValueError(f"invalid Pauli string {factors!r}")
    if n_qubits is not None and len(s) != n_qubits:
        raise DimensionError(f"Pauli string {s} has length {len(s)}, expected {n_qubits}")
    return s


def single_site(n_qubits: int, site: int, pauli: str) -> str:
    """String with ``pauli`` on 0-based ``site`` and identity elsewhere."""
    if not 0 <= site < n_qubits:
        raise IndexError(f"site {site} out of range for {n_qubits} qubits")
    s = ["I"] * n_qubits
    s[site] = pauli
    return "".join(s)


def multiply_strings(a: str, b: str) -> tuple[complex, str]:
    """Product of two Pauli strings as (phase, string)."""
    if len(a) != len(b):
        raise DimensionError("Pauli strings of different length")
    phase: complex = 1
    out = []
    for x, y in zip(a, b):
        p, c = _PRODUCT[(x, y)]
        phase *= p
        out.append(c)
    return phase, "".join(out)


def _masks(s: str) -> tuple[int, int, int]:
    n = len(s)
    xmask = zmask = ny = 0
    for k, c in enumerate(s):
        bit = 1 << (n - 1 - k)
        if c in "XY":
            xmask |= bit
        if c in "ZY":
            zmask |= bit
        if c == "Y":
            ny += 1
    return xmask, zmask, ny


def _parity(x: np.ndarray) -> np.ndarray:
    """Bit parity of each entry of a nonnegative int64 array."""
    x = x.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        x ^= x >> shift
    return x & 1


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli strings, a Hermitian operator on 2^N states.

    Terms are merged on construction, exact zeros dropped, and kept in
    lexicographic order of the strings.
    """

    n_qubits: int
    terms: tuple[tuple[float, str], ...] = field(default=())

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        merged: dict[str, float] = {}
        for coeff, s in self.terms:
            s = pauli_string(s, self.n_qubits)
            c = float(coeff)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient {coeff!r} on {s}")
            merged[s] = merged.get(s, 0.0) + c
        canon = tuple((merged[s], s) for s in sorted(merged) if merged[s] != 0.0)
        object.__setattr__(self, "terms", canon)

    @classmethod
    def from_dict(cls, n_qubits: int, terms: Mapping[str, float]) -> "PauliSum":
        return cls(n_qubits, tuple((c, s) for s, c in terms.items()))

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits, ())

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def is_real(self) -> bool:
        """True when the matrix is real (an even number of Y factors in every term)."""
        return all(s.count("Y") % 2 == 0 for _, s in self.terms)

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if not isinstance(other, PauliSum):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise DimensionError(f"cannot add operators on {self.n_qubits} and {other.n_qubits} qubits")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum(self.n_qubits, tuple((scalar * c, s) for c, s in self.terms))

    __rmul__ = __mul__

    def coefficient(self, s: str) -> float:
        s = pauli_string(s, self.n_qubits)
        for c, t in self.terms:
            if t == s:
                return c
        return 0.0

    @cached_property
    def _action(self):
        # one (gather index, diagonal weight) pair per distinct flip pattern
        idx = np.arange(self.dim, dtype=np.int64)
        dtype = float if self.is_real else complex
        groups: dict[int, np.ndarray] = {}
        for c, s in self.terms:
            xmask, zmask, ny = _masks(s)
            # (P v)[b] = c * i^ny * (-1)^{popcount((b ^ x) & z)} * v[b ^ x]
            sign = 1 - 2 * _parity((idx ^ xmask) & zmask)
            phase = (1j) ** ny
            w = c * sign * (phase.real if dtype is float else phase)
            if xmask in groups:
                groups[xmask] = groups[xmask] + w
            else:
                groups[xmask] = np.asarray(w, dtype=dtype)
        return tuple((xm, None if xm == 0 else idx ^ xm, groups[xm]) for xm in sorted(groups))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return apply_operator(self, v)

    def to_dense(self) -> np.ndarray:
        if self.n_qubits > DENSE_MAX_QUBITS:
            raise MemoryError(f"dense matrix refused for {self.n_qubits} > {DENSE_MAX_QUBITS} qubits")
        dtype = float if self.is_real else complex
        m = np.zeros((self.dim, self.dim), dtype=complex)
        for c, s in self.terms:
            k = _SINGLE[s[0]]
            for ch in s[1:]:
                k = np.kron(k, _SINGLE[ch])
            m += c * k
        return m.real.copy() if dtype is float else m

    def dump(self) -> str:
        """Debug text dump, one ``coefficient string`` line per term."""
        return "".join(f"{c!r} {s}\n" for c, s in self.terms)


def apply_operator(op: PauliSum, v: np.ndarray) -> np.ndarray:
    """Matrix-free product ``op @ v``; ``v`` may be a vector or a (dim, k) block."""
    v = np.asarray(v)
    if v.shape[0] != op.dim:
        raise DimensionError(f"vector of length {v.shape[0]} for operator of dimension {op.dim}")
    dtype = np.result_type(v.dtype, float if op.is_real else complex)
    out = np.zeros(v.shape, dtype=dtype)
    for _, gather, w in op._action:
        src = v if gather is None else v[gather]
        out += w[:, None] * src if v.ndim == 2 else w * src
    return out


@dataclass(frozen=True)
class ModelSpec:
    """Biased transverse Ising model on N qubits (0-based couplings ``(i, j)`` with i < j)."""

    n_qubits: int
    h: tuple[float, ...]
    delta: tuple[float, ...]
    couplings: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("model needs at least one qubit")
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))
        object.__setattr__(self, "delta", tuple(float(x) for x in self.delta))
        if len(self.h) != self.n_qubits or len(self.delta) != self.n_qubits:
            raise ValueError("h and delta must have one entry per qubit")
        clean = {}
        for (i, j), J in self.couplings.items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self coupling J_{i}{i} not allowed")
            if i > j:
                i, j = j, i
            if not 0 <= i < j < self.n_qubits:
                raise ValueError(f"coupling ({i}, {j}) out of range")
            if (i, j) in clean:
                raise ValueError(f"coupling ({i}, {j}) given twice")
            clean[(i, j)] = float(J)
        object.__setattr__(self, "couplings", dict(sorted(clean.items())))
        for x in (*self.h, *self.delta, *clean.values()):
            if not math.isfinite(x):
                raise ValueError("non-finite model parameter")


@dataclass(frozen=True)
class ProbeCoupling:
    """Probe-to-source coupler strengths (GHz) along x, y, z for each source qubit."""

    jx: tuple[float, ...]
    jy: tuple[float, ...]
    jz: tuple[float, ...]
    delta_p: float = 1.0
    eps: float = 0.0

    def __post_init__(self):
        for name in ("jx", "jy", "jz"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if not (len(self.jx) == len(self.jy) == len(self.jz)) or not self.jx:
            raise ValueError("coupler arrays must be non-empty and of equal length")
        if not self.delta_p > 0:
            raise ValueError("probe tunneling amplitude must be positive")
        if not all(math.isfinite(x) for x in (*self.jx, *self.jy, *self.jz, self.eps)):
            raise ValueError("non-finite coupler value")

    @property
    def n_qubits(self) -> int:
        return len(self.jz)

    @classmethod
    def z_only(cls, jz: Iterable[float], delta_p: float = 1.0) -> "ProbeCoupling":
        jz = tuple(jz)
        zeros = (0.0,) * len(jz)
        return cls(zeros, zeros, jz, delta_p)


def build_source_hamiltonian(spec: ModelSpec) -> PauliSum:
    """sum_i (h_i Z_i - delta_i X_i) + sum_{i<j} J_ij Z_i Z_j."""
    n = spec.n_qubits
    terms = []
    for i in range(n):
        terms.append((spec.h[i], single_site(n, i, "Z")))
        terms.append((-spec.delta[i], single_site(n, i, "X")))
    for (i, j), J in spec.couplings.items():
        s = ["I"] * n
        s[i] = s[j] = "Z"
        terms.append((J, "".join(s)))
    return PauliSum(n, tuple(terms))


def build_kink_chain(n: int, J: float, delta: float) -> ModelSpec:
    """Ferromagnetic open chain with opposite boundary biases (a single trapped kink)."""
    if n < 2:
        raise ValueError("kink chain needs N >= 2")
    if not J > 0:
        raise ValueError("kink chain needs J > 0")
    h = [0.0] * n
    h[0] = -J
    h[-1] = J
    return ModelSpec(n, tuple(h), (delta,) * n, {(i, i + 1): -J for i in range(n - 1)})


def build_coupling(pc: ProbeCoupling) -> PauliSum:
    n = pc.n_qubits
    terms = []
    for i in range(n):
        terms.append((pc.jx[i], single_site(n, i, "X")))
        terms.append((pc.jy[i], single_site(n, i, "Y")))
        terms.append((pc.jz[i], single_site(n, i, "Z")))
    return PauliSum(n, tuple(terms))


def build_down_hamiltonian(h_s: PauliSum, h_c: PauliSum) -> PauliSum:
    """Source Hamiltonian with the probe in its down state, without the eps shift."""
    if h_s.n_qubits != h_c.n_qubits:
        raise DimensionError("source and coupling operators act on different qubit counts")
    return h_s + 2.0 * h_c


def basis_state(bits: Sequence[int]) -> np.ndarray:
    """Computational basis vector; ``bits[k]`` is 0 (up) or 1 (down) for qubit k+1."""
    n = len(bits)
    index = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError("bits must be 0 or 1")
        index = (index << 1) | b
    v = np.zeros(1 << n)
    v[index] = 1.0
    return v


def classical_energies(spec: ModelSpec) -> np.ndarray:
    """Diagonal (sigma^z) energies of every basis state, ignoring tunneling."""
    n = spec.n_qubits
    idx = np.arange(1 << n, dtype=np.int64)
    z = [1 - 2 * ((idx >> (n - 1 - i)) & 1) for i in range(n)]
    e = np.zeros(1 << n)
    for i in range(n):
        e += spec.h[i] * z[i]
    for (i, j), J in spec.couplings.items():
        e += J * z[i] * z[j]
    return e


def flip_reflect(v: np.ndarray, n_qubits: int) -> np.ndarray:
    """Apply site reflection i -> N+1-i combined with a global spin flip."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    rev = np.zeros_like(idx)
    for k in range(n_qubits):
        rev |= ((idx >> k) & 1) << (n_qubits - 1 - k)
    target = rev ^ ((1 << n_qubits) - 1)
    out = np.empty_like(v)
    out[target] = v
    return out
