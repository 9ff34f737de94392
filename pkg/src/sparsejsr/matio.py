"""Matrix sets, reproducible benchmark generators and JSON file formats.

Matrix-set document::

    {"n": 3, "m": 2, "matrices": [{"entries": [[0, 1, 0.5], ...]}, ...]}

Indices are 0-based; absent entries are zero.

Report document::

    {"mode": "sparse", "d": 1, "s": 1, "lb": 0.79, "ub": 0.82, "mb": 10,
     "n": 20, "m": 2, "tol": 1e-05, "iterations": 18, "time_s": 0.7,
     "status": "ok", ...}

Floats are written with ``repr`` which is the shortest decimal string that
round-trips the double exactly (never more than 17 significant digits).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Sequence

import numpy as np

from .spectral import spectral_radius

__all__ = [
    "MatrixSet",
    "MatrixSetError",
    "BoundReport",
    "SplitMix64",
    "load_matrix_set",
    "dump_matrix_set",
    "random_sparse_set",
    "control_pair",
    "control_set",
    "save_report",
    "load_report",
]

MASK64 = (1 << 64) - 1


class MatrixSetError(ValueError):
    """Raised for malformed matrix-set documents or generator arguments."""


class SplitMix64:
    """SplitMix64 (Steele, Lea, Flood 2014).

    state += 0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

    Doubles use the top 53 bits. Small enough to port verbatim, so seeded
    benchmarks are reproducible outside Python.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def open_unit(self) -> float:
        """Uniform double in the open interval (0, 1)."""
        while True:
            u = self.random()
            if u > 0.0:
                return u

    def randbelow(self, k: int) -> int:
        """Unbiased integer in [0, k) by rejection."""
        if k <= 0:
            raise ValueError("k must be positive")
        limit = (1 << 64) - ((1 << 64) % k)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % k

    def matrix(self, rows: int, cols: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
        """Row-major fill with uniform draws."""
        out = np.empty((rows, cols))
        for i in range(rows):
            for j in range(cols):
                out[i, j] = self.uniform(lo, hi)
        return out


def mix_seed(*parts: int) -> int:
    """Fold integers into a single 64-bit seed (one SplitMix64 step per part)."""
    state = 0
    for p in parts:
        state = SplitMix64((state ^ (int(p) & MASK64)) & MASK64).next_u64()
    return state


class MatrixSet:
    """Immutable tuple of m real n-by-n matrices."""

    __slots__ = ("_matrices",)

    def __init__(self, matrices: Iterable[Any]):
        mats = []
        for idx, a in enumerate(matrices):
            arr = np.array(a, dtype=float, copy=True)
            if arr.ndim == 0:
                arr = arr.reshape(1, 1)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise MatrixSetError(f"matrix {idx}: expected a square matrix, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise MatrixSetError(f"matrix {idx}: non-finite entry")
            arr.setflags(write=False)
            mats.append(arr)
        if not mats:
            raise MatrixSetError("a matrix set needs at least one matrix")
        n = mats[0].shape[0]
        for idx, a in enumerate(mats):
            if a.shape[0] != n:
                raise MatrixSetError(
                    f"matrix {idx}: dimension mismatch ({a.shape[0]} vs {n} for matrix 0)"
                )
        self._matrices = tuple(mats)

    @property
    def matrices(self) -> tuple[np.ndarray, ...]:
        return self._matrices

    @property
    def n(self) -> int:
        return self._matrices[0].shape[0]

    @property
    def m(self) -> int:
        return len(self._matrices)

    def __len__(self) -> int:
        return self.m

    def __iter__(self):
        return iter(self._matrices)

    def __getitem__(self, i: int) -> np.ndarray:
        return self._matrices[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatrixSet):
            return NotImplemented
        return self.m == other.m and self.n == other.n and all(
            np.array_equal(a, b) for a, b in zip(self._matrices, other._matrices)
        )

    def __hash__(self) -> int:
        return hash(tuple(a.tobytes() for a in self._matrices))

    def __repr__(self) -> str:
        return f"MatrixSet(n={self.n}, m={self.m})"

    def entries(self, i: int) -> list[tuple[int, int, float]]:
        """Coordinate list (row, col, value) of the nonzeros of matrix i."""
        a = self._matrices[i]
        rows, cols = np.nonzero(a)
        return [(int(r), int(c), float(a[r, c])) for r, c in zip(rows, cols)]

    def scaled(self, c: float) -> "MatrixSet":
        return MatrixSet(c * a for a in self._matrices)

    def permuted(self, perm: Sequence[int]) -> "MatrixSet":
        """Simultaneous similarity P^T A P by the permutation ``perm``."""
        p = np.asarray(perm)
        return MatrixSet(a[np.ix_(p, p)] for a in self._matrices)

    def nnz(self) -> list[int]:
        return [int(np.count_nonzero(a)) for a in self._matrices]


def _as_index(value: Any, n: int, what: str, idx: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MatrixSetError(f"matrix {idx}: {what} index {value!r} is not an integer")
    if not 0 <= value < n:
        raise MatrixSetError(f"matrix {idx}: {what} index {value} out of range for n={n}")
    return value


def _parse_doc(doc: Any) -> MatrixSet:
    if not isinstance(doc, dict):
        raise MatrixSetError("document must be a JSON object")
    try:
        n, m, raw = doc["n"], doc["m"], doc["matrices"]
    except KeyError as exc:
        raise MatrixSetError(f"missing field {exc.args[0]!r}") from None
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise MatrixSetError(f"n must be a positive integer, got {n!r}")
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        raise MatrixSetError(f"m must be a positive integer, got {m!r}")
    if not isinstance(raw, list) or len(raw) != m:
        raise MatrixSetError(f"expected {m} matrices, got {len(raw) if isinstance(raw, list) else raw!r}")
    mats = []
    for idx, item in enumerate(raw):
        if not isinstance(item, dict) or "entries" not in item:
            raise MatrixSetError(f"matrix {idx}: missing 'entries'")
        if "n" in item and item["n"] != n:
            raise MatrixSetError(f"matrix {idx}: dimension mismatch ({item['n']} vs n={n})")
        a = np.zeros((n, n))
        seen = set()
        for entry in item["entries"]:
            if not isinstance(entry, (list, tuple)) or len(entry) != 3:
                raise MatrixSetError(f"matrix {idx}: entry {entry!r} is not [row, col, value]")
            r = _as_index(entry[0], n, "row", idx)
            c = _as_index(entry[1], n, "column", idx)
            v = entry[2]
            if isinstance(v, str):
                try:
                    v = float(v)
                except ValueError:
                    raise MatrixSetError(f"matrix {idx}: value {v!r} is not a number") from None
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise MatrixSetError(f"matrix {idx}: value {v!r} is not a number")
            if not math.isfinite(v):
                raise MatrixSetError(f"matrix {idx}: non-finite value {v!r} at ({r}, {c})")
            if (r, c) in seen:
                raise MatrixSetError(f"matrix {idx}: duplicate coordinate ({r}, {c})")
            seen.add((r, c))
            a[r, c] = v
        mats.append(a)
    return MatrixSet(mats)


def load_matrix_set(text: str | bytes | IO[str]) -> MatrixSet:
    """Parse and validate a matrix-set JSON document."""
    if hasattr(text, "read"):
        text = text.read()
    try:
        # NaN/Infinity literals are accepted by the parser and rejected below.
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MatrixSetError(f"parse error: {exc}") from None
    return _parse_doc(doc)


def dump_matrix_set(ms: MatrixSet, sink: IO[str] | None = None) -> str:
    doc = {
        "n": ms.n,
        "m": ms.m,
        "matrices": [{"entries": [[r, c, v] for r, c, v in ms.entries(i)]} for i in range(ms.m)],
    }
    text = json.dumps(doc)
    if sink is not None:
        sink.write(text)
    return text


def random_sparse_set(n: int, m: int, edges: int, seed: int, loops: bool = False) -> MatrixSet:
    """m random sparse matrices, each supported on a uniform random digraph.

    Every matrix gets exactly ``edges`` nonzero positions: a uniform draw of
    ``edges`` distinct ordered pairs (i, j), excluding i == j unless ``loops``.
    Values are uniform in [-1, 1].
    """
    if n < 1 or m < 1:
        raise MatrixSetError("n and m must be positive")
    if edges < 1:
        raise MatrixSetError("edges must be positive")
    if edges > n * n:
        raise MatrixSetError(f"edges={edges} exceeds n^2={n * n}")
    pairs = [(i, j) for i in range(n) for j in range(n) if loops or i != j]
    if edges > len(pairs):
        raise MatrixSetError(
            f"edges={edges} exceeds the {len(pairs)} off-diagonal positions; pass loops=True"
        )
    rng = SplitMix64(seed)
    mats = []
    for _ in range(m):
        pool = list(pairs)
        a = np.zeros((n, n))
        # partial Fisher-Yates
        for k in range(edges):
            j = k + rng.randbelow(len(pool) - k)
            pool[k], pool[j] = pool[j], pool[k]
        for r, c in sorted(pool[:edges]):
            v = 0.0
            while v == 0.0:
                v = rng.uniform(-1.0, 1.0)
            a[r, c] = v
        mats.append(a)
    return MatrixSet(mats)


def control_pair(n_plant: int, seed: int, max_attempts: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Closed-loop (A_H, A_M) for a random plant under a one-step-delay controller.

    Plant x+ = F x + G u with rho(F) in [1.0, 1.1] and square random G. The
    augmented state is z = (x, u_prev); on a hit the controller recomputes
    u = K x+ from the new state, on a miss the previous actuation is held:

        A_H = [[F, G], [K F, K G]],   A_M = [[F, G], [0, I]].

    K places F + G K at a random matrix of spectral radius in [0.3, 0.9],
    which makes rho(A_H) < 1. Draws are rejected and redone when G is badly
    conditioned or the closed loop is not stable.
    """
    if n_plant < 1:
        raise MatrixSetError("n_plant must be positive")
    rng = SplitMix64(seed)
    k = n_plant
    for _ in range(max_attempts):
        f = rng.matrix(k, k)
        rf = spectral_radius(f)
        if rf < 1e-8:
            continue
        f *= rng.uniform(1.0, 1.1) / rf
        g = rng.matrix(k, k)
        target = rng.matrix(k, k)
        rt = spectral_radius(target)
        if np.linalg.cond(g) > 1e6 or rt < 1e-8:
            continue
        target *= rng.uniform(0.3, 0.9) / rt
        gain = np.linalg.solve(g, target - f)
        a_h = np.block([[f, g], [gain @ f, gain @ g]])
        a_m = np.block([[f, g], [np.zeros((k, k)), np.eye(k)]])
        if spectral_radius(a_h) < 1.0:
            return a_h, a_m
    raise MatrixSetError(f"could not stabilize a random plant in {max_attempts} attempts (seed={seed})")


def control_set(n_plant: int, m: int, seed: int) -> MatrixSet:
    """The realisations {A_H A_M^i : 0 <= i <= m-1}, each of size 2*n_plant.

    Built left to right: matrices[i+1] = matrices[i] @ A_M.
    """
    if m < 1:
        raise MatrixSetError("m must be positive")
    a_h, a_m = control_pair(n_plant, seed)
    mats = [a_h]
    for _ in range(m - 1):
        mats.append(mats[-1] @ a_m)
    return MatrixSet(mats)


@dataclass
class BoundReport:
    """Outcome of one bound computation (one row of a benchmark table)."""

    mode: str
    d: int
    s: int | None
    ub: float
    lb: float | None
    mb: int
    n: int
    m: int
    tol: float
    iterations: int
    time_s: float | None = None
    status: str = "ok"
    gamma_interval: tuple[float, float] | None = None
    per_step_status: list[tuple[float, str]] = field(default_factory=list)
    lb_word: tuple[int, ...] | None = None
    sos_lower: float | None = None
    stabilized: bool | None = None
    basis_level: int = 1
    p_support_size: int | None = None
    num_blocks: int | None = None
    verifier_disagreements: int = 0

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        if self.gamma_interval is not None:
            out["gamma_interval"] = list(self.gamma_interval)
        out["per_step_status"] = [list(p) for p in self.per_step_status]
        if self.lb_word is not None:
            out["lb_word"] = list(self.lb_word)
        return out

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "BoundReport":
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in doc.items() if k in names}
        if kwargs.get("gamma_interval") is not None:
            kwargs["gamma_interval"] = tuple(kwargs["gamma_interval"])
        kwargs["per_step_status"] = [tuple(p) for p in kwargs.get("per_step_status", [])]
        if kwargs.get("lb_word") is not None:
            kwargs["lb_word"] = tuple(kwargs["lb_word"])
        return cls(**kwargs)


REPORT_MODES = ("dense", "sparse", "support-restricted")
REPORT_STATUSES = ("ok", "solver-indeterminate")


def save_report(report: BoundReport | Sequence[BoundReport], sink: IO[str] | None = None) -> str:
    """Serialize one report (or a list of them) to JSON."""
    if isinstance(report, BoundReport):
        doc: Any = report.to_dict()
    else:
        doc = [r.to_dict() for r in report]
    text = json.dumps(doc, indent=2, allow_nan=False)
    if sink is not None:
        sink.write(text)
    return text


def load_report(text: str | IO[str]) -> BoundReport | list[BoundReport]:
    if hasattr(text, "read"):
        text = text.read()
    doc = json.loads(text)
    if isinstance(doc, list):
        return [BoundReport.from_dict(d) for d in doc]
    return BoundReport.from_dict(doc)
