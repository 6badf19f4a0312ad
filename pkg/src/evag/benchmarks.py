"""Shifted sphere, shifted rotated Rastrigin and Schwefel 2.13 test functions.

Instance data (shift vectors, rotation matrices, Schwefel coefficients) is
regenerated from a seed instead of being read from the CEC'05 data files, so
every instance is reproducible from ``(kind, dim, seed)`` alone.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

__all__ = [
    "ProblemKind",
    "ProblemInstance",
    "make_instance",
    "evaluate",
    "optimum_of",
    "save_instance",
    "format_instance",
    "load_instance",
]


class ProblemKind(enum.Enum):
    ShiftedSphere = "ShiftedSphere"
    ShiftedRotatedRastrigin = "ShiftedRotatedRastrigin"
    Schwefel213 = "Schwefel213"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]

    @property
    def default_dim(self) -> int:
        return _DEFAULTS[self][0]

    @property
    def bounds(self) -> tuple[float, float]:
        return _DEFAULTS[self][1]

    @property
    def f_bias(self) -> float:
        return _DEFAULTS[self][2]

    @classmethod
    def parse(cls, name: str) -> "ProblemKind":
        key = name.strip().lower()
        if key in _ALIASES:
            return _ALIASES[key]
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown problem {name!r}; expected one of sphere, rastrigin, schwefel")

    @property
    def short_name(self) -> str:
        return {v: k for k, v in _ALIASES.items()}[self]


SPHERE, RASTRIGIN, SCHWEFEL = 0, 1, 2

_KIND_CODES = {
    ProblemKind.ShiftedSphere: SPHERE,
    ProblemKind.ShiftedRotatedRastrigin: RASTRIGIN,
    ProblemKind.Schwefel213: SCHWEFEL,
}
# dim, (lower, upper), f_bias
_DEFAULTS = {
    ProblemKind.ShiftedSphere: (100, (-100.0, 100.0), -450.0),
    ProblemKind.ShiftedRotatedRastrigin: (30, (-5.0, 5.0), -330.0),
    ProblemKind.Schwefel213: (10, (-math.pi, math.pi), -460.0),
}
_ALIASES = {
    "sphere": ProblemKind.ShiftedSphere,
    "rastrigin": ProblemKind.ShiftedRotatedRastrigin,
    "schwefel": ProblemKind.Schwefel213,
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """An immutable benchmark objective.

    Arrays that a kind does not use are empty. ``rotation`` is always a
    ``dim x dim`` matrix for Rastrigin (the identity for unrotated instances).
    ``schwefel_A`` caches the constant term ``A_i`` of the Schwefel function.
    """

    kind: ProblemKind
    dim: int
    seed: int
    lower: np.ndarray
    upper: np.ndarray
    f_bias: float
    shift: np.ndarray
    rotation: np.ndarray
    coeff_a: np.ndarray
    coeff_b: np.ndarray
    alpha: np.ndarray
    rotated: bool = False
    schwefel_A: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for name in ("lower", "upper", "shift", "rotation", "coeff_a", "coeff_b", "alpha"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.kind is ProblemKind.Schwefel213:
            A = _schwefel_inner(self.alpha, self.coeff_a.astype(np.float64), self.coeff_b.astype(np.float64))
        else:
            A = np.empty(0)
        object.__setattr__(self, "schwefel_A", _frozen(A))
        # float views of the integer coefficient matrices for the kernels
        object.__setattr__(self, "_fa", _frozen(self.coeff_a.astype(np.float64)))
        object.__setattr__(self, "_fb", _frozen(self.coeff_b.astype(np.float64)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        scalars = (self.kind, self.dim, self.seed, self.f_bias, self.rotated)
        if scalars != (other.kind, other.dim, other.seed, other.f_bias, other.rotated):
            return False
        return all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("lower", "upper", "shift", "rotation", "coeff_a", "coeff_b", "alpha")
        )

    __hash__ = None  # type: ignore[assignment]

    def kernel_args(self) -> tuple:
        """Arguments for :func:`evaluate_kernel`, after the genome."""
        return (self.kind.code, self.shift, self.rotation, self._fa, self._fb, self.schwefel_A, self.f_bias)


def make_instance(kind: ProblemKind, dim: int | None = None, seed: int = 0, rotate: bool | None = None) -> ProblemInstance:
    """Build a reproducible instance.

    The shift is uniform in the central 80% of the bounds. Rastrigin gets a
    Haar-random orthogonal matrix (QR of a Gaussian matrix) unless
    ``rotate=False``. Schwefel coefficients are integers uniform in
    [-100, 100] and ``alpha`` is uniform in [-pi, pi].
    """
    if dim is None:
        dim = kind.default_dim
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if rotate and kind is not ProblemKind.ShiftedRotatedRastrigin:
        raise ValueError(f"{kind.value} does not support rotation")
    rotated = kind is ProblemKind.ShiftedRotatedRastrigin and rotate is not False

    rng = np.random.default_rng([seed, kind.code, dim])
    lo, hi = kind.bounds
    lower = np.full(dim, lo)
    upper = np.full(dim, hi)
    empty = np.empty(0)
    empty_m = np.empty((0, 0))
    shift, rotation, a, b, alpha = empty, empty_m, np.empty((0, 0), np.int64), np.empty((0, 0), np.int64), empty

    if kind is ProblemKind.Schwefel213:
        a = rng.integers(-100, 101, size=(dim, dim))
        b = rng.integers(-100, 101, size=(dim, dim))
        alpha = rng.uniform(-math.pi, math.pi, size=dim)
    else:
        margin = 0.1 * (hi - lo)
        shift = rng.uniform(lo + margin, hi - margin, size=dim)
        if kind is ProblemKind.ShiftedRotatedRastrigin:
            rotation = random_rotation(dim, rng) if rotated else np.eye(dim)

    return ProblemInstance(
        kind=kind, dim=dim, seed=seed, lower=lower, upper=upper, f_bias=kind.f_bias,
        shift=shift, rotation=rotation, coeff_a=a, coeff_b=b, alpha=alpha, rotated=rotated,
    )


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    # sign fix makes the distribution Haar rather than QR-biased
    return q * np.sign(np.diag(r))


@njit(cache=True)
def _schwefel_inner(x, a, b):
    d = x.shape[0]
    s = np.sin(x)
    c = np.cos(x)
    out = np.empty(d)
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += a[i, j] * s[j] + b[i, j] * c[j]
        out[i] = acc
    return out


@njit(cache=True)
def evaluate_kernel(x, kind, shift, rotation, a, b, A, f_bias):
    """Unchecked objective value; shared by every compiled search loop."""
    d = x.shape[0]
    total = 0.0
    if kind == SPHERE:
        for i in range(d):
            z = x[i] - shift[i]
            total += z * z
    elif kind == RASTRIGIN:
        y = x - shift
        for i in range(d):
            z = 0.0
            for j in range(d):
                z += rotation[i, j] * y[j]
            total += z * z - 10.0 * math.cos(2.0 * math.pi * z) + 10.0
    else:
        B = _schwefel_inner(x, a, b)
        for i in range(d):
            diff = A[i] - B[i]
            total += diff * diff
    return total + f_bias


def evaluate(instance: ProblemInstance, x) -> float:
    """Objective value of ``x`` (minimisation).

    Raises ``ValueError`` for a wrong length, a non-finite gene or a gene
    outside the instance bounds. Clamping is the caller's responsibility.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != instance.dim:
        raise ValueError(f"genome has shape {x.shape}, expected ({instance.dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("genome contains non-finite genes")
    if np.any(x < instance.lower) or np.any(x > instance.upper):
        raise ValueError("genome lies outside the instance bounds")
    return float(evaluate_kernel(x, *instance.kernel_args()))


def optimum_of(instance: ProblemInstance) -> np.ndarray:
    if instance.kind is ProblemKind.Schwefel213:
        return instance.alpha.copy()
    return instance.shift.copy()


# -- text export -------------------------------------------------------------

_FMT = "%.17g"


def _fmt_row(values) -> str:
    return " ".join(_FMT % v for v in values)


def save_instance(instance: ProblemInstance, path) -> None:
    Path(path).write_text(format_instance(instance))


def format_instance(instance: ProblemInstance) -> str:
    """Render an instance as self-describing text.

    Scalars are ``key value`` lines; each array is a header line
    ``name rows cols`` followed by ``rows`` lines of decimal values with
    17 significant digits, so reloading is bit-exact.
    """
    lines = [
        "# evag problem instance",
        f"kind {instance.kind.value}",
        f"dim {instance.dim}",
        f"seed {instance.seed}",
        f"rotated {int(instance.rotated)}",
        f"f_bias {_FMT % instance.f_bias}",
    ]
    for name in ("lower", "upper", "shift", "alpha", "rotation", "coeff_a", "coeff_b"):
        arr = np.atleast_2d(getattr(instance, name))
        if arr.size == 0:
            lines.append(f"{name} 0 0")
            continue
        lines.append(f"{name} {arr.shape[0]} {arr.shape[1]}")
        if name.startswith("coeff"):
            lines.extend(" ".join(str(int(v)) for v in row) for row in arr)
        else:
            lines.extend(_fmt_row(row) for row in arr)
    return "\n".join(lines) + "\n"


def load_instance(path) -> ProblemInstance:
    """Read a file written by :func:`save_instance`.

    The file must describe a kind its own ``make_instance`` could produce; the
    stored arrays are used as-is, not regenerated.
    """
    raw = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    it = iter(raw)
    meta: dict[str, str] = {}
    arrays: dict[str, np.ndarray] = {}
    for line in it:
        parts = line.split()
        key = parts[0]
        if key in ("kind", "dim", "seed", "rotated", "f_bias"):
            meta[key] = parts[1]
            continue
        rows, cols = int(parts[1]), int(parts[2])
        dtype = np.int64 if key.startswith("coeff") else np.float64
        data = [next(it).split() for _ in range(rows)]
        arr = np.array(data, dtype=dtype).reshape(rows, cols)
        arrays[key] = arr
    kind = ProblemKind(meta["kind"])
    dim = int(meta["dim"])

    def vec(name):
        a = arrays[name]
        return a.reshape(-1) if a.size else np.empty(0)

    return ProblemInstance(
        kind=kind,
        dim=dim,
        seed=int(meta["seed"]),
        lower=vec("lower"),
        upper=vec("upper"),
        f_bias=float(meta["f_bias"]),
        shift=vec("shift"),
        rotation=arrays["rotation"] if arrays["rotation"].size else np.empty((0, 0)),
        coeff_a=arrays["coeff_a"] if arrays["coeff_a"].size else np.empty((0, 0), np.int64),
        coeff_b=arrays["coeff_b"] if arrays["coeff_b"].size else np.empty((0, 0), np.int64),
        alpha=vec("alpha"),
        rotated=bool(int(meta["rotated"])),
    )
