"""Potential functions on the integers, their classification and tilts."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, InvalidPotentialError, PotentialWindowError

DEFAULT_W_MAX = 64
_CONVEXITY_TOL = 1e-12


class Tri(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNCHECKED = "unchecked"

    def __bool__(self):
        return self is Tri.HOLDS


@dataclass(frozen=True)
class Classification:
    symmetric: Tri = Tri.UNCHECKED
    lipschitz: Tri = Tri.UNCHECKED
    abs_fkg: Tri = Tri.UNCHECKED
    w_max: int = 0


class PotentialSpec:
    """A convex potential V on the certified window [-w_max, w_max].

    ``func`` maps an integer numpy array to real values. Closed-form potentials
    can be widened with :meth:`widened`; table potentials cannot.
    """

    def __init__(
        self,
        name: str,
        func: Callable[[np.ndarray], np.ndarray] | None,
        w_max: int = DEFAULT_W_MAX,
        values: np.ndarray | None = None,
    ):
        if w_max < 1:
            raise ConfigurationError("potential window w_max must be >= 1")
        self.name = name
        self.func = func
        self.w_max = int(w_max)
        if values is None:
            if func is None:
                raise ConfigurationError("potential needs either a function or a value table")
            values = np.asarray(func(np.arange(-w_max, w_max + 1)), dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (2 * self.w_max + 1,):
            raise ConfigurationError(f"value table must have {2 * self.w_max + 1} entries")
        if not np.all(np.isfinite(values)):
            raise InvalidPotentialError(f"potential {name!r} has non-finite values")
        self._values = values
        self._values.setflags(write=False)
        second = values[2:] - 2 * values[1:-1] + values[:-2]
        scale = max(1.0, float(np.max(np.abs(values))))
        bad = np.flatnonzero(second < -_CONVEXITY_TOL * scale)
        if bad.size:
            k = int(bad[0]) - self.w_max + 1
            raise InvalidPotentialError(
                f"potential {name!r} is not convex: V(k+1)-2V(k)+V(k-1) = {second[bad[0]]:g} at k={k}"
            )
        self._classification: Classification | None = None

    def __repr__(self):
        return f"PotentialSpec({self.name!r}, w_max={self.w_max})"

    @property
    def values(self) -> np.ndarray:
        """V on ``-w_max..w_max`` (read-only)."""
        return self._values

    def widened(self, w_max: int) -> "PotentialSpec":
        """Same potential certified on a (possibly) larger window."""
        if w_max <= self.w_max:
            return self
        if self.func is None:
            raise PotentialWindowError(
                f"table potential {self.name!r} only covers |k| <= {self.w_max}, need {w_max}"
            )
        return PotentialSpec(self.name, self.func, w_max)

    def _check(self, k, limit):
        kk = np.asarray(k)
        if kk.size and int(np.max(np.abs(kk))) > limit:
            raise PotentialWindowError(
                f"argument {int(np.max(np.abs(kk)))} outside window |k| <= {limit} of {self.name!r}"
            )
        return kk

    def __call__(self, k):
        return self.evaluate(k)

    def evaluate(self, k):
        kk = self._check(k, self.w_max)
        out = self._values[kk.astype(np.int64) + self.w_max]
        return float(out) if np.ndim(out) == 0 else out

    def second_difference(self, k):
        kk = self._check(k, self.w_max - 1).astype(np.int64)
        v = self._values
        o = self.w_max
        out = v[kk + 1 + o] - 2 * v[kk + o] + v[kk - 1 + o]
        return float(out) if np.ndim(out) == 0 else out

    def classify(self) -> Classification:
        if self._classification is None:
            self._classification = classify(self)
        return self._classification

    @property
    def is_symmetric(self) -> bool:
        return bool(self.classify().symmetric)

    def edge_offsets(self, region) -> np.ndarray:
        return np.zeros(len(region.edges), dtype=np.int64)

    @property
    def base(self) -> "PotentialSpec":
        return self


def classify(V: PotentialSpec) -> Classification:
    """Symmetric / Lipschitz / |.|-FKG flags certified on V's window."""
    W = V.w_max
    if W < 2:
        raise ConfigurationError("classification needs w_max >= 2")
    v = V.values
    scale = max(1.0, float(np.max(np.abs(v))))
    tol = 1e-12 * scale
    symmetric = bool(np.all(np.abs(v - v[::-1]) <= tol))
    lipschitz = bool(np.all(np.abs(np.diff(v)) <= 1 + tol))
    second = V.second_difference(np.arange(0, W))
    abs_fkg = bool(np.all(np.diff(second) <= tol))
    as_tri = lambda b: Tri.HOLDS if b else Tri.FAILS
    return Classification(as_tri(symmetric), as_tri(lipschitz), as_tri(abs_fkg), W)


class TiltedPotential:
    """Edge potentials V'_xy(z) = V_xy(z + a(y) - a(x)) for a height shift a.

    The base family is V along each canonically oriented edge and
    V(-z) against it, so the tilted family stays consistent.
    """

    def __init__(self, base: PotentialSpec, a: Callable | Mapping):
        self._base = base
        self._a = a if callable(a) else (lambda v, _m=dict(a): _m.get(v, 0))
        self.name = f"tilt({base.name})"
        self.w_max = base.w_max

    def __repr__(self):
        return f"TiltedPotential({self._base!r})"

    @property
    def base(self) -> PotentialSpec:
        return self._base

    @property
    def values(self) -> np.ndarray:
        return self._base.values

    def a(self, v) -> int:
        return int(self._a(v))

    def offset(self, x, y) -> int:
        """δ_xy = a(y) - a(x) for the directed edge x -> y."""
        return self.a(y) - self.a(x)

    def edge_value(self, x, y, z, oriented: bool = True) -> float:
        """V'_xy(z). ``oriented`` says whether x -> y is the canonical direction."""
        w = z + self.offset(x, y)
        return self._base.evaluate(w if oriented else -w)

    def edge_potential(self, x, y) -> PotentialSpec:
        """z -> V'_xy(z) for the canonically oriented edge x -> y, as a potential."""
        d = self.offset(x, y)
        W = self._base.w_max - abs(d)
        base = self._base
        return PotentialSpec(
            f"{base.name}[{d:+d}]", None, W, values=base.values[base.w_max - W + d : base.w_max + W + d + 1]
        )

    def edge_offsets(self, region) -> np.ndarray:
        return np.array([self.offset(x, y) for x, y in region.edges], dtype=np.int64)

    def widened(self, w_max: int) -> "TiltedPotential":
        if w_max <= self.w_max:
            return self
        return TiltedPotential(self._base.widened(w_max), self._a)

    @property
    def is_symmetric(self) -> bool:
        return False

    def classify(self) -> Classification:
        base = self._base.classify()
        # shifting the argument preserves convexity and increments, not symmetry
        return Classification(Tri.UNCHECKED, base.lipschitz, Tri.UNCHECKED, base.w_max)


def tilt(V: PotentialSpec | TiltedPotential, a) -> TiltedPotential:
    """Tilt V by the height shift ``a``; tilts compose additively."""
    shift = a if callable(a) else (lambda v, _m=dict(a): _m.get(v, 0))
    if isinstance(V, TiltedPotential):
        inner = V
        return TiltedPotential(inner.base, lambda v: inner.a(v) + int(shift(v)))
    return TiltedPotential(V, shift)


def sos(w_max: int = DEFAULT_W_MAX) -> PotentialSpec:
    return PotentialSpec("sos", np.abs, w_max)


def discrete_gaussian(w_max: int = DEFAULT_W_MAX) -> PotentialSpec:
    return PotentialSpec("dg", np.square, w_max)


def quartic(w_max: int = DEFAULT_W_MAX) -> PotentialSpec:
    return PotentialSpec("quartic", lambda k: np.asarray(k, dtype=float) ** 4, w_max)


BUILTINS = {
    "sos": sos,
    "dg": discrete_gaussian,
    "discrete_gaussian": discrete_gaussian,
    "quartic": quartic,
}


def get_potential(name: str, w_max: int = DEFAULT_W_MAX) -> PotentialSpec:
    """Built-in potential by name, or a table file path."""
    if name in BUILTINS:
        return BUILTINS[name](w_max)
    if Path(name).is_file():
        return load_potential_table(name)
    raise ConfigurationError(
        f"unknown potential {name!r}; use one of {sorted(BUILTINS)} or a table file"
    )


def load_potential_table(path, symmetric_completion: bool = False) -> PotentialSpec:
    """Read a ``k value`` table. Blank lines and ``#`` comments are ignored.

    The certified window is the largest W with every k in [-W, W] present.
    With ``symmetric_completion`` missing negative entries are mirrored.
    """
    table: dict[int, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigurationError(f"{path}:{lineno}: expected 'k value', got {raw!r}")
        try:
            k, val = int(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: cannot parse {raw!r}") from None
        if k in table and table[k] != val:
            raise ConfigurationError(f"{path}:{lineno}: duplicate entry for k={k}")
        table[k] = val
    if symmetric_completion:
        for k, val in list(table.items()):
            table.setdefault(-k, val)
    W = 0
    while (W + 1) in table and -(W + 1) in table:
        W += 1
    if 0 not in table or W < 2:
        raise ConfigurationError(f"{path}: table must cover at least -2..2 contiguously")
    values = np.array([table[k] for k in range(-W, W + 1)], dtype=float)
    name = Path(path).stem
    return PotentialSpec(name, None, W, values=values)


def lipschitz_constant(V: PotentialSpec) -> float:
    return float(np.max(np.abs(np.diff(V.values))))

