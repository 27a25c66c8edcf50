"""Scalar coupling nonlinearities and the interconnections built from them.

A coupling function maps the projected relative state ``s`` of a pair of
oscillators to a scalar force.  Every admissible function satisfies

* the sector condition ``f(0) = 0`` and ``s * f(s) >= 0``, and
* either ``f == 0`` identically or ``|f(s)| >= alpha(|s|)`` for some class-K
  function ``alpha``.

The catalog below is closed (no user closures) so that networks stay
serializable and every member ships with a certified minorant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "KINDS",
    "MINORANT_FAMILIES",
    "CouplingFunction",
    "ClassKMinorant",
    "Interconnection",
    "ValidationReport",
    "CouplingError",
    "eval_coupling",
    "validate_sector",
    "validate_minorant",
    "default_sector_grid",
    "default_minorant_grid",
    "catalog",
    "example_network",
    "paper_example_edges",
]

KINDS = ("zero", "linear", "cubic", "saturation", "deadzone")
MINORANT_FAMILIES = ("linear", "power", "saturated", "rational", "exp-saturated")


class CouplingError(ValueError):
    """Invalid coupling parameters or misuse of a validator."""


def default_sector_grid(n: int = 10_000, bound: float = 100.0) -> np.ndarray:
    """Uniform grid on [-bound, bound] with 0 forced in."""
    return np.union1d(np.linspace(-bound, bound, n), [0.0])


def default_minorant_grid(n: int = 10_000, bound: float = 100.0) -> np.ndarray:
    return np.linspace(0.0, bound, n)


@dataclass(frozen=True)
class CouplingFunction:
    """One member of the coupling catalog.

    ``kind`` selects the shape; unused parameters are ignored.

    =============  ==================================================
    zero           ``0``
    linear         ``gain * s``
    cubic          ``gain * s**3``
    saturation     ``level * tanh(gain * s / level)``
    deadzone       ``slope * s + gain * sign(s) * max(|s| - width, 0)``
    =============  ==================================================
    """

    kind: str = "zero"
    gain: float = 0.0
    level: float = 1.0
    width: float = 0.0
    slope: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CouplingError(f"unknown coupling kind {self.kind!r}")
        for name in ("gain", "level", "width", "slope"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise CouplingError(f"{name} must be finite, got {value!r}")
        if self.kind == "zero":
            return
        if self.gain <= 0.0:
            raise CouplingError(f"{self.kind}: gain must be positive, got {self.gain!r}")
        if self.kind == "saturation" and self.level <= 0.0:
            raise CouplingError(f"saturation: level must be positive, got {self.level!r}")
        if self.kind == "deadzone":
            if self.width < 0.0:
                raise CouplingError(f"deadzone: width must be nonnegative, got {self.width!r}")
            if self.slope <= 0.0:
                raise CouplingError(f"deadzone: minorant slope must be positive, got {self.slope!r}")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "CouplingFunction":
        return cls("zero")

    @classmethod
    def linear(cls, gain: float) -> "CouplingFunction":
        return cls("linear", gain=float(gain))

    @classmethod
    def cubic(cls, gain: float) -> "CouplingFunction":
        return cls("cubic", gain=float(gain))

    @classmethod
    def saturation(cls, gain: float, level: float) -> "CouplingFunction":
        return cls("saturation", gain=float(gain), level=float(level))

    @classmethod
    def deadzone(cls, gain: float, width: float, slope: float) -> "CouplingFunction":
        return cls("deadzone", gain=float(gain), width=float(width), slope=float(slope))

    @classmethod
    def from_dict(cls, d: Mapping) -> "CouplingFunction":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in KINDS:
            raise CouplingError(f"unknown coupling kind {kind!r}")
        allowed = {"zero": (), "linear": ("gain",), "cubic": ("gain",),
                   "saturation": ("gain", "level"),
                   "deadzone": ("gain", "width", "slope")}[kind]
        extra = set(d) - set(allowed)
        if extra:
            raise CouplingError(f"{kind}: unexpected parameters {sorted(extra)}")
        missing = [k for k in allowed if k not in d]
        if missing:
            raise CouplingError(f"{kind}: missing parameters {missing}")
        try:
            params = {k: float(d[k]) for k in allowed}
        except (TypeError, ValueError) as exc:
            raise CouplingError(f"{kind}: parameters must be numbers") from exc
        return cls(kind, **params)

    def to_dict(self) -> dict:
        keys = {"zero": (), "linear": ("gain",), "cubic": ("gain",),
                "saturation": ("gain", "level"),
                "deadzone": ("gain", "width", "slope")}[self.kind]
        return {"kind": self.kind, **{k: getattr(self, k) for k in keys}}

    # -- evaluation -------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        kind = self.kind
        if kind == "zero":
            return np.zeros_like(s)
        if kind == "linear":
            return self.gain * s
        if kind == "cubic":
            return self.gain * s * s * s
        if kind == "saturation":
            return self.level * np.tanh((self.gain / self.level) * s)
        excess = np.maximum(np.abs(s) - self.width, 0.0)
        return self.slope * s + self.gain * np.sign(s) * excess

    def breakpoints(self) -> tuple[float, ...]:
        """Arguments where the function has a slope discontinuity."""
        if self.kind == "deadzone" and self.width > 0.0:
            return (-self.width, self.width)
        return ()

    def lipschitz(self, radius: float) -> float:
        """Lipschitz bound of the function on ``[-radius, radius]``."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "cubic":
            return 3.0 * self.gain * radius * radius
        if self.kind == "deadzone":
            return self.gain + self.slope
        return self.gain

    def minorant(self) -> "ClassKMinorant":
        """The class-K lower bound certified for this member."""
        if self.kind == "zero":
            raise CouplingError("the zero coupling has no class-K minorant")
        if self.kind == "linear":
            return ClassKMinorant("linear", c=self.gain)
        if self.kind == "cubic":
            return ClassKMinorant("power", c=self.gain, k=3.0)
        if self.kind == "saturation":
            # tanh(u) >= u / (1 + u) for u >= 0
            return ClassKMinorant("rational", c=self.gain, cap=self.level)
        return ClassKMinorant("linear", c=self.slope)


def eval_coupling(f: CouplingFunction, s: float) -> float:
    return float(f(s))


@dataclass(frozen=True)
class ClassKMinorant:
    """Parametric lower bound ``alpha`` for condition (ii).

    Families: ``linear`` ``c*s``; ``power`` ``c*s**k``; ``saturated``
    ``min(c*s, cap)``; ``rational`` ``c*s*cap/(cap + c*s)``;
    ``exp-saturated`` ``cap*(1 - exp(-c*s/cap))``.

    The ``saturated`` family is constant beyond ``cap/c`` and so is not
    strictly increasing there; it still certifies condition (ii) because
    ``min(a, b) >= a*b/(a + b)``, which is the ``rational`` family.  The
    ``exp-saturated`` family rounds to ``cap`` for large arguments, so only
    ``rational`` stays strictly increasing in floating point on wide grids.
    """

    family: str
    c: float
    k: float = 1.0
    cap: float = math.inf

    def __post_init__(self):
        if self.family not in MINORANT_FAMILIES:
            raise CouplingError(f"unknown minorant family {self.family!r}")
        if not self.c > 0.0:
            raise CouplingError("minorant coefficient c must be positive")
        if self.family == "power" and not self.k > 0.0:
            raise CouplingError("power minorant exponent must be positive")
        if self.family in ("saturated", "rational", "exp-saturated") and not 0.0 < self.cap < math.inf:
            raise CouplingError(f"{self.family} minorant needs a finite positive cap")

    @classmethod
    def linear(cls, c: float) -> "ClassKMinorant":
        return cls("linear", c=c)

    @classmethod
    def power(cls, c: float, k: float) -> "ClassKMinorant":
        return cls("power", c=c, k=k)

    @classmethod
    def saturated(cls, c: float, cap: float) -> "ClassKMinorant":
        return cls("saturated", c=c, cap=cap)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "linear":
            return self.c * s
        if self.family == "power":
            return self.c * s ** self.k
        if self.family == "saturated":
            return np.minimum(self.c * s, self.cap)
        if self.family == "rational":
            cs = self.c * s
            return cs * self.cap / (self.cap + cs)
        return self.cap * -np.expm1(-(self.c / self.cap) * s)

    def is_class_k(self, grid: Sequence[float]) -> bool:
        """Zero at zero and increasing on ``grid`` (weakly past the cap for ``saturated``)."""
        grid = np.unique(np.asarray(grid, dtype=float))
        if self(0.0) != 0.0:
            return False
        values = self(grid)
        steps = np.diff(values)
        if self.family == "saturated":
            below = grid[1:] <= self.cap / self.c
            return bool(np.all(steps >= 0.0) and np.all(steps[below] > 0.0))
        return bool(np.all(steps > 0.0))


@dataclass
class ValidationReport:
    """Outcome of a grid-based condition check; empty ``violations`` means pass."""

    condition: str
    checked: int
    violations: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"condition": self.condition, "checked": self.checked,
                "ok": self.ok, "violations": list(self.violations)}


def _as_grid(grid) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise CouplingError("validation grid is empty")
    return grid


def validate_sector(f, grid=None) -> ValidationReport:
    """Check ``f(0) == 0`` and ``s*f(s) >= 0`` on ``grid``.

    ``f`` may be any vectorized callable so that hand-built counterexamples
    can be checked too.
    """
    grid = default_sector_grid() if grid is None else _as_grid(grid)
    values = np.asarray(f(grid), dtype=float)
    bad = (grid * values < 0.0) | ((grid == 0.0) & (values != 0.0)) | ~np.isfinite(values)
    at_zero = np.asarray(f(np.array([0.0])), dtype=float)
    violations = [float(s) for s in grid[bad]]
    if at_zero[0] != 0.0 and 0.0 not in violations:
        violations.append(0.0)
    return ValidationReport("sector", int(grid.size), sorted(violations))


def validate_minorant(f, alpha: ClassKMinorant, grid=None) -> ValidationReport:
    """Check ``|f(s)| >= alpha(|s|)`` on a grid of nonnegative points.

    Both ``s`` and ``-s`` are tested for each grid point.  The comparison
    allows a few ulps of rounding, since a tight minorant (``c*s**3`` for a
    cubic) can differ from the function in the last bit.
    """
    if isinstance(f, CouplingFunction) and f.is_zero:
        raise CouplingError("minorant check does not apply to the zero coupling")
    grid = default_minorant_grid() if grid is None else _as_grid(grid)
    if np.any(grid < 0.0):
        raise CouplingError("minorant grid must be nonnegative")
    bound = alpha(grid) * (1.0 - 8.0 * np.finfo(float).eps)
    bad = (np.abs(f(grid)) < bound) | (np.abs(f(-grid)) < bound)
    return ValidationReport("minorant", int(grid.size), [float(s) for s in grid[bad]])


def catalog() -> dict[str, CouplingFunction]:
    """One representative member per non-zero kind, used across the tests and example configs."""
    return {
        "linear": CouplingFunction.linear(1.0),
        "cubic": CouplingFunction.cubic(1.0),
        "saturation": CouplingFunction.saturation(1.0, 1.0),
        "deadzone": CouplingFunction.deadzone(1.0, 0.5, 1.0),
    }


class Interconnection:
    """A ``p x p`` array of coupling functions with a zero diagonal.

    Entry ``(i, j)`` (0-based) is the function through which oscillator ``i``
    listens to oscillator ``j``.
    """

    def __init__(self, functions: Sequence[Sequence[CouplingFunction]]):
        rows = [tuple(row) for row in functions]
        p = len(rows)
        if p < 1:
            raise CouplingError("an interconnection needs at least one node")
        for i, row in enumerate(rows):
            if len(row) != p:
                raise CouplingError(f"row {i} has {len(row)} entries, expected {p}")
            for j, f in enumerate(row):
                if not isinstance(f, CouplingFunction):
                    raise CouplingError(f"entry ({i}, {j}) is not a CouplingFunction")
                if i == j and not f.is_zero:
                    raise CouplingError(f"diagonal entry ({i}, {i}) must be zero")
        self.p = p
        self.functions = tuple(rows)

    @classmethod
    def from_edges(cls, p: int, edges: Mapping[tuple[int, int], CouplingFunction]
                   ) -> "Interconnection":
        zero = CouplingFunction.zero()
        grid = [[zero] * p for _ in range(p)]
        for (i, j), f in edges.items():
            if not (0 <= i < p and 0 <= j < p):
                raise CouplingError(f"edge ({i}, {j}) out of range for p={p}")
            if i == j:
                raise CouplingError(f"self-coupling ({i}, {i}) is not allowed")
            grid[i][j] = f
        return cls(grid)

    @classmethod
    def complete(cls, p: int, f: CouplingFunction) -> "Interconnection":
        return cls.from_edges(p, {(i, j): f for i in range(p) for j in range(p) if i != j})

    @classmethod
    def uncoupled(cls, p: int) -> "Interconnection":
        return cls.from_edges(p, {})

    def __getitem__(self, ij: tuple[int, int]) -> CouplingFunction:
        i, j = ij
        return self.functions[i][j]

    def __eq__(self, other):
        return isinstance(other, Interconnection) and self.functions == other.functions

    def __hash__(self):
        return hash(self.functions)

    def __repr__(self):
        return f"Interconnection(p={self.p}, edges={self.edges()})"

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.p) for j in range(self.p)
                if not self.functions[i][j].is_zero]

    def edge_groups(self) -> list[tuple[CouplingFunction, np.ndarray, np.ndarray]]:
        """Non-zero entries grouped by identical function: ``(f, rows, cols)``.

        Ordering is deterministic (first appearance in row-major order).
        """
        groups: dict[CouplingFunction, tuple[list[int], list[int]]] = {}
        for i, j in self.edges():
            rows, cols = groups.setdefault(self.functions[i][j], ([], []))
            rows.append(i)
            cols.append(j)
        return [(f, np.array(r, dtype=int), np.array(c, dtype=int))
                for f, (r, c) in groups.items()]

    def validate(self, sector_grid=None, minorant_grid=None) -> list[tuple[tuple[int, int], ValidationReport]]:
        """Run both condition checks on every non-zero entry; return the failing ones."""
        failures = []
        for i, j in self.edges():
            f = self.functions[i][j]
            for report in (validate_sector(f, sector_grid),
                           validate_minorant(f, f.minorant(), minorant_grid)):
                if not report.ok:
                    failures.append(((i, j), report))
        return failures

    def to_list(self) -> list[dict]:
        """Edge list with 1-based node indices, as used in config files."""
        return [{"i": i + 1, "j": j + 1, **self.functions[i][j].to_dict()}
                for i, j in self.edges()]


def paper_example_edges() -> list[tuple[int, int]]:
    """The four edges of the 4-node example network, 0-based."""
    return [(0, 2), (1, 2), (1, 3), (2, 1)]


def example_network(functions: Iterable[CouplingFunction] | CouplingFunction | None = None
                    ) -> Interconnection:
    """The 4-node example network.

    ``functions`` is either one function used on every edge or four functions
    assigned in edge order 1->3, 2->3, 2->4, 3->2.  By default the four
    catalog shapes are used, one per edge.
    """
    if functions is None:
        functions = list(catalog().values())
    elif isinstance(functions, CouplingFunction):
        functions = [functions] * 4
    functions = list(functions)
    if len(functions) != 4:
        raise CouplingError("the example network has exactly four edges")
    return Interconnection.from_edges(4, dict(zip(paper_example_edges(), functions)))
