"""Vector fields of the oscillator array and a fixed-step RK4 integrator.

States are numpy arrays of shape ``(..., p, 2)``: one ``(q, p)`` block per
oscillator, optionally with leading batch axes.  Three frames are used:

* ``original``  d xi_i = S xi_i + H^T sum_j f_ij(H (xi_j - xi_i))
* ``rotating``  x = exp(-S t) xi, leaving only the time-periodic coupling
* ``averaged``  the rotation-averaged coupling (see :mod:`harmsync.averaging`)

with ``S = [[0, w], [-w, 0]]``.  Its exponential is the clockwise rotation
``exp(S t) = [[cos wt, sin wt], [-sin wt, cos wt]]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .averaging import DEFAULT_QUADRATURE, AveragedField, QuadratureSpec
from .coupling import Interconnection

__all__ = [
    "FRAMES",
    "ArrayState",
    "SystemSpec",
    "IntegratorSpec",
    "Trajectory",
    "IntegrationError",
    "rotation",
    "original_field",
    "rotating_field",
    "averaged_field_op",
    "to_rotating_frame",
    "from_rotating_frame",
    "make_field",
    "integrate",
    "simulate",
]

FRAMES = ("original", "rotating", "averaged")
COORD_PREFIX = {"original": ("q", "p"), "rotating": ("x", "y"), "averaged": ("u", "v")}


class IntegrationError(RuntimeError):
    """Raised when the state stops being finite."""

    def __init__(self, time: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={time!r}")
        self.time = time


@dataclass
class ArrayState:
    coords: np.ndarray
    frame: str = "original"

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            if coords.size % 2:
                raise ValueError("flat state needs an even length")
            coords = coords.reshape(-1, 2)
        if coords.ndim < 2 or coords.shape[-1] != 2:
            raise ValueError("state must have shape (..., p, 2)")
        if not np.all(np.isfinite(coords)):
            raise ValueError("state entries must be finite")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        self.coords = coords

    @property
    def p(self) -> int:
        return self.coords.shape[-2]

    def flat(self) -> np.ndarray:
        return self.coords.reshape(*self.coords.shape[:-2], -1)


@dataclass(frozen=True)
class SystemSpec:
    net: Interconnection
    omega: float
    H: tuple[float, float] = (0.0, 1.0)
    frame: str = "original"
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError("omega must be positive")
        h = tuple(float(v) for v in self.H)
        if len(h) != 2 or math.hypot(*h) == 0.0:
            raise ValueError("H must be a nonzero 2-vector")
        object.__setattr__(self, "H", h)
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def amplitude(self) -> float:
        return math.hypot(*self.H)

    def with_frame(self, frame: str) -> "SystemSpec":
        return SystemSpec(self.net, self.omega, self.H, frame, self.quadrature)

    def to_dict(self) -> dict:
        return {"omega": self.omega, "H": list(self.H), "frame": self.frame,
                "couplings": self.net.to_list(), "p": self.net.p,
                "quadrature": self.quadrature.to_dict()}


@dataclass(frozen=True)
class IntegratorSpec:
    """Classical RK4 with step ``min(h0, (2 pi / omega) / steps_per_period)``.

    ``sample_dt`` (optional) fixes the output grid; the step is then shrunk
    so that it divides ``sample_dt``.  Otherwise every ``stride``-th step is
    recorded.
    """

    h0: float = 0.01
    steps_per_period: int = 256
    stride: int = 1
    sample_dt: float | None = None
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError("only fixed-step rk4 is available")
        if not self.h0 > 0.0:
            raise ValueError("h0 must be positive")
        if self.steps_per_period < 20:
            raise ValueError("steps_per_period must be at least 20")
        if self.stride < 1:
            raise ValueError("stride must be a positive integer")
        if self.sample_dt is not None and not self.sample_dt > 0.0:
            raise ValueError("sample_dt must be positive")

    def step_bound(self, omega: float | None) -> float:
        if omega is None:
            return self.h0
        return min(self.h0, 2.0 * math.pi / omega / self.steps_per_period)

    @classmethod
    def from_dict(cls, d) -> "IntegratorSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return {"method": self.method, "h0": self.h0, "steps_per_period": self.steps_per_period,
                "stride": self.stride, "sample_dt": self.sample_dt}


@dataclass
class Trajectory:
    frame: str
    times: np.ndarray
    states: np.ndarray          # (n_samples, ..., p, 2)
    system: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    step: float = 0.0

    def __len__(self):
        return len(self.times)

    @property
    def p(self) -> int:
        return self.states.shape[-2]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        """Write ``t`` then ``2p`` state columns; batched trajectories are rejected."""
        if self.states.ndim != 3:
            raise ValueError("only unbatched trajectories can be written as CSV")
        a, b = COORD_PREFIX[self.frame]
        header = ["t"] + [f"{c}{i + 1}" for i in range(self.p) for c in (a, b)]
        rows = np.column_stack([self.times, self.states.reshape(len(self.times), -1)])
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def rotation(omega: float, t: float) -> np.ndarray:
    """``exp(S(omega) t)``."""
    c, s = math.cos(omega * t), math.sin(omega * t)
    return np.array([[c, s], [-s, c]])


def to_rotating_frame(state, t: float, omega: float) -> np.ndarray:
    """``x_i = exp(-S t) xi_i`` applied blockwise."""
    xi = np.asarray(state.coords if isinstance(state, ArrayState) else state, dtype=float)
    # row-vector form: x = xi @ exp(-S t)^T = xi @ exp(S t)
    return xi @ rotation(omega, t)


def from_rotating_frame(state, t: float, omega: float) -> np.ndarray:
    x = np.asarray(state.coords if isinstance(state, ArrayState) else state, dtype=float)
    return x @ rotation(omega, t).T


class _CouplingSum:
    """Precomputed ``sum_j f_ij(c . (z_j - z_i))`` for every node ``i``."""

    def __init__(self, net: Interconnection):
        self.p = net.p
        self.groups = []
        for f, rows, cols in net.edge_groups():
            scatter = np.zeros((rows.size, net.p))
            scatter[np.arange(rows.size), rows] = 1.0
            self.groups.append((f, rows, cols, scatter))

    def __call__(self, z, c) -> np.ndarray:
        proj = z[..., 0] * c[0] + z[..., 1] * c[1]
        total = np.zeros(proj.shape)
        for f, rows, cols, scatter in self.groups:
            total += f(proj[..., cols] - proj[..., rows]) @ scatter
        return total


def make_field(spec: SystemSpec) -> Callable[[float, np.ndarray], np.ndarray]:
    """Return ``field(t, z)`` for ``spec.frame`` acting on ``(..., p, 2)`` arrays."""
    omega = spec.omega
    h0, h1 = spec.H
    if spec.frame == "averaged":
        avg = AveragedField(spec.net, spec.quadrature, spec.amplitude)
        return lambda t, z: avg(z)
    coupling = _CouplingSum(spec.net)
    if spec.frame == "original":
        H = np.array(spec.H)

        def original(t, z):
            out = np.empty(z.shape)
            out[..., 0] = omega * z[..., 1]
            out[..., 1] = -omega * z[..., 0]
            if coupling.groups:
                out += coupling(z, H)[..., None] * H
            return out

        return original

    def rotating(t, z):
        c, s = math.cos(omega * t), math.sin(omega * t)
        row = np.array([h0 * c - h1 * s, h0 * s + h1 * c])    # H exp(S t)
        if not coupling.groups:
            return np.zeros(z.shape)
        return coupling(z, row)[..., None] * row

    return rotating


def _coords(state) -> np.ndarray:
    return np.asarray(state.coords if isinstance(state, ArrayState) else state, dtype=float)


def original_field(state, t: float, spec: SystemSpec) -> np.ndarray:
    return make_field(spec.with_frame("original"))(t, _coords(state))


def rotating_field(state, t: float, spec: SystemSpec) -> np.ndarray:
    return make_field(spec.with_frame("rotating"))(t, _coords(state))


def averaged_field_op(state, spec: SystemSpec) -> np.ndarray:
    return make_field(spec.with_frame("averaged"))(0.0, _coords(state))


def _grid(t_end: float, ispec: IntegratorSpec, omega: float | None) -> tuple[int, int, float]:
    """Return (n_steps, record_every, h) for a uniform grid ending exactly at ``t_end``."""
    hmax = ispec.step_bound(omega)
    if ispec.sample_dt is not None:
        n_samples = max(1, int(round(t_end / ispec.sample_dt)))
        if not math.isclose(n_samples * ispec.sample_dt, t_end, rel_tol=1e-9):
            raise ValueError("t_end must be a multiple of sample_dt")
        every = max(1, math.ceil(ispec.sample_dt / hmax * (1.0 - 1e-12)))
        n = n_samples * every
    else:
        every = ispec.stride
        n = max(1, math.ceil(t_end / hmax * (1.0 - 1e-12)))
        n = math.ceil(n / every) * every
    return n, every, t_end / n


def integrate(field, x0, t_end: float, ispec: IntegratorSpec = IntegratorSpec(),
              omega: float | None = None, frame: str = "original",
              system: dict | None = None) -> Trajectory:
    """Classical RK4 on a uniform grid from ``t = 0`` to ``t_end``.

    ``field(t, z)`` returns the derivative.  ``omega`` ties the step to the
    rotation period; it is required for time-varying fields.  Deterministic:
    sample times are ``k * h`` and no state is shared between calls.
    """
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    y = _coords(x0).copy()
    if not np.all(np.isfinite(y)):
        raise IntegrationError(0.0, "non-finite initial state")
    n, every, h = _grid(t_end, ispec, omega)
    n_out = n // every + 1
    states = np.empty((n_out,) + y.shape)
    states[0] = y
    half = 0.5 * h
    # overflow is reported through IntegrationError, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            t = k * h
            k1 = field(t, y)
            k2 = field(t + half, y + half * k1)
            k3 = field(t + half, y + half * k2)
            k4 = field(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise IntegrationError((k + 1) * h)
            if (k + 1) % every == 0:
                states[(k + 1) // every] = y
    times = np.arange(n_out) * (every * h)
    times[-1] = t_end
    return Trajectory(frame, times, states, dict(system or {}),
                      {**ispec.to_dict(), "step": h}, h)


def simulate(spec: SystemSpec, x0, t_end: float, ispec: IntegratorSpec = IntegratorSpec()
             ) -> Trajectory:
    """Integrate ``spec`` in its frame; the step follows omega unless the field is autonomous."""
    omega = None if spec.frame == "averaged" else spec.omega
    return integrate(make_field(spec), x0, t_end, ispec, omega, spec.frame, spec.to_dict())
