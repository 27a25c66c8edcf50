"""Time averages of the rotating-frame coupling terms.

Over one rotation the pair term ``h(t)^T f(h(t) . x)`` averages to a vector
parallel to ``x``; its length is the radial profile

    rho(r) = (A / 2 pi) * integral_0^{2 pi} f(A r sin phi) sin phi dphi

with ``A = |H|`` (``A = 1`` for the default output row).  This module
evaluates that integral by panel quadrature, provides the direct 2-D average
as an independent check, and assembles the averaged network field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coupling import CouplingFunction, Interconnection

__all__ = [
    "QuadratureSpec",
    "RadialProfile",
    "AveragedField",
    "rho",
    "rho_lower_bound",
    "cosine_component",
    "average_vector_oracle",
    "build_averaged_field",
]

TWO_PI = 2.0 * math.pi
RULES = ("gauss-legendre", "simpson")


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite rule on [0, 2 pi].

    ``nodes`` is the nominal total node count.  Gauss-Legendre uses panels of
    ``order`` nodes; Simpson uses ``nodes`` subintervals.  The interval is
    always cut at the kinks and sign changes of the integrand, so the actual
    count can exceed the nominal one by a few panels.
    """

    rule: str = "gauss-legendre"
    nodes: int = 2048
    periodic: bool = True
    order: int = 16

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.nodes < 16:
            raise ValueError("quadrature needs at least 16 nodes")
        if self.rule == "simpson" and self.nodes % 2:
            raise ValueError("Simpson's rule needs an even node count")
        if self.order < 1:
            raise ValueError("panel order must be positive")

    @classmethod
    def from_dict(cls, d) -> "QuadratureSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "nodes": self.nodes,
                "periodic": self.periodic, "order": self.order}


DEFAULT_QUADRATURE = QuadratureSpec()


@lru_cache(maxsize=None)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _simpson_unit(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Simpson on [0, 1] with ``m`` (even) subintervals."""
    x = np.linspace(0.0, 1.0, m + 1)
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w / (3.0 * m)


def _nodes_on(cuts: np.ndarray, q: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Composite nodes/weights over [cuts[0], cuts[-1]], one block per cut piece."""
    lengths = np.diff(cuts)
    keep = lengths > 0.0
    starts, lengths = cuts[:-1][keep], lengths[keep]
    total = cuts[-1] - cuts[0]
    xs, ws = [], []
    if q.rule == "gauss-legendre":
        panels_total = max(1, q.nodes // q.order)
        gx, gw = _legendre(q.order)
        for a, length in zip(starts, lengths):
            n = max(1, int(math.ceil(panels_total * length / total)))
            width = length / n
            left = a + width * np.arange(n)
            xs.append((left[:, None] + 0.5 * width * (gx + 1.0)).ravel())
            ws.append(np.tile(0.5 * width * gw, n))
    else:
        for a, length in zip(starts, lengths):
            m = max(2, 2 * int(math.ceil(q.nodes * length / (2.0 * total))))
            ux, uw = _simpson_unit(m)
            xs.append(a + length * ux)
            ws.append(length * uw)
    return np.concatenate(xs), np.concatenate(ws)


_BASE_CUTS = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi, TWO_PI)


@lru_cache(maxsize=64)
def _plain_nodes(q: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    phi, w = _nodes_on(np.array(_BASE_CUTS), q)
    phi.flags.writeable = False
    w.flags.writeable = False
    return phi, w


def _kinked_nodes(f: CouplingFunction, radii: np.ndarray, q: QuadratureSpec):
    """Per-radius nodes for ``g(radius * sin(phi))`` with ``f`` kinked.

    Every radius gets the same piece layout (zero-length pieces where a
    breakpoint lies beyond the radius) and the same number of panels per
    piece, so the result is a dense ``(len(radii), n)`` array.
    """
    mags = sorted({abs(b) for b in f.breakpoints() if b != 0.0})
    with np.errstate(divide="ignore"):
        ratio = np.divide.outer(np.asarray(mags), radii)
    a = np.arcsin(np.minimum(ratio, 1.0))                       # (n_breaks, n_r)
    base = np.broadcast_to(np.array(_BASE_CUTS)[:, None], (len(_BASE_CUTS), radii.size))
    cuts = np.sort(np.concatenate([base, a, math.pi - a, math.pi + a, TWO_PI - a]), axis=0)
    pieces = cuts.shape[0] - 1
    if q.rule == "gauss-legendre":
        panels = max(1, (q.nodes // q.order) // pieces)
        gx, gw = _legendre(q.order)
        ux = ((np.arange(panels)[:, None] + 0.5 * (gx + 1.0)) / panels).ravel()
        uw = np.tile(gw / (2.0 * panels), panels)
    else:
        m = max(2, 2 * int(math.ceil(q.nodes / (2.0 * pieces))))
        ux, uw = _simpson_unit(m)
    lengths = np.diff(cuts, axis=0).T                           # (n_r, pieces)
    phi = cuts[:-1].T[:, :, None] + lengths[:, :, None] * ux
    w = lengths[:, :, None] * uw
    return phi.reshape(radii.size, -1), w.reshape(radii.size, -1)


def rho(f: CouplingFunction, r, q: QuadratureSpec = DEFAULT_QUADRATURE,
        amplitude: float = 1.0):
    """Radial profile of the averaged coupling at radius ``r`` (scalar or array)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0):
        raise ValueError("rho is defined for r >= 0")
    if f.is_zero:
        out = np.zeros_like(r_arr)
        return float(out) if out.ndim == 0 else out
    scale = amplitude / TWO_PI
    radii = amplitude * r_arr.ravel()
    if f.breakpoints():
        phi, w = _kinked_nodes(f, radii, q)
        s = np.sin(phi)
        values = scale * np.sum(w * s * f(radii[:, None] * s), axis=1)
    else:
        phi, w = _plain_nodes(q)
        s = np.sin(phi)
        values = scale * (f(np.multiply.outer(radii, s)) @ (w * s))
    values[radii == 0.0] = 0.0
    out = values.reshape(r_arr.shape)
    return float(out) if out.ndim == 0 else out


def rho_lower_bound(f: CouplingFunction, r, amplitude: float = 1.0):
    """A positive lower bound for ``rho`` built from the coupling's minorant.

    On the set where ``|sin phi| >= 1/2`` (total length ``4 pi / 3``) the
    integrand is at least ``alpha(A r / 2) / 2``, and it is nonnegative
    elsewhere, so ``rho(r) >= A * alpha(A r / 2) / 3``.
    """
    r = np.asarray(r, dtype=float)
    if f.is_zero:
        out = np.zeros_like(r)
    else:
        out = amplitude * np.asarray(f.minorant()(0.5 * amplitude * r)) / 3.0
    return float(out) if out.ndim == 0 else out


def cosine_component(f: CouplingFunction, r: float, q: QuadratureSpec = DEFAULT_QUADRATURE,
                     amplitude: float = 1.0) -> float:
    """The companion integral with ``cos(phi)``; vanishes for every admissible ``f``."""
    if r < 0.0:
        raise ValueError("r must be nonnegative")
    radius = amplitude * r
    if f.breakpoints():
        phi, w = _kinked_nodes(f, np.array([radius]), q)
        phi, w = phi[0], w[0]
    else:
        phi, w = _plain_nodes(q)
    return float(amplitude / TWO_PI * np.dot(w * np.cos(phi), f(radius * np.sin(phi))))


def average_vector_oracle(f: CouplingFunction, x, q: QuadratureSpec = DEFAULT_QUADRATURE,
                          amplitude: float = 1.0, split: bool = True) -> np.ndarray:
    """Direct average of ``v(phi) f(v(phi) . x)`` with ``v = A(-sin phi, cos phi)``.

    Independent of the radial profile: it integrates the 2-D integrand as
    written.  With ``split`` the interval is cut where the scalar argument
    ``v . x`` vanishes, peaks, or crosses a breakpoint of ``f``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError("x must be a 2-vector")
    big_r = amplitude * math.hypot(x[0], x[1])
    if big_r == 0.0 or f.is_zero:
        return np.zeros(2)
    cuts = [0.0, TWO_PI]
    if split:
        # v . x = big_r * cos(phi + psi)
        psi = math.atan2(x[0], x[1])
        levels = [0.0] + [b for b in f.breakpoints() if abs(b) < big_r]
        for c in levels:
            a = math.acos(c / big_r)
            cuts += [(a - psi) % TWO_PI, (-a - psi) % TWO_PI]
        cuts += [(-psi) % TWO_PI, (math.pi - psi) % TWO_PI]
    phi, w = _nodes_on(np.array(sorted(cuts)), q)
    v = amplitude * np.stack([-np.sin(phi), np.cos(phi)])
    weights = w * f(v[0] * x[0] + v[1] * x[1])
    return (v @ weights) / TWO_PI


@dataclass(frozen=True)
class RadialProfile:
    """``r -> rho(r)`` bound to one coupling, quadrature and amplitude."""

    source: CouplingFunction
    quadrature: QuadratureSpec = DEFAULT_QUADRATURE
    amplitude: float = 1.0

    def __call__(self, r):
        return rho(self.source, r, self.quadrature, self.amplitude)

    def table(self, rmax: float, n: int) -> tuple[np.ndarray, np.ndarray]:
        r = np.linspace(0.0, rmax, n + 1)
        return r, np.asarray(self(r))


class AveragedField:
    """The averaged network field.

    ``field(eta)`` accepts states of shape ``(..., p, 2)`` and returns

        d eta_i = sum_j rho_ij(|eta_j - eta_i|) (eta_j - eta_i) / |eta_j - eta_i|

    with coincident pairs contributing zero.  Profiles are recomputed on every
    call (no caching), so results do not depend on call history.
    """

    def __init__(self, net: Interconnection, q: QuadratureSpec = DEFAULT_QUADRATURE,
                 amplitude: float = 1.0):
        self.net = net
        self.quadrature = q
        self.amplitude = float(amplitude)
        self._groups = []
        for f, rows, cols in net.edge_groups():
            scatter = np.zeros((rows.size, net.p))
            scatter[np.arange(rows.size), rows] = 1.0
            self._groups.append((f, rows, cols, scatter))

    def __call__(self, eta, t: float = 0.0) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        out = np.zeros(eta.shape)
        for f, rows, cols, scatter in self._groups:
            d = eta[..., cols, :] - eta[..., rows, :]
            r = np.hypot(d[..., 0], d[..., 1])
            gain = rho(f, r, self.quadrature, self.amplitude)
            with np.errstate(invalid="ignore", divide="ignore"):
                factor = np.where(r > 0.0, gain / r, 0.0)
            contrib = d * factor[..., None]
            out += np.einsum("...ek,ep->...pk", contrib, scatter)
        return out


def build_averaged_field(net: Interconnection, q: QuadratureSpec = DEFAULT_QUADRATURE,
                         amplitude: float = 1.0) -> AveragedField:
    return AveragedField(net, q, amplitude)
