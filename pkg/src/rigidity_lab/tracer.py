"""Geodesic tracing for the conformal metric n^2 ds^2.

Rays are parameterized by Euclidean arc length sigma, so the state is
(x, direction angle phi) with

    dx/dsigma   = (cos phi, sin phi)
    dphi/dsigma = (-sin phi * d1(n) + cos phi * d2(n)) / n
    dtau/dsigma = n(x)

Two engines share this right-hand side:

* a reference tracer built on an adaptive embedded Runge-Kutta pair
  (rtol 1e-9, atol 1e-12) with dense-output boundary-event location,
  returning full paths; and
* a fixed-step RK4 batch engine that advances many rays in lockstep and
  locates each boundary crossing by bisecting the step fraction.  Because
  every ray in a batch shares the same step grid, integration errors of
  nearby rays cancel almost exactly in finite differences, which is what
  the travel-time gradient sampling relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import TangentExitError, TrappedRayError
from .geometry import Domain, classify_direction, direction_vector

__all__ = [
    "RayState",
    "GeodesicPath",
    "BatchTrace",
    "ray_rhs",
    "trace_batch",
    "trace_backward",
    "trace_chord",
]

EXIT_COSINE_MIN = 0.01
CAP_FACTOR = 50.0
_BISECT_ITERS = 46


@dataclass
class RayState:
    """Single node of a traced ray."""

    x: np.ndarray
    phi: float
    tau: float
    sigma: float


@dataclass
class GeodesicPath:
    """Traced ray, ordered from its boundary entry point to its terminal point.

    ``status`` is 'interior_terminal' for rays traced back from an interior
    phase point and 'boundary_to_boundary' for chords.
    """

    sigma: np.ndarray
    x: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    entry_s: float
    exit_cosine: float
    status: str
    exit_s: float | None = None
    exit_phi: float | None = None
    extras: np.ndarray | None = None

    @property
    def travel_time(self):
        return float(self.tau[-1])

    @property
    def length(self):
        return float(self.sigma[-1])

    def nodes(self):
        return [
            RayState(self.x[i].copy(), float(self.phi[i]), float(self.tau[i]), float(self.sigma[i]))
            for i in range(len(self.sigma))
        ]


def ray_rhs(state: RayState, field):
    """Derivative of (x, phi, tau) with respect to Euclidean arc length."""
    n = float(field.n(state.x))
    g = field.grad_n(state.x)
    c, s = np.cos(state.phi), np.sin(state.phi)
    return np.array([c, s]), float((-s * g[..., 0] + c * g[..., 1]) / n), n


def _derivs(x, phi, field):
    n, g = field.value_and_gradient(x)
    c, s = np.cos(phi), np.sin(phi)
    dx = np.stack([c, s], axis=-1)
    dphi = (-s * g[..., 0] + c * g[..., 1]) / n
    return dx, dphi, n


def _stage_values(x, n, extra_integrands):
    if not extra_integrands:
        return n[..., None]
    cols = [n] + [f.value(x) for f in extra_integrands]
    return np.stack(cols, axis=-1)


def _rk4_step(x, phi, h, field, extra_integrands):
    """One classical RK4 step of (x, phi) plus quadrature increments.

    Quadrature channels integrate dq/dsigma = w(x) along the ray with the
    same stages; channel 0 is the travel time (w = n)."""
    h2 = 0.5 * h
    d1x, d1p, n1 = _derivs(x, phi, field)
    q1 = _stage_values(x, n1, extra_integrands)
    xa, pa = x + h2[:, None] * d1x, phi + h2 * d1p
    d2x, d2p, n2 = _derivs(xa, pa, field)
    q2 = _stage_values(xa, n2, extra_integrands)
    xb, pb = x + h2[:, None] * d2x, phi + h2 * d2p
    d3x, d3p, n3 = _derivs(xb, pb, field)
    q3 = _stage_values(xb, n3, extra_integrands)
    xc, pc = x + h[:, None] * d3x, phi + h * d3p
    d4x, d4p, n4 = _derivs(xc, pc, field)
    q4 = _stage_values(xc, n4, extra_integrands)
    w = (h / 6.0)[:, None]
    xn = x + w * (d1x + 2.0 * d2x + 2.0 * d3x + d4x)
    pn = phi + (h / 6.0) * (d1p + 2.0 * d2p + 2.0 * d3p + d4p)
    dq = w * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
    return xn, pn, dq


def _rk4_positions(x, phi, h, field):
    """End position of one RK4 step, without quadrature work (bisection helper)."""
    h2 = 0.5 * h
    d1x, d1p, _ = _derivs(x, phi, field)
    d2x, d2p, _ = _derivs(x + h2[:, None] * d1x, phi + h2 * d1p, field)
    d3x, d3p, _ = _derivs(x + h2[:, None] * d2x, phi + h2 * d2p, field)
    d4x, _, _ = _derivs(x + h[:, None] * d3x, phi + h * d3p, field)
    return x + (h / 6.0)[:, None] * (d1x + 2.0 * d2x + 2.0 * d3x + d4x)


@dataclass
class BatchTrace:
    """Result arrays of a batched forward trace (one entry per ray).

    ``quads[:, 0]`` is the travel time; further columns follow the extra
    integrands passed to :func:`trace_batch`.  ``status`` is 0 for rays that
    reached the boundary and 1 for rays stopped by the length cap.
    """

    exit_x: np.ndarray
    exit_phi: np.ndarray
    exit_s: np.ndarray
    exit_cosine: np.ndarray
    sigma: np.ndarray
    quads: np.ndarray
    status: np.ndarray

    @property
    def tau(self):
        return self.quads[:, 0]


def trace_batch(
    x0,
    phi0,
    field,
    domain: Domain,
    step,
    sigma_cap=None,
    extra_integrands=(),
) -> BatchTrace:
    """Advance a batch of rays from (x0, phi0) until each leaves the domain.

    Starting points may lie on the boundary (entering chords); the start is
    always treated as inside.  Rays that have not exited after ``sigma_cap``
    of arc length are flagged trapped and left where they stopped.
    """
    x = np.array(x0, dtype=float).reshape(-1, 2).copy()
    phi = np.array(phi0, dtype=float).reshape(-1).copy()
    n_rays = len(x)
    if sigma_cap is None:
        sigma_cap = CAP_FACTOR * domain.diameter
    n_channels = 1 + len(extra_integrands)
    quads = np.zeros((n_rays, n_channels))
    sigma = np.zeros(n_rays)
    status = np.ones(n_rays, dtype=np.int8)
    active = np.ones(n_rays, dtype=bool)
    max_steps = int(np.ceil(sigma_cap / step)) + 1

    # Main march: rays whose next full step lands outside are frozen at their
    # last inside state; the crossing fractions are bisected in one deferred
    # batch afterwards, so the bisection work is vectorized over all rays.
    pending = np.zeros(n_rays, dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        h = np.full(idx.size, step)
        xn, pn, dq = _rk4_step(x[idx], phi[idx], h, field, extra_integrands)
        crossed = domain.signed_boundary_function(xn) >= 0.0
        keep = idx[~crossed]
        x[keep], phi[keep] = xn[~crossed], pn[~crossed]
        quads[keep] += dq[~crossed]
        sigma[keep] += step
        if crossed.any():
            ci = idx[crossed]
            pending[ci] = True
            active[ci] = False

    pi = np.flatnonzero(pending)
    if pi.size:
        bx, bp = x[pi], phi[pi]
        lo = np.zeros(pi.size)
        hi = np.full(pi.size, step)
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            xm = _rk4_positions(bx, bp, mid, field)
            inside = domain.signed_boundary_function(xm) < 0.0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        xf, pf, dqf = _rk4_step(bx, bp, hi, field, extra_integrands)
        x[pi], phi[pi] = xf, pf
        quads[pi] += dqf
        sigma[pi] += hi
        status[pi] = 0

    exit_s = domain.arc_length_of_point(x)
    nu = domain.boundary.inward_conormal(exit_s)
    exit_cos = np.einsum("ij,ij->i", nu, direction_vector(phi))
    exit_cos[status != 0] = np.nan
    return BatchTrace(
        exit_x=x,
        exit_phi=phi % (2.0 * np.pi),
        exit_s=exit_s,
        exit_cosine=exit_cos,
        sigma=sigma,
        quads=quads,
        status=status,
    )


def _reference_forward(x0, phi0, field, domain, rtol, atol, sigma_cap, max_step, extra_integrands):
    """Adaptive forward trace from an interior (or entering boundary) state."""

    def rhs(_, y):
        pt = y[:2]
        n = float(field.n(pt))
        g = np.asarray(field.grad_n(pt), dtype=float).reshape(2)
        c, s = np.cos(y[2]), np.sin(y[2])
        out = [c, s, (-s * g[0] + c * g[1]) / n, n]
        out.extend(float(f(pt)) for f in extra_integrands)
        return out

    def boundary_hit(_, y):
        return float(domain.signed_boundary_function(y[:2]))

    boundary_hit.terminal = True
    boundary_hit.direction = 1.0

    y0 = [x0[0], x0[1], phi0, 0.0] + [0.0] * len(extra_integrands)
    sol = solve_ivp(
        rhs,
        (0.0, sigma_cap),
        y0,
        method="RK45",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=boundary_hit,
        max_step=max_step,
    )
    if len(sol.t_events[0]) == 0:
        raise TrappedRayError(
            f"ray from x={tuple(np.round(x0, 6))}, phi={phi0:.6f} exceeded the length cap {sigma_cap:g}"
        )
    s_hit = float(sol.t_events[0][0])
    y_hit = sol.y_events[0][0]
    keep = sol.t < s_hit - 1e-15
    sig = np.append(sol.t[keep], s_hit)
    ys = np.concatenate([sol.y[:, keep], y_hit[:, None]], axis=1)
    return sig, ys


def trace_backward(
    x,
    phi,
    field,
    domain: Domain,
    rtol=1e-9,
    atol=1e-12,
    sigma_cap=None,
    max_step=np.inf,
    extra_integrands=(),
    raise_on_tangent=True,
) -> GeodesicPath:
    """Trace the geodesic that arrives at interior point x with direction
    angle phi back to its boundary entry point.

    The returned path runs from the entry point to x, so the terminal tau is
    the travel time of the arriving ray.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    if sigma_cap is None:
        sigma_cap = CAP_FACTOR * domain.diameter
    sig, ys = _reference_forward(
        x, phi + np.pi, field, domain, rtol, atol, sigma_cap, max_step, extra_integrands
    )
    total_sigma, total_tau = sig[-1], ys[3, -1]
    entry_x = ys[:2, -1]
    entry_phi = (ys[2, -1] + np.pi) % (2.0 * np.pi)
    entry_s = float(domain.arc_length_of_point(entry_x))
    entry_cos = float(np.dot(domain.boundary.inward_conormal(entry_s), direction_vector(entry_phi)))
    if raise_on_tangent and abs(entry_cos) < EXIT_COSINE_MIN:
        raise TangentExitError(
            f"ray from x={tuple(np.round(x, 6))}, phi={phi:.6f} met the boundary with cosine {entry_cos:.2e}"
        )
    order = slice(None, None, -1)
    extras = (ys[4:, order].T * -1.0 + ys[4:, -1][None, :]) if len(extra_integrands) else None
    return GeodesicPath(
        sigma=total_sigma - sig[order],
        x=ys[:2, order].T.copy(),
        phi=(ys[2, order] + np.pi) % (2.0 * np.pi),
        tau=total_tau - ys[3, order],
        entry_s=entry_s,
        exit_cosine=entry_cos,
        status="interior_terminal",
        extras=extras,
    )


def trace_chord(
    s_entry,
    phi,
    field,
    domain: Domain,
    rtol=1e-9,
    atol=1e-12,
    sigma_cap=None,
    max_step=np.inf,
    extra_integrands=(),
    raise_on_tangent=True,
) -> GeodesicPath:
    """Trace the boundary-to-boundary geodesic entering at arc length s_entry
    with (incoming) direction angle phi."""
    cls = classify_direction(domain, s_entry, phi)
    if cls != "incoming":
        raise ValueError(f"chord entry (s={s_entry:.6f}, phi={phi:.6f}) is {cls}, not incoming")
    if sigma_cap is None:
        sigma_cap = CAP_FACTOR * domain.diameter
    x0 = np.asarray(domain.boundary.point(s_entry), dtype=float).reshape(2)
    sig, ys = _reference_forward(
        x0, phi, field, domain, rtol, atol, sigma_cap, max_step, extra_integrands
    )
    exit_x = ys[:2, -1]
    exit_phi = float(ys[2, -1]) % (2.0 * np.pi)
    exit_s = float(domain.arc_length_of_point(exit_x))
    exit_cos = float(np.dot(domain.boundary.inward_conormal(exit_s), direction_vector(exit_phi)))
    if raise_on_tangent and abs(exit_cos) < EXIT_COSINE_MIN:
        raise TangentExitError(
            f"chord from s={s_entry:.6f}, phi={phi:.6f} exits with cosine {exit_cos:.2e}"
        )
    entry_cos = float(np.dot(domain.boundary.inward_conormal(s_entry), direction_vector(phi)))
    return GeodesicPath(
        sigma=sig,
        x=ys[:2].T.copy(),
        phi=ys[2] % (2.0 * np.pi),
        tau=ys[3].copy(),
        entry_s=float(s_entry),
        exit_cosine=entry_cos,
        status="boundary_to_boundary",
        exit_s=exit_s,
        exit_phi=exit_phi,
        extras=ys[4:].T.copy() if len(extra_integrands) else None,
    )
