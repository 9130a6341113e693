"""Planar domains, boundary curves and the angular frame.

The domain is a closed, star-shaped region in the plane whose boundary is
parameterized by arc length with counterclockwise orientation.  All
evaluators are vectorized: an argument of shape ``(...,)`` (arc lengths) or
``(..., 2)`` (points) returns arrays of matching shape.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import ConfigError, OutOfClassError

TANGENCY_TOL = 1e-10

__all__ = [
    "TANGENCY_TOL",
    "direction_vector",
    "normal_vector",
    "frame_matrix",
    "BoundaryCurve",
    "Domain",
    "unit_disc",
    "star_shaped_domain",
    "classify_direction",
    "domain_from_config",
]


def direction_vector(phi):
    """Unit covector (cos phi, sin phi) of a direction angle."""
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


def normal_vector(phi):
    """direction_vector rotated by +pi/2, i.e. (-sin phi, cos phi)."""
    phi = np.asarray(phi, dtype=float)
    return np.stack([-np.sin(phi), np.cos(phi)], axis=-1)


def frame_matrix(phi):
    """2x2 matrix with rows direction_vector, normal_vector (determinant +1)."""
    return np.stack([direction_vector(phi), normal_vector(phi)], axis=-2)


class BoundaryCurve:
    """Closed C2 curve parameterized by arc length, counterclockwise.

    Subclasses provide ``point``, ``tangent`` and ``arc_length_of_angle``;
    the inward conormal is the tangent rotated by +pi/2, which points into
    the region for counterclockwise orientation.
    """

    total_length: float

    def point(self, s):
        raise NotImplementedError

    def tangent(self, s):
        raise NotImplementedError

    def inward_conormal(self, s):
        t = self.tangent(s)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def conormal_angle(self, s):
        """Angle arg(nu) of the inward conormal."""
        nu = self.inward_conormal(s)
        return np.arctan2(nu[..., 1], nu[..., 0])


class _CircleBoundary(BoundaryCurve):
    def __init__(self, radius=1.0):
        self.radius = float(radius)
        self.total_length = 2.0 * np.pi * self.radius

    def point(self, s):
        a = np.asarray(s, dtype=float) / self.radius
        return self.radius * np.stack([np.cos(a), np.sin(a)], axis=-1)

    def tangent(self, s):
        a = np.asarray(s, dtype=float) / self.radius
        return np.stack([-np.sin(a), np.cos(a)], axis=-1)

    def arc_length_of_angle(self, alpha):
        return self.radius * (np.asarray(alpha, dtype=float) % (2.0 * np.pi))


class _StarBoundary(BoundaryCurve):
    """Boundary r(alpha)(cos alpha, sin alpha) reparameterized by arc length.

    The cumulative arc length is the antiderivative of a dense periodic
    spline of the speed |P'(alpha)|; the inverse map is a monotone
    interpolant polished by Newton steps, accurate to ~1e-12.
    """

    _DENSE = 8192

    def __init__(self, radius, radius_deriv):
        self._r = radius
        self._dr = radius_deriv
        alphas = np.linspace(0.0, 2.0 * np.pi, self._DENSE + 1)
        speed = self._speed(alphas)
        if np.min(self._r(alphas)) <= 0.0:
            raise OutOfClassError("radius profile must be strictly positive")
        if not np.all(np.isfinite(speed)):
            raise OutOfClassError("radius profile is not smooth enough")
        self._cum = CubicSpline(alphas, speed, bc_type="periodic").antiderivative()
        self.total_length = float(self._cum(2.0 * np.pi))
        # monotone first guess for the inverse map s -> alpha
        self._inv = PchipInterpolator(self._cum(alphas), alphas)

    def _speed(self, alpha):
        r = self._r(alpha)
        dr = self._dr(alpha)
        return np.sqrt(r * r + dr * dr)

    def angle_of_arc_length(self, s):
        s = np.asarray(s, dtype=float) % self.total_length
        a = np.asarray(self._inv(s), dtype=float)
        for _ in range(3):
            a = a - (self._cum(a) - s) / self._speed(a)
        return a

    def arc_length_of_angle(self, alpha):
        alpha = np.asarray(alpha, dtype=float) % (2.0 * np.pi)
        return np.asarray(self._cum(alpha), dtype=float)

    def point_of_angle(self, alpha):
        r = self._r(alpha)
        return np.stack([r * np.cos(alpha), r * np.sin(alpha)], axis=-1)

    def point(self, s):
        return self.point_of_angle(self.angle_of_arc_length(s))

    def tangent(self, s):
        a = self.angle_of_arc_length(s)
        r, dr = self._r(a), self._dr(a)
        d = np.stack(
            [dr * np.cos(a) - r * np.sin(a), dr * np.sin(a) + r * np.cos(a)], axis=-1
        )
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


class Domain:
    """Closed region with boundary curve, membership test and signed boundary function.

    ``signed_boundary_function`` is negative inside, zero on the boundary and
    positive outside; its zero level set is located by the ray tracer, so it
    must be smooth near the boundary (a kink at the origin is harmless).
    """

    def __init__(self, boundary: BoundaryCurve):
        self.boundary = boundary

    def signed_boundary_function(self, x):
        raise NotImplementedError

    def boundary_distance_gradient(self, x):
        """Gradient of signed_boundary_function (used by boundary cutoffs)."""
        raise NotImplementedError

    def inside(self, x):
        return self.signed_boundary_function(x) < 0.0

    def arc_length_of_point(self, x):
        """Arc length of the boundary point nearest in angle to x (x ~ on the boundary)."""
        x = np.asarray(x, dtype=float)
        alpha = np.arctan2(x[..., 1], x[..., 0]) % (2.0 * np.pi)
        return self.boundary.arc_length_of_angle(alpha)

    @property
    def diameter(self):
        raise NotImplementedError

    @property
    def bounding_radius(self):
        raise NotImplementedError

    def sample_interior(self, rng, n, margin=0.0):
        """Rejection-sample n points with signed_boundary_function < -margin."""
        out = np.empty((n, 2))
        have = 0
        R = self.bounding_radius
        while have < n:
            cand = rng.uniform(-R, R, size=(2 * (n - have) + 16, 2))
            keep = cand[self.signed_boundary_function(cand) < -margin]
            take = min(len(keep), n - have)
            out[have : have + take] = keep[:take]
            have += take
        return out


class _DiscDomain(Domain):
    def __init__(self, radius=1.0):
        super().__init__(_CircleBoundary(radius))
        self.radius = float(radius)
        self.kernel_disc_radius = self.radius  # enables the compiled trace kernel

    def signed_boundary_function(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2) - self.radius

    def boundary_distance_gradient(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)
        return x / np.maximum(r, 1e-300)[..., None]

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def bounding_radius(self):
        return self.radius


class _StarDomain(Domain):
    def __init__(self, boundary: _StarBoundary):
        super().__init__(boundary)
        alphas = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        r = boundary._r(alphas)
        self._r_max = float(np.max(r))
        self._r_min = float(np.min(r))

    def signed_boundary_function(self, x):
        x = np.asarray(x, dtype=float)
        alpha = np.arctan2(x[..., 1], x[..., 0])
        return np.linalg.norm(x, axis=-1) - self.boundary._r(alpha)

    def boundary_distance_gradient(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        r = np.sqrt(np.maximum(r2, 1e-300))
        alpha = np.arctan2(x[..., 1], x[..., 0])
        dr = self.boundary._dr(alpha)
        # grad(|x|) - r'(alpha) grad(alpha); grad(alpha) = (-y, x)/|x|^2
        gx = x[..., 0] / r + dr * x[..., 1] / np.maximum(r2, 1e-300)
        gy = x[..., 1] / r - dr * x[..., 0] / np.maximum(r2, 1e-300)
        return np.stack([gx, gy], axis=-1)

    @property
    def diameter(self):
        return 2.0 * self._r_max

    @property
    def bounding_radius(self):
        return self._r_max


def unit_disc() -> Domain:
    """The closed unit disc; boundary point(s) = (cos s, sin s), nu = -(cos s, sin s)."""
    return _DiscDomain(1.0)


def _fourier_profile(cos_coeffs, sin_coeffs=None):
    cos_coeffs = np.asarray(cos_coeffs, dtype=float)
    sin_coeffs = (
        np.zeros_like(cos_coeffs) if sin_coeffs is None else np.asarray(sin_coeffs, dtype=float)
    )
    if sin_coeffs.shape != cos_coeffs.shape:
        raise ConfigError("sin_coeffs must match fourier_coeffs in length")
    k = np.arange(len(cos_coeffs))

    def r(alpha):
        alpha = np.asarray(alpha, dtype=float)[..., None]
        return np.sum(cos_coeffs * np.cos(k * alpha) + sin_coeffs * np.sin(k * alpha), axis=-1)

    def dr(alpha):
        alpha = np.asarray(alpha, dtype=float)[..., None]
        return np.sum(-k * cos_coeffs * np.sin(k * alpha) + k * sin_coeffs * np.cos(k * alpha), axis=-1)

    return r, dr


def star_shaped_domain(radius_profile, radius_derivative=None, sin_coeffs=None) -> Domain:
    """Star-shaped domain about the origin from a periodic radius profile.

    ``radius_profile`` is either a sequence of cosine Fourier coefficients
    (index = harmonic, so ``[1.0, 0.0, 0.1]`` means 1 + 0.1 cos(2a), with
    optional ``sin_coeffs``) or a callable alpha -> r > 0.  A callable
    without ``radius_derivative`` is resampled through a periodic spline.
    """
    if callable(radius_profile):
        r = radius_profile
        if radius_derivative is not None:
            dr = radius_derivative
        else:
            alphas = np.linspace(0.0, 2.0 * np.pi, 4097)
            vals = np.asarray([float(r(a)) for a in alphas])
            if not np.all(np.isfinite(vals)):
                raise OutOfClassError("radius profile evaluates to non-finite values")
            if abs(vals[0] - vals[-1]) > 1e-10:
                raise OutOfClassError("radius profile must be 2*pi periodic")
            spl = CubicSpline(alphas, vals, bc_type="periodic")
            r, dr = spl, spl.derivative()
    else:
        r, dr = _fourier_profile(radius_profile, sin_coeffs)
    return _StarDomain(_StarBoundary(r, dr))


def classify_direction(domain: Domain, s, phi, tol=TANGENCY_TOL):
    """Classify a boundary phase point as 'incoming', 'outgoing' or 'tangent'.

    A direction is incoming when it pairs positively with the inward
    conormal at the boundary point.
    """
    c = float(np.dot(domain.boundary.inward_conormal(s), direction_vector(phi)))
    if c > tol:
        return "incoming"
    if c < -tol:
        return "outgoing"
    return "tangent"


def entry_cosines(domain: Domain, s, phi):
    """<nu(s) | theta(phi)> on a product grid of arc lengths and angles."""
    nu = domain.boundary.inward_conormal(np.asarray(s, dtype=float))
    th = direction_vector(np.asarray(phi, dtype=float))
    return nu @ th.T


def domain_from_config(cfg) -> Domain:
    """Build a domain from a config mapping: {"type": "disc"} or
    {"type": "star", "fourier_coeffs": [...], "sin_coeffs": [...]}."""
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ConfigError("domain config must be a table with a 'type' key")
    kind = cfg["type"]
    if kind == "disc":
        return unit_disc()
    if kind == "star":
        if "fourier_coeffs" not in cfg:
            raise ConfigError("star domain needs 'fourier_coeffs'")
        return star_shaped_domain(cfg["fourier_coeffs"], sin_coeffs=cfg.get("sin_coeffs"))
    raise ConfigError(f"unknown domain type {kind!r}")
