"""Refraction coefficients and scalar perturbation fields.

Every field evaluates pointwise values and analytic gradients, vectorized
over an ``(..., 2)`` array of positions.  Refraction coefficients are
strictly positive on the closed domain (checked on a dense grid at
construction); scalar fields share the interface without the positivity
requirement and may carry a boundary-vanishing guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConfigError, NonPositiveMediumError, OutOfClassError
from .geometry import Domain

__all__ = [
    "ScalarField",
    "RefractionField",
    "make_medium",
    "make_scalar_field",
    "perturbed_medium",
    "medium_from_config",
    "scalar_field_from_config",
    "non_trapping_check",
    "standard_catalog",
    "NonTrappingReport",
]

_CUTOFF_WIDTH_FACTOR = 0.15  # width of the boundary cutoff collar, in diameters


class ScalarField:
    """Scalar field with analytic gradient; base class for all field kinds."""

    kind = "abstract"
    vanishes_on_boundary = False

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def value_and_gradient(self, x):
        """Value and gradient in one pass (overridden where sharing work pays)."""
        return self.value(x), self.gradient(x)

    def canonical_form(self, domain):
        """(poly_in_r2, bump_rows, cutoff_width) when the field is a radial
        polynomial plus windowed Gaussian bumps over ``domain``, else None.
        Feeds the compiled trace kernel; None falls back to the numpy engine."""
        return None

    # perturbation-field aliases
    def f(self, x):
        return self.value(x)

    def grad_f(self, x):
        return self.gradient(x)


class RefractionField(ScalarField):
    """Positive scalar field acting as the medium's slowness multiplier."""

    def n(self, x):
        return self.value(x)

    def grad_n(self, x):
        return self.gradient(x)


class _Constant(RefractionField):
    kind = "constant"

    def __init__(self, c):
        self.c = float(c)
        self.params = {"c": self.c}

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape)

    def value_and_gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], self.c), np.zeros(x.shape)

    def canonical_form(self, domain):
        return np.array([self.c]), np.zeros((0, 4)), 0.0


class _RadialPolynomial(RefractionField):
    """n(x) = sum_k c_{2k} |x|^(2k); params keyed 'c0', 'c2', 'c4', ..."""

    kind = "radial_polynomial"

    def __init__(self, params):
        coeffs = {}
        for key, val in params.items():
            if not (key.startswith("c") and key[1:].isdigit()) or int(key[1:]) % 2:
                raise ConfigError(f"radial_polynomial keys must be c0, c2, ...; got {key!r}")
            coeffs[int(key[1:]) // 2] = float(val)
        kmax = max(coeffs) if coeffs else 0
        self._c = np.array([coeffs.get(k, 0.0) for k in range(kmax + 1)])
        self.params = dict(params)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        u = np.sum(x * x, axis=-1)
        return np.polynomial.polynomial.polyval(u, self._c)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        u = np.sum(x * x, axis=-1)
        dpdu = np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self._c))
        return 2.0 * dpdu[..., None] * x

    def value_and_gradient(self, x):
        x = np.asarray(x, dtype=float)
        u = np.sum(x * x, axis=-1)
        val = np.polynomial.polynomial.polyval(u, self._c)
        dpdu = np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self._c))
        return val, 2.0 * dpdu[..., None] * x

    def canonical_form(self, domain):
        return self._c.copy(), np.zeros((0, 4)), 0.0


class _RadialVanishing(ScalarField):
    """f(x) = (1 - u) * sum_j c_j u^(j-1), u = (|x|/R)^2: vanishes on |x| = R.

    Meant for perturbations and reconstruction bases on the disc; C-infinity
    and exactly zero on the boundary circle.
    """

    kind = "radial_vanishing"
    vanishes_on_boundary = True

    def __init__(self, coeffs, radius=1.0):
        c = np.asarray(coeffs, dtype=float)
        # p(u) = (1-u) sum c_j u^(j-1) expanded in the monomial basis
        poly = np.zeros(len(c) + 1)
        poly[: len(c)] += c
        poly[1:] -= c
        self._poly = poly
        self._dpoly = np.polynomial.polynomial.polyder(poly)
        self.radius = float(radius)
        self.params = {"coeffs": list(map(float, c)), "radius": self.radius}

    def value(self, x):
        x = np.asarray(x, dtype=float)
        u = np.sum(x * x, axis=-1) / self.radius**2
        return np.polynomial.polynomial.polyval(u, self._poly)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        u = np.sum(x * x, axis=-1) / self.radius**2
        dpdu = np.polynomial.polynomial.polyval(u, self._dpoly)
        return (2.0 / self.radius**2) * dpdu[..., None] * x

    def canonical_form(self, domain):
        scale = self.radius ** (-2.0 * np.arange(len(self._poly)))
        return self._poly * scale, np.zeros((0, 4)), 0.0


def _smoothstep(t):
    """C2 quintic smoothstep on [0, 1], clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_deriv(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 + t * (-2.0 + t)), 0.0)


class _BoundaryCutoff:
    """C2 window: 0 on the boundary, 1 beyond a collar of width w into the domain."""

    def __init__(self, domain: Domain, width=None):
        self.domain = domain
        self.width = float(width) if width is not None else _CUTOFF_WIDTH_FACTOR * domain.diameter

    def value(self, x):
        t = np.abs(self.domain.signed_boundary_function(x)) / self.width
        return _smoothstep(t)

    def value_and_gradient(self, x):
        x = np.asarray(x, dtype=float)
        sbf = self.domain.signed_boundary_function(x)
        t = np.abs(sbf) / self.width
        chi = _smoothstep(t)
        dchi = _smoothstep_deriv(t)
        if not np.any(dchi):
            return chi, np.zeros(x.shape)
        g = self.domain.boundary_distance_gradient(x)
        scale = dchi / self.width * np.sign(sbf)
        return chi, scale[..., None] * g

    def gradient(self, x):
        return self.value_and_gradient(x)[1]


class _GaussianBumps(ScalarField):
    """base + sum_i a_i exp(-|x - c_i|^2 / sigma_i^2), optionally windowed to
    vanish on the boundary (the window multiplies the bump sum, not the base)."""

    kind = "gaussian_bumps"

    def __init__(self, base, bumps, cutoff=None):
        self.base = float(base)
        self._amp = np.array([b[0] for b in bumps], dtype=float)
        self._ctr = np.array([[b[1], b[2]] for b in bumps], dtype=float)
        self._inv_s2 = 1.0 / np.array([b[3] for b in bumps], dtype=float) ** 2
        self.cutoff = cutoff
        self.vanishes_on_boundary = cutoff is not None and self.base == 0.0

    def _bumps(self, x):
        x = np.asarray(x, dtype=float)
        d = x[..., None, :] - self._ctr
        q = np.sum(d * d, axis=-1) * self._inv_s2
        e = self._amp * np.exp(-q)
        return e, d

    def value(self, x):
        e, _ = self._bumps(x)
        total = np.sum(e, axis=-1)
        if self.cutoff is not None:
            total = total * self.cutoff.value(x)
        return self.base + total

    def gradient(self, x):
        return self.value_and_gradient(x)[1]

    def value_and_gradient(self, x):
        e, d = self._bumps(x)
        total = np.sum(e, axis=-1)
        g = np.sum((-2.0 * self._inv_s2 * e)[..., None] * d, axis=-2)
        if self.cutoff is not None:
            chi, gchi = self.cutoff.value_and_gradient(x)
            g = chi[..., None] * g + total[..., None] * gchi
            total = total * chi
        return self.base + total, g

    def canonical_form(self, domain):
        if self.cutoff is not None and self.cutoff.domain is not domain:
            return None
        rows = np.column_stack([self._amp, self._ctr, self._inv_s2])
        width = self.cutoff.width if self.cutoff is not None else 0.0
        return np.array([self.base]), rows, width


class _GaussianBumpsMedium(_GaussianBumps, RefractionField):
    pass


class _GridSpline(RefractionField):
    """Bicubic interpolation of n over a uniform grid covering the domain's
    bounding box; evaluations are clamped to the box (constant extension)."""

    kind = "grid_spline"

    def __init__(self, x_knots, y_knots, values):
        x_knots = np.asarray(x_knots, dtype=float)
        y_knots = np.asarray(y_knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if len(x_knots) < 4 or len(y_knots) < 4:
            raise OutOfClassError("grid_spline needs at least 4 knots per axis for C2 interpolation")
        if values.shape != (len(x_knots), len(y_knots)):
            raise ConfigError("grid_spline values must have shape (len(x), len(y))")
        self._spl = RectBivariateSpline(x_knots, y_knots, values, kx=3, ky=3, s=0)
        self._box = (x_knots[0], x_knots[-1], y_knots[0], y_knots[-1])

    def _clamped(self, x):
        x = np.asarray(x, dtype=float)
        cx = np.clip(x[..., 0], self._box[0], self._box[1])
        cy = np.clip(x[..., 1], self._box[2], self._box[3])
        return cx, cy

    def value(self, x):
        cx, cy = self._clamped(x)
        return self._spl(cx.ravel(), cy.ravel(), grid=False).reshape(cx.shape)

    def gradient(self, x):
        cx, cy = self._clamped(x)
        gx = self._spl(cx.ravel(), cy.ravel(), dx=1, grid=False).reshape(cx.shape)
        gy = self._spl(cx.ravel(), cy.ravel(), dy=1, grid=False).reshape(cx.shape)
        return np.stack([gx, gy], axis=-1)


class _Perturbed(RefractionField):
    """base medium plus a coefficient-weighted sum of scalar fields."""

    kind = "perturbed"

    def __init__(self, base: RefractionField, fields, coeffs):
        self.base = base
        self.fields = list(fields)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if len(self.fields) != len(self.coeffs):
            raise ConfigError("perturbed medium needs one coefficient per field")

    def value(self, x):
        out = self.base.value(x)
        for c, f in zip(self.coeffs, self.fields):
            out = out + c * f.value(x)
        return out

    def gradient(self, x):
        out = self.base.gradient(x)
        for c, f in zip(self.coeffs, self.fields):
            out = out + c * f.gradient(x)
        return out

    def value_and_gradient(self, x):
        val, grad = self.base.value_and_gradient(x)
        for c, f in zip(self.coeffs, self.fields):
            v, g = f.value_and_gradient(x)
            val = val + c * v
            grad = grad + c * g
        return val, grad

    def canonical_form(self, domain):
        parts = [(1.0, self.base.canonical_form(domain))]
        parts += [(c, f.canonical_form(domain)) for c, f in zip(self.coeffs, self.fields)]
        if any(p[1] is None for p in parts):
            return None
        widths = {p[1][2] for p in parts if len(p[1][1])}
        if len(widths) > 1:  # kernel supports a single cutoff window
            return None
        deg = max(len(p[1][0]) for p in parts)
        poly = np.zeros(deg)
        rows = []
        for c, (pc, bumps, _) in parts:
            poly[: len(pc)] += c * pc
            if len(bumps):
                scaled = bumps.copy()
                scaled[:, 0] *= c
                rows.append(scaled)
        bumps = np.concatenate(rows) if rows else np.zeros((0, 4))
        return poly, bumps, (widths.pop() if widths else 0.0)


def _check_positive(field: RefractionField, domain: Domain, n_grid=256):
    R = domain.bounding_radius
    ax = np.linspace(-R, R, n_grid)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    pts = np.stack([X, Y], axis=-1).reshape(-1, 2)
    pts = pts[domain.signed_boundary_function(pts) <= 1e-9]
    vals = field.value(pts)
    n_min = float(np.min(vals))
    if n_min <= 0.0:
        raise NonPositiveMediumError(f"minimum sampled n = {n_min:.6g} <= 0")
    field.n_min = n_min
    return field


def make_medium(kind, params, domain: Domain) -> RefractionField:
    """Build a refraction coefficient of the given kind and verify positivity
    on a 256x256 sample grid over the domain.

    Kinds: 'constant' {c}; 'radial_polynomial' {c0, c2, ...};
    'gaussian_bumps' {base, bumps: [{a, center, sigma}], cutoff: 'boundary'?};
    'grid_spline' {x, y, values}.
    """
    if kind == "constant":
        field = _Constant(params["c"])
    elif kind == "radial_polynomial":
        field = _RadialPolynomial(params)
    elif kind == "gaussian_bumps":
        bumps = [
            (b["a"], b["center"][0], b["center"][1], b["sigma"]) for b in params["bumps"]
        ]
        cutoff = _BoundaryCutoff(domain) if params.get("cutoff") == "boundary" else None
        field = _GaussianBumpsMedium(params.get("base", 1.0), bumps, cutoff)
    elif kind == "grid_spline":
        field = _GridSpline(params["x"], params["y"], params["values"])
    else:
        raise ConfigError(f"unknown medium kind {kind!r}")
    return _check_positive(field, domain)


def make_scalar_field(kind, params, domain: Domain) -> ScalarField:
    """Build a (sign-indefinite) scalar field, e.g. a linearization direction.

    Kinds: 'gaussian_bumps' with base 0 and cutoff 'boundary' (vanishes on
    the boundary exactly); 'radial_vanishing' {coeffs, radius?}."""
    if kind == "gaussian_bumps":
        bumps = [
            (b["a"], b["center"][0], b["center"][1], b["sigma"]) for b in params["bumps"]
        ]
        cutoff = _BoundaryCutoff(domain) if params.get("cutoff", "boundary") == "boundary" else None
        return _GaussianBumps(params.get("base", 0.0), bumps, cutoff)
    if kind == "radial_vanishing":
        return _RadialVanishing(params["coeffs"], params.get("radius", 1.0))
    raise ConfigError(f"unknown scalar field kind {kind!r}")


def perturbed_medium(base: RefractionField, fields, coeffs, domain: Domain) -> RefractionField:
    """base + sum_k coeffs[k] * fields[k], positivity-checked."""
    return _check_positive(_Perturbed(base, fields, coeffs), domain)


def medium_from_config(cfg, domain: Domain) -> RefractionField:
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind is None:
        raise ConfigError("medium config needs a 'kind' key")
    return make_medium(kind, cfg, domain)


def scalar_field_from_config(cfg, domain: Domain) -> ScalarField:
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind is None:
        raise ConfigError("scalar field config needs a 'kind' key")
    return make_scalar_field(kind, cfg, domain)


@dataclass
class NonTrappingReport:
    ok: bool
    worst_exit_cosine: float
    max_path_length: float
    n_trapped: int
    n_tangent: int
    n_rays: int

    def __str__(self):
        status = "ok" if self.ok else "REJECTED"
        return (
            f"non-trapping check: {status} ({self.n_rays} rays, "
            f"worst |exit cosine| {self.worst_exit_cosine:.4f}, "
            f"max path length {self.max_path_length:.3f}, "
            f"{self.n_trapped} trapped, {self.n_tangent} tangent)"
        )


def non_trapping_check(
    field: RefractionField,
    domain: Domain,
    n_samples=1000,
    seed=0,
    cosine_threshold=0.01,
    cap_factor=50.0,
    step=None,
) -> NonTrappingReport:
    """Trace geodesics from random interior phase points in both directions
    and report whether all of them leave the domain transversally.

    This is a statistical check: it samples the phase space rather than
    covering it.  Interior points keep a small margin (1% of the diameter)
    from the boundary so that the transversality threshold is meaningful.
    """
    from .tracer import trace_batch  # local import to avoid a cycle

    rng = np.random.default_rng(seed)
    pts = domain.sample_interior(rng, n_samples, margin=0.01 * domain.diameter)
    phis = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    x0 = np.concatenate([pts, pts])
    a0 = np.concatenate([phis, phis + np.pi])
    h = step if step is not None else domain.diameter / 256.0
    res = trace_batch(x0, a0, field, domain, step=h, sigma_cap=cap_factor * domain.diameter)
    trapped = res.status != 0
    cosines = np.abs(res.exit_cosine)
    cosines[trapped] = 0.0
    tangent = (~trapped) & (cosines < cosine_threshold)
    return NonTrappingReport(
        ok=bool(not trapped.any() and not tangent.any()),
        worst_exit_cosine=float(np.min(np.where(trapped, np.inf, cosines))),
        max_path_length=float(np.max(res.sigma)),
        n_trapped=int(np.sum(trapped)),
        n_tangent=int(np.sum(tangent)),
        n_rays=len(x0),
    )


def standard_catalog(domain: Domain):
    """Named media used across the verification suites and tests."""
    one_bump = {
        "base": 1.0,
        "bumps": [{"a": 0.08, "center": [0.25, 0.1], "sigma": 0.3}],
        "cutoff": "boundary",
    }
    two_bumps = {
        "base": 1.0,
        "bumps": [
            {"a": 0.08, "center": [0.25, 0.1], "sigma": 0.3},
            {"a": 0.06, "center": [-0.3, -0.2], "sigma": 0.25},
        ],
        "cutoff": "boundary",
    }
    catalog = {
        "constant": make_medium("constant", {"c": 1.0}, domain),
        "radial": make_medium("radial_polynomial", {"c0": 1.0, "c2": 0.2}, domain),
        "one_bump": make_medium("gaussian_bumps", one_bump, domain),
        "two_bumps": make_medium("gaussian_bumps", two_bumps, domain),
    }
    catalog["radial_plus_bump"] = perturbed_medium(
        catalog["radial"],
        [make_scalar_field("gaussian_bumps", one_bump | {"base": 0.0}, domain)],
        [1.0],
        domain,
    )
    return catalog
