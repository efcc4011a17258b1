"""Surface-tension anisotropy and substrate adhesion fields.

The anisotropy is a spatially varying norm on R^2 pinched between c1|xi| and
c2|xi|; the adhesion coefficient lives on the contact surface and must stay
within +-phi(x, nu_Sigma) there. Both bounds are certified per family and
re-checked by sampling in validate_hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolated, InvariantViolation
from .geometry import Domain, ring_area


class AnisotropyField:
    """Base: positively one-homogeneous extension of a norm on directions.

    Subclasses implement ``unit(x, nu)`` for unit vectors; ``__call__`` scales
    by |xi| and maps xi=0 to 0.
    """

    #: certified norm-equivalence constants (c1 lower, c2 upper)
    bounds: tuple

    def unit(self, x, nu):
        raise NotImplementedError

    def __call__(self, x, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 1:
            n = float(np.linalg.norm(xi))
            if n == 0.0:
                return 0.0
            return n * float(self.unit(x, xi / n))
        norms = np.linalg.norm(xi, axis=-1)
        out = np.zeros(len(xi))
        ok = norms > 0
        if ok.any():
            out[ok] = norms[ok] * self.unit_many(np.asarray(x, float), xi[ok] / norms[ok, None], ok)
        return out

    def unit_many(self, x, nus, mask=None):
        # generic fallback; vectorized families override
        if np.asarray(x).ndim == 1:
            return np.array([self.unit(x, nu) for nu in nus])
        xs = np.asarray(x)[mask] if mask is not None and np.asarray(x).ndim == 2 else x
        return np.array([self.unit(xi, nu) for xi, nu in zip(xs, nus)])

    @property
    def spatially_constant(self) -> bool:
        return True


@dataclass
class Isotropic(AnisotropyField):
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise InvariantViolation("isotropic tension must be positive")
        self.bounds = (self.gamma, self.gamma)

    def unit(self, x, nu):
        return self.gamma

    def unit_many(self, x, nus, mask=None):
        return np.full(len(nus), self.gamma)


@dataclass
class Elliptic(AnisotropyField):
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise InvariantViolation("elliptic axes must be positive")
        self.bounds = (min(self.a, self.b), max(self.a, self.b))

    def unit(self, x, nu):
        return math.sqrt((self.a * nu[0]) ** 2 + (self.b * nu[1]) ** 2)

    def unit_many(self, x, nus, mask=None):
        return np.sqrt((self.a * nus[:, 0]) ** 2 + (self.b * nus[:, 1]) ** 2)


@dataclass
class PNorm(AnisotropyField):
    p: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if self.p < 1:
            raise InvariantViolation("p-norm requires p >= 1")
        if self.scale <= 0:
            raise InvariantViolation("p-norm scale must be positive")
        # ratio of the p-norm to the euclidean norm on the unit circle
        r = 2.0 ** (1.0 / self.p - 0.5)
        lo, hi = (r, 1.0) if self.p >= 2 else (1.0, r)
        self.bounds = (self.scale * lo, self.scale * hi)

    def unit(self, x, nu):
        if math.isinf(self.p):
            return self.scale * max(abs(nu[0]), abs(nu[1]))
        return self.scale * (abs(nu[0]) ** self.p + abs(nu[1]) ** self.p) ** (1.0 / self.p)

    def unit_many(self, x, nus, mask=None):
        if math.isinf(self.p):
            return self.scale * np.abs(nus).max(axis=1)
        return self.scale * (np.abs(nus[:, 0]) ** self.p
                             + np.abs(nus[:, 1]) ** self.p) ** (1.0 / self.p)


@dataclass
class Crystalline(AnisotropyField):
    """max_j |f_j . nu| over a finite set of linear forms."""

    forms: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        F = np.asarray(self.forms, dtype=float)
        if F.ndim != 2 or F.shape[1] != 2 or len(F) == 0:
            raise InvariantViolation("crystalline forms must be a nonempty (k,2) list")
        self.forms = tuple(map(tuple, F))
        self._F = F
        c2 = float(np.linalg.norm(F, axis=1).max())
        c1 = self._min_on_circle()
        if c1 <= 0:
            raise InvariantViolation("crystalline forms do not span the plane")
        self.bounds = (c1, c2)

    def _min_on_circle(self):
        # coarse scan plus golden-section polish around the minimum
        thetas = np.linspace(0.0, math.pi, 4096, endpoint=False)
        nus = np.column_stack([np.cos(thetas), np.sin(thetas)])
        vals = np.abs(nus @ self._F.T).max(axis=1)
        i = int(np.argmin(vals))
        lo, hi = thetas[i] - math.pi / 4096, thetas[i] + math.pi / 4096

        def f(t):
            return max(abs(math.cos(t) * fx + math.sin(t) * fy) for fx, fy in self.forms)

        g = (math.sqrt(5) - 1) / 2
        a, b = lo, hi
        c, d = b - g * (b - a), a + g * (b - a)
        for _ in range(200):
            if f(c) < f(d):
                b, d = d, c
                c = b - g * (b - a)
            else:
                a, c = c, d
                d = a + g * (b - a)
        return f(0.5 * (a + b))

    def unit(self, x, nu):
        return float(np.abs(self._F @ np.asarray(nu, float)).max())

    def unit_many(self, x, nus, mask=None):
        return np.abs(nus @ self._F.T).max(axis=1)


class Modulated(AnisotropyField):
    """base(nu) scaled by a bilinear positive factor sampled on a regular grid."""

    def __init__(self, base: AnisotropyField, grid_values, bbox):
        vals = np.asarray(grid_values, dtype=float)
        if vals.ndim != 2 or vals.min() <= 0:
            raise InvariantViolation("modulation grid must be 2-D and positive")
        self.base = base
        self.values = vals
        self.lo = np.asarray(bbox[0], dtype=float)
        self.hi = np.asarray(bbox[1], dtype=float)
        s_min, s_max = float(vals.min()), float(vals.max())
        self.bounds = (base.bounds[0] * s_min, base.bounds[1] * s_max)
        ny, nx = vals.shape
        # Lipschitz constant of the bilinear interpolant, recorded for reports
        dx = (self.hi[0] - self.lo[0]) / max(nx - 1, 1)
        dy = (self.hi[1] - self.lo[1]) / max(ny - 1, 1)
        gx = np.abs(np.diff(vals, axis=1)).max() / dx if nx > 1 else 0.0
        gy = np.abs(np.diff(vals, axis=0)).max() / dy if ny > 1 else 0.0
        self.lipschitz = float(math.hypot(gx, gy)) * base.bounds[1]

    def scale(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ny, nx = self.values.shape
        u = (x[:, 0] - self.lo[0]) / max(self.hi[0] - self.lo[0], 1e-300) * (nx - 1)
        v = (x[:, 1] - self.lo[1]) / max(self.hi[1] - self.lo[1], 1e-300) * (ny - 1)
        u = np.clip(u, 0, nx - 1 - 1e-12) if nx > 1 else np.zeros_like(u)
        v = np.clip(v, 0, ny - 1 - 1e-12) if ny > 1 else np.zeros_like(v)
        i, j = v.astype(int), u.astype(int)
        fu, fv = u - j, v - i
        V = self.values
        i1 = np.minimum(i + 1, ny - 1)
        j1 = np.minimum(j + 1, nx - 1)
        return ((1 - fu) * (1 - fv) * V[i, j] + fu * (1 - fv) * V[i, j1]
                + (1 - fu) * fv * V[i1, j] + fu * fv * V[i1, j1])

    def unit(self, x, nu):
        return float(self.scale(np.asarray(x, float)[None, :])[0]) * self.base.unit(x, nu)

    def unit_many(self, x, nus, mask=None):
        xs = np.asarray(x, dtype=float)
        if xs.ndim == 1:
            xs = np.broadcast_to(xs, (len(nus), 2))
        elif mask is not None:
            xs = xs[mask]
        return self.scale(xs) * self.base.unit_many(xs, nus)

    @property
    def spatially_constant(self) -> bool:
        return False


def make_anisotropy(spec) -> AnisotropyField:
    """Build a field from its config description (family plus parameters)."""
    if isinstance(spec, AnisotropyField):
        return spec
    spec = dict(spec)
    family = spec.pop("family", "isotropic")
    if family == "isotropic":
        return Isotropic(**spec)
    if family == "elliptic":
        return Elliptic(**spec)
    if family == "pnorm":
        return PNorm(**spec)
    if family == "crystalline":
        forms = spec.pop("forms")
        return Crystalline(tuple(map(tuple, forms)), **spec)
    if family == "modulated":
        base = make_anisotropy(spec.pop("base"))
        return Modulated(base, spec.pop("grid_values"), spec.pop("bbox"))
    raise InvariantViolation(f"unknown anisotropy family {family!r}")


def phi_eval(fieldphi: AnisotropyField, x, xi) -> float:
    """One-homogeneous evaluation |xi| * phi(x, xi/|xi|); zero at xi=0."""
    return fieldphi(x, xi)


# ---------------------------------------------------------------------------
# adhesion
# ---------------------------------------------------------------------------


@dataclass
class AdhesionField:
    """Piecewise-constant adhesion coefficient per contact-surface piece.

    ``values`` has one entry per ``Domain.sigma`` piece; a scalar broadcast
    covers the whole contact surface.
    """

    values: np.ndarray

    @staticmethod
    def constant(beta: float, domain: Domain) -> "AdhesionField":
        return AdhesionField(np.full(max(len(domain.sigma), 1), float(beta)))

    @staticmethod
    def from_values(values, domain: Domain) -> "AdhesionField":
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 0:
            return AdhesionField.constant(float(vals), domain)
        if len(vals) != len(domain.sigma):
            raise InvariantViolation(
                f"adhesion needs {len(domain.sigma)} values, got {len(vals)}")
        return AdhesionField(vals)

    def at(self, domain: Domain, point) -> float:
        """Value on the contact piece nearest to the point."""
        return float(self.values_at(domain, np.asarray(point, float)[None, :])[0])

    def values_at(self, domain: Domain, points) -> np.ndarray:
        if not domain.sigma:
            raise InvariantViolation("no contact surface to evaluate adhesion on")
        a, b = domain.sigma_segments()
        from .geometry import points_segments_distance
        idx = points_segments_distance(np.atleast_2d(points), a, b).argmin(axis=1)
        idx = np.minimum(idx, len(self.values) - 1)
        return self.values[idx]

    def piece_value(self, index: int) -> float:
        return float(self.values[index if index < len(self.values) else 0])


# ---------------------------------------------------------------------------
# hypothesis validation
# ---------------------------------------------------------------------------


@dataclass
class HypothesisReport:
    passed: bool
    norm_margin: float          # worst triangle-inequality slack (>= -tol)
    homogeneity_margin: float   # worst |phi(t xi) - |t| phi(xi)|
    lower_margin: float         # worst phi - c1|xi| (negative = bound broken)
    upper_margin: float         # worst c2|xi| - phi
    adhesion_margin: float      # worst phi(nu_sigma) - |beta|
    worst_location: tuple | None = None
    notes: list = field(default_factory=list)

    def raise_if_failed(self):
        if not self.passed:
            raise HypothesisViolated(
                f"hypothesis check failed: {'; '.join(self.notes)}",
                location=self.worst_location,
                margin=min(self.norm_margin, self.lower_margin,
                           self.upper_margin, self.adhesion_margin),
            )
        return self


def validate_hypotheses(fieldphi: AnisotropyField, beta: AdhesionField | None,
                        domain: Domain, n_samples: int = 512,
                        seed: int = 0, tol: float = 1e-9) -> HypothesisReport:
    """Sample the norm axioms and bounds, plus the adhesion bound along contact.

    Norm axioms are sampled at random directions and random points in the
    container box; the adhesion inequality is checked at every contact piece's
    endpoints and midpoint.
    """
    rng = np.random.default_rng(seed)
    lo, hi = domain.bbox
    xs = lo + rng.random((n_samples, 2)) * (hi - lo)
    xi = rng.normal(size=(n_samples, 2))
    eta = rng.normal(size=(n_samples, 2))
    t = rng.uniform(-3.0, 3.0, size=n_samples)

    c1, c2 = fieldphi.bounds
    notes = []
    worst_loc = None

    phi_xi = np.array([fieldphi(x, v) for x, v in zip(xs, xi)])
    phi_eta = np.array([fieldphi(x, v) for x, v in zip(xs, eta)])
    phi_sum = np.array([fieldphi(x, u + v) for x, u, v in zip(xs, xi, eta)])
    phi_txi = np.array([fieldphi(x, tv * v) for x, tv, v in zip(xs, t, xi)])

    tri = phi_xi + phi_eta - phi_sum
    norm_margin = float(tri.min())
    homog = np.abs(phi_txi - np.abs(t) * phi_xi)
    homog_margin = float(homog.max())

    nxi = np.linalg.norm(xi, axis=1)
    lower = phi_xi - c1 * nxi
    upper = c2 * nxi - phi_xi
    lower_margin = float(lower.min())
    upper_margin = float(upper.min())

    scale = max(c2, 1.0)
    if norm_margin < -tol * scale:
        i = int(np.argmin(tri))
        worst_loc = tuple(xs[i])
        notes.append(f"triangle inequality violated by {-norm_margin:.3e}")
    if homog_margin > tol * scale * 10:
        i = int(np.argmax(homog))
        worst_loc = tuple(xs[i])
        notes.append(f"homogeneity off by {homog_margin:.3e}")
    if lower_margin < -tol * scale:
        notes.append(f"lower norm bound c1 broken by {-lower_margin:.3e}")
    if upper_margin < -tol * scale:
        notes.append(f"upper norm bound c2 broken by {-upper_margin:.3e}")

    adhesion_margin = math.inf
    if beta is not None and domain.sigma:
        for idx, piece in enumerate(domain.sigma):
            bval = beta.piece_value(idx)
            for pt in (piece.a, 0.5 * (piece.a + piece.b), piece.b):
                m = fieldphi(pt, piece.normal) - abs(bval)
                if m < adhesion_margin:
                    adhesion_margin = m
                    if m < -tol * scale:
                        worst_loc = tuple(pt)
        if adhesion_margin < -tol * scale:
            notes.append(f"adhesion bound |beta| <= phi(nu) broken by {-adhesion_margin:.3e}")

    return HypothesisReport(
        passed=not notes,
        norm_margin=norm_margin,
        homogeneity_margin=homog_margin,
        lower_margin=lower_margin,
        upper_margin=upper_margin,
        adhesion_margin=adhesion_margin,
        worst_location=worst_loc,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Wulff construction
# ---------------------------------------------------------------------------


def _clip_halfplane(poly, nu, offset):
    """Sutherland-Hodgman clip of a convex polygon by {x . nu <= offset}."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        dp = np.dot(p, nu) - offset
        dq = np.dot(q, nu) - offset
        if dp <= 0:
            out.append(p)
            if dq > 0:
                out.append(p + (q - p) * (dp / (dp - dq)))
        elif dq <= 0:
            out.append(p + (q - p) * (dp / (dp - dq)))
    return np.array(out) if out else np.zeros((0, 2))


def wulff_shape(fieldphi: AnisotropyField, v: float, n: int = 720):
    """Minimal-surface-energy shape of area v for a spatially constant anisotropy.

    Intersects the supporting half-planes {x . nu <= phi(nu)} over n directions
    and rescales the resulting convex polygon to the requested area.
    """
    if not fieldphi.spatially_constant:
        raise InvariantViolation("Wulff construction needs a spatially constant field")
    if v <= 0:
        raise InvariantViolation("Wulff area must be positive")
    c2 = fieldphi.bounds[1]
    box = 4.0 * c2 * np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    poly = box
    origin = np.zeros(2)
    thetas = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    for th in thetas:
        nu = np.array([math.cos(th), math.sin(th)])
        poly = _clip_halfplane(poly, nu, fieldphi(origin, nu))
        if len(poly) < 3:
            raise InvariantViolation("Wulff clipping collapsed; invalid norm")
    # drop duplicate vertices introduced by collinear clips
    keep = [0]
    for i in range(1, len(poly)):
        if np.linalg.norm(poly[i] - poly[keep[-1]]) > 1e-12 * c2:
            keep.append(i)
    if np.linalg.norm(poly[keep[-1]] - poly[keep[0]]) <= 1e-12 * c2:
        keep.pop()
    poly = poly[keep]
    a = abs(ring_area(poly))
    return poly * math.sqrt(v / a)


def polygon_surface_energy(fieldphi: AnisotropyField, poly) -> float:
    """Closed-polygon anisotropic perimeter: sum of phi(outward normal) * length."""
    p = np.asarray(poly, dtype=float)
    q = np.roll(p, -1, axis=0)
    d = q - p
    ln = np.linalg.norm(d, axis=1)
    ok = ln > 0
    sgn = 1.0 if ring_area(p) > 0 else -1.0
    nus = np.column_stack([sgn * d[ok, 1], -sgn * d[ok, 0]]) / ln[ok, None]
    mids = 0.5 * (p[ok] + q[ok])
    vals = fieldphi.unit_many(mids, nus)
    return float(np.dot(vals, ln[ok]))
