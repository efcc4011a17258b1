"""Built-in problem families: films, cavities, droplets, fracture, debonding.

Each preset assembles a full Problem: scene geometry, anisotropy, adhesion,
elastic tensors, mismatch, target area, budgets, an initial configuration,
and (where the family demands one) a structural move filter that every
accepted configuration must satisfy.
"""

from __future__ import annotations

import math

import numpy as np

from .anisotropy import AdhesionField, Isotropic, make_anisotropy
from .elasticity import ElasticTensor, MismatchSpec
from .errors import UnknownPreset, ValidationError
from .geometry import Domain, FreeCrystal, PolygonWithHoles, build_domain
from .optimizer import Problem, Schedule

PRESET_NAMES = ("thin_film", "crystal_cavity", "capillary", "griffith",
                "mumford_shah", "delamination")


def thin_film_adhesion(gamma_f: float, gamma_s: float, gamma_fs: float) -> float:
    """Relative adhesion from the three interface tensions of the film setting."""
    return -max(min(gamma_f, gamma_s - gamma_fs), -gamma_f)


def _box(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def _centered_square(cx, cy, area, points_per_side: int = 1):
    s = math.sqrt(area) / 2.0
    corners = np.array([[cx - s, cy - s], [cx + s, cy - s],
                        [cx + s, cy + s], [cx - s, cy + s]])
    if points_per_side <= 1:
        return corners
    pts = []
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        for t in np.arange(points_per_side) / points_per_side:
            pts.append(a + t * (b - a))
    return np.array(pts)


# ---------------------------------------------------------------------------
# structural move filters
# ---------------------------------------------------------------------------


def subgraph_filter(domain: Domain):
    """Film profiles: every vertical line meets the crystal in one interval from
    the contact surface.

    Columns are sampled at midpoints between consecutive distinct vertex
    abscissae, which is exact for polygons.
    """

    def check(crystal: FreeCrystal) -> bool:
        if len(crystal.components) != 1 or crystal.components[0].holes:
            return False
        ring = crystal.components[0].outer
        xs = np.unique(np.round(ring[:, 0], 12))
        if len(xs) < 2:
            return False
        cols = 0.5 * (xs[:-1] + xs[1:])
        lo, hi = domain.bbox
        base = lo[1]
        a, b = ring, np.roll(ring, -1, axis=0)
        for x in cols:
            ys = []
            for i in range(len(a)):
                x1, y1 = a[i]
                x2, y2 = b[i]
                if (x1 > x) == (x2 > x):
                    continue
                t = (x - x1) / (x2 - x1)
                ys.append(y1 + t * (y2 - y1))
            if not ys:
                continue
            ys = sorted(ys)
            if len(ys) != 2:
                return False
            if ys[0] > base + 1e-6 * max(1.0, hi[1] - lo[1]):
                return False
        return True

    return check


def starshaped_filter(origin=(0.0, 0.0), n_samples: int = 8):
    """Cavity crystals: segments from the origin to boundary vertices stay inside."""
    origin = np.asarray(origin, dtype=float)

    def check(crystal: FreeCrystal) -> bool:
        if len(crystal.components) != 1:
            return False
        comp = crystal.components[0]
        if not comp.contains_points(origin[None, :])[0]:
            return False
        ts = (np.arange(1, n_samples + 1)) / (n_samples + 1.0)
        for ring in comp.rings():
            for vtx in ring:
                probe = origin[None, :] + ts[:, None] * (vtx - origin)[None, :]
                if not comp.contains_points(probe).all():
                    return False
        return True

    return check


# ---------------------------------------------------------------------------
# preset constructors
# ---------------------------------------------------------------------------


def _pop(overrides, key, default):
    return overrides.pop(key, default)


def make_preset(name: str, overrides: dict | None = None) -> Problem:
    """Fully populated Problem for one of the built-in scenario names."""
    ov = dict(overrides or {})
    if name == "capillary":
        problem = _capillary(ov)
    elif name == "thin_film":
        problem = _thin_film(ov, delamination_moves=False)
    elif name == "delamination":
        problem = _thin_film(ov, delamination_moves=True)
    elif name == "crystal_cavity":
        problem = _crystal_cavity(ov)
    elif name == "griffith":
        problem = _griffith(ov, mumford_shah=False)
    elif name == "mumford_shah":
        problem = _griffith(ov, mumford_shah=True)
    else:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    if ov:
        raise ValidationError([f"unknown override key {k!r} for preset {name}"
                               for k in sorted(ov)])
    return problem


def _capillary(ov) -> Problem:
    v = float(_pop(ov, "v", math.pi))
    lam = float(_pop(ov, "lambda", 10.0))
    m = int(_pop(ov, "m", 1))
    seedless_L = 2.6 * math.sqrt(v)
    L = float(_pop(ov, "box_size", seedless_L))
    phi = make_anisotropy(_pop(ov, "anisotropy", {"family": "isotropic", "gamma": 1.0}))
    iterations = int(_pop(ov, "iterations", 48000))
    max_vertices = int(_pop(ov, "max_vertices", 96))
    h = float(_pop(ov, "h", 0.1))
    container = _pop(ov, "container", None)
    domain = build_domain(container if container is not None
                          else _box(0.0, 0.0, L, L))
    lo, hi = domain.bbox
    init = FreeCrystal.make([_centered_square(0.5 * (lo[0] + hi[0]),
                                              0.5 * (lo[1] + hi[1]), v,
                                              points_per_side=int(_pop(ov, "init_points_per_side", 1)))])
    init = _pop(ov, "init_crystal", init)
    schedule = Schedule(iterations=iterations, max_vertices=max_vertices,
                        t_end_factor=1e-2, polish_rounds=60,
                        move_weights={"slit_grow": 0.0, "slit_retract": 0.0,
                                      "delamination_toggle": 0.0})
    return Problem(domain=domain, phi=phi, beta=None, tensor=None, mismatch=None,
                   v=v, lam=lam, m=m, h=h, preset="capillary",
                   init_crystal=init, schedule=schedule)


def _thin_film(ov, delamination_moves: bool) -> Problem:
    width = float(_pop(ov, "width", 4.0))
    height = float(_pop(ov, "height", 2.0))
    sub_depth = float(_pop(ov, "substrate_depth", 1.0))
    gamma_f = float(_pop(ov, "gamma_f", 1.0))
    gamma_s = float(_pop(ov, "gamma_s", 1.2))
    gamma_fs = float(_pop(ov, "gamma_fs", 0.1))
    e0 = float(_pop(ov, "e0", 0.01))
    film_lam, film_mu = _pop(ov, "film_lame", (1.0, 1.0))
    sub_lam, sub_mu = _pop(ov, "substrate_lame", (10.0, 10.0))
    v = float(_pop(ov, "v", 1.0))
    lam = float(_pop(ov, "lambda", 20.0))
    h = float(_pop(ov, "h", 0.2))
    iterations = int(_pop(ov, "iterations", 400))
    elasticity = bool(_pop(ov, "elasticity", True))

    domain = build_domain(_box(0.0, 0.0, width, height),
                          [_box(0.0, -sub_depth, width, 0.0)])
    beta_val = thin_film_adhesion(gamma_f, gamma_s, gamma_fs)
    beta = AdhesionField.constant(beta_val, domain)
    phi = Isotropic(gamma_f)
    tensor = ElasticTensor.isotropic(film_lam, film_mu,
                                     substrate=(sub_lam, sub_mu)) if elasticity else None
    mismatch = MismatchSpec.lattice(e0) if elasticity else None

    margin = 0.1 * width
    film_h = v / (width - 2 * margin)
    init = FreeCrystal.make([_box(margin, 0.0, width - margin, film_h)])
    init = _pop(ov, "init_crystal", init)
    weights = {"slit_grow": 0.0, "slit_retract": 0.0}
    if not delamination_moves:
        weights["delamination_toggle"] = 0.0
    schedule = Schedule(iterations=iterations, move_weights=weights,
                        max_vertices=128)
    name = "delamination" if delamination_moves else "thin_film"
    return Problem(domain=domain, phi=phi, beta=beta, tensor=tensor,
                   mismatch=mismatch, v=v, lam=lam, m=int(_pop(ov, "m", 1)),
                   h=h, preset=name, gauge=str(_pop(ov, "gauge", "mean")),
                   move_filter=subgraph_filter(domain) if not delamination_moves else None,
                   init_crystal=init, schedule=schedule)


def _crystal_cavity(ov) -> Problem:
    R = float(_pop(ov, "radius", 1.0))
    frame = float(_pop(ov, "frame", 1.5 * R))
    v = float(_pop(ov, "v", 2.4 * R * R))
    e0 = float(_pop(ov, "e0", 0.01))
    elasticity = bool(_pop(ov, "elasticity", True))
    h = float(_pop(ov, "h", 0.25))
    iterations = int(_pop(ov, "iterations", 400))

    # square container surrounded by four trapezoidal substrate blocks whose
    # union borders the whole container boundary
    c = _box(-R, -R, R, R)
    f = frame
    subs = [
        np.array([[-f, -f], [f, -f], [R, -R], [-R, -R]]),   # below
        np.array([[f, -f], [f, f], [R, R], [R, -R]]),       # right
        np.array([[f, f], [-f, f], [-R, R], [R, R]]),       # above
        np.array([[-f, f], [-f, -f], [-R, -R], [-R, R]]),   # left
    ]
    domain = build_domain(c, subs)
    beta = AdhesionField.constant(float(_pop(ov, "beta", 0.0)), domain)
    phi = make_anisotropy(_pop(ov, "anisotropy", {"family": "isotropic", "gamma": 1.0}))
    tensor = ElasticTensor.isotropic(*_pop(ov, "film_lame", (1.0, 1.0)),
                                     substrate=_pop(ov, "substrate_lame", (10.0, 10.0))) \
        if elasticity else None
    mismatch = MismatchSpec.lattice(e0) if elasticity else None
    init = FreeCrystal.make([_centered_square(0.0, 0.0, v)])
    init = _pop(ov, "init_crystal", init)
    schedule = Schedule(iterations=iterations, max_vertices=128,
                        move_weights={"slit_grow": 0.0, "slit_retract": 0.0,
                                      "delamination_toggle": 0.0,
                                      "component_seed": 0.0})
    return Problem(domain=domain, phi=phi, beta=beta, tensor=tensor,
                   mismatch=mismatch, v=v, lam=float(_pop(ov, "lambda", 20.0)),
                   m=int(_pop(ov, "m", 1)), h=h, preset="crystal_cavity",
                   move_filter=starshaped_filter(),
                   init_crystal=init, schedule=schedule)


def _griffith(ov, mumford_shah: bool) -> Problem:
    L = float(_pop(ov, "box_size", 1.0))
    v = float(_pop(ov, "v", 0.64 * L * L))
    e0 = float(_pop(ov, "e0", 0.0))
    h = float(_pop(ov, "h", 0.15))
    iterations = int(_pop(ov, "iterations", 300))
    gamma = float(_pop(ov, "gamma", 1.0))

    domain = build_domain(_box(0.0, 0.0, L, L))  # no substrate: fracture setting
    phi = Isotropic(gamma)
    if mumford_shah:
        # energy density reduces to |grad u1|^2 once u = (u1, 0) is enforced
        cmat = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 4.0]])
        tensor = ElasticTensor.from_matrices(cmat)
    else:
        tensor = ElasticTensor.isotropic(*_pop(ov, "film_lame", (1.0, 1.0)))
    mismatch = MismatchSpec.lattice(e0) if e0 else MismatchSpec.zero()
    init = FreeCrystal.make([_centered_square(L / 2, L / 2, v)])
    init = _pop(ov, "init_crystal", init)
    schedule = Schedule(iterations=iterations, max_vertices=128,
                        move_weights={"delamination_toggle": 0.0,
                                      "component_seed": 0.0})
    return Problem(domain=domain, phi=phi, beta=None, tensor=tensor,
                   mismatch=mismatch, v=v, lam=float(_pop(ov, "lambda", 20.0)),
                   m=int(_pop(ov, "m", 4)), h=h,
                   preset="mumford_shah" if mumford_shah else "griffith",
                   horizontal_only=mumford_shah,
                   init_crystal=init, schedule=schedule)


def droplet_on_substrate(gamma: float, beta: float, v: float,
                         width: float | None = None, height: float | None = None,
                         iterations: int = 24000, lam: float = 2.0,
                         max_vertices: int = 96) -> Problem:
    """Capillary-style problem with a flat contact surface under the droplet.

    The bulk term is off; the droplet interacts with the substrate only
    through the adhesion coefficient, which is the sessile-drop setting.
    """
    width = width if width is not None else 7.0 * math.sqrt(v)
    height = height if height is not None else 3.0 * math.sqrt(v)
    domain = build_domain(_box(0.0, 0.0, width, height),
                          [_box(0.0, -0.5 * math.sqrt(v), width, 0.0)])
    fieldphi = Isotropic(gamma)
    adhesion = AdhesionField.constant(beta, domain)
    side = math.sqrt(v)
    cx = width / 2.0
    init = FreeCrystal.make([_box(cx - side / 2, 0.0, cx + side / 2, side)])
    schedule = Schedule(iterations=iterations, max_vertices=max_vertices,
                        t_end_factor=1e-2, polish_rounds=60,
                        move_weights={"slit_grow": 0.0, "slit_retract": 0.0,
                                      "delamination_toggle": 0.0,
                                      "component_seed": 0.0,
                                      "component_drop": 0.0,
                                      "hole_fill": 0.0})
    return Problem(domain=domain, phi=fieldphi, beta=adhesion, tensor=None,
                   mismatch=None, v=v, lam=lam, m=1, h=0.1,
                   preset="droplet_on_substrate", init_crystal=init,
                   schedule=schedule)
