"""Polygonal scene model: container, substrate, free crystal, boundary classes.

Coordinates are plain float pairs; rings are (n,2) numpy arrays. Outer rings
are stored counterclockwise and hole rings clockwise, so the material-outward
normal of an edge (dx,dy) is always (dy,-dx)/len.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
import shapely.geometry as sg

from .errors import (
    DegenerateGeometry,
    InvariantViolation,
    OverlappingInteriors,
    UnclassifiableArc,
)

# ---------------------------------------------------------------------------
# low-level ring / segment kernels
# ---------------------------------------------------------------------------


def ring_area(ring) -> float:
    """Signed shoelace area of a closed ring given as (n,2) vertices."""
    r = np.asarray(ring, dtype=float)
    x, y = r[:, 0], r[:, 1]
    s = float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))
    s += float(x[-1] * y[0] - x[0] * y[-1])
    return 0.5 * s


def ensure_orientation(ring, ccw=True):
    r = np.asarray(ring, dtype=float)
    if (ring_area(r) > 0) != ccw:
        r = r[::-1].copy()
    return r


def polyline_length(pts, closed=False) -> float:
    p = np.asarray(pts, dtype=float)
    if len(p) < 2:
        return 0.0
    q = np.vstack([p, p[:1]]) if closed else p
    return float(np.linalg.norm(np.diff(q, axis=0), axis=1).sum())


def ring_edges(ring):
    """Edges of a closed ring as ((n,2) starts, (n,2) ends)."""
    r = np.asarray(ring, dtype=float)
    return r, np.roll(r, -1, axis=0)


def points_segments_distance(points, seg_a, seg_b):
    """Distance from each point to each segment, shape (npoints, nsegs)."""
    p = np.asarray(points, dtype=float)[:, None, :]
    a = np.asarray(seg_a, dtype=float)[None, :, :]
    b = np.asarray(seg_b, dtype=float)[None, :, :]
    d = b - a
    dd = np.einsum("nmk,nmk->nm", d, d)
    dd = np.where(dd == 0.0, 1.0, dd)
    t = np.clip(np.einsum("nmk,nmk->nm", p - a, d) / dd, 0.0, 1.0)
    closest = a + t[:, :, None] * d
    return np.linalg.norm(p - closest, axis=2)


def point_segments_distance(point, seg_a, seg_b):
    return points_segments_distance(np.asarray(point, dtype=float)[None, :], seg_a, seg_b)[0]


def points_in_ring(points, ring):
    """Crossing-number test; boundary points are resolved arbitrarily."""
    p = np.asarray(points, dtype=float)
    a, b = ring_edges(ring)
    x, y = p[:, 0][:, None], p[:, 1][:, None]
    x1, y1 = a[:, 0][None, :], a[:, 1][None, :]
    x2, y2 = b[:, 0][None, :], b[:, 1][None, :]
    straddle = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = straddle & (x < xs)
    return np.bitwise_xor.reduce(hits, axis=1) if hits.shape[1] else np.zeros(len(p), bool)


def _orient(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_cross(a1, a2, b1, b2, eps=0.0) -> bool:
    """True for a proper (transversal) crossing, endpoint touches excluded."""
    d1 = _orient(b1, b2, a1)
    d2 = _orient(b1, b2, a2)
    d3 = _orient(a1, a2, b1)
    d4 = _orient(a1, a2, b2)
    return (d1 * d2 < -eps) and (d3 * d4 < -eps)


def segment_segment_distance(a1, a2, b1, b2) -> float:
    if segments_cross(a1, a2, b1, b2):
        return 0.0
    pts = np.array([a1, a2], dtype=float)
    d1 = points_segments_distance(pts, np.array([b1]), np.array([b2])).min()
    pts = np.array([b1, b2], dtype=float)
    d2 = points_segments_distance(pts, np.array([a1]), np.array([a2])).min()
    return float(min(d1, d2))


def _freeze(arr):
    a = np.ascontiguousarray(np.asarray(arr, dtype=float))
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# scene types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolygonWithHoles:
    """Positive-area region bounded by one outer ring and optional hole rings."""

    outer: np.ndarray
    holes: tuple = ()

    @staticmethod
    def make(outer, holes=()):
        out = ensure_orientation(outer, ccw=True)
        if len(out) < 3:
            raise DegenerateGeometry("polygon needs at least 3 vertices")
        hs = tuple(_freeze(ensure_orientation(h, ccw=False)) for h in holes)
        return PolygonWithHoles(_freeze(out), hs)

    def rings(self):
        return (self.outer,) + tuple(self.holes)

    @property
    def area(self) -> float:
        # holes are CW so their signed area is already negative
        return ring_area(self.outer) + sum(ring_area(h) for h in self.holes)

    def contains_points(self, points):
        inside = points_in_ring(points, self.outer)
        for h in self.holes:
            inside &= ~points_in_ring(points, h)
        return inside

    def to_shapely(self):
        return sg.Polygon(self.outer, [h for h in self.holes])


@dataclass(frozen=True)
class Slit:
    """Zero-width polyline defect, tagged crack (interior) or filament (exterior)."""

    points: np.ndarray
    tag: str  # "crack" | "filament"

    @staticmethod
    def make(points, tag):
        if tag not in ("crack", "filament"):
            raise InvariantViolation(f"unknown slit tag {tag!r}")
        pts = _freeze(points)
        if len(pts) < 2:
            raise DegenerateGeometry("slit needs at least 2 points")
        return Slit(pts, tag)

    @property
    def length(self) -> float:
        return polyline_length(self.points)


@dataclass(frozen=True)
class SigmaPiece:
    """One straight piece of the contact surface with the substrate-exterior normal."""

    a: np.ndarray
    b: np.ndarray
    normal: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))


@dataclass(frozen=True)
class Domain:
    """Fixed container, substrates and their shared contact surface."""

    container: PolygonWithHoles
    substrates: tuple
    sigma: tuple  # tuple of SigmaPiece
    snap_tol: float

    @property
    def diameter(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    @property
    def bbox(self):
        pts = [self.container.outer]
        for s in self.substrates:
            pts.append(s.outer)
        allp = np.vstack(pts)
        return allp.min(axis=0), allp.max(axis=0)

    @property
    def container_area(self) -> float:
        return self.container.area

    def sigma_length(self) -> float:
        return sum(p.length for p in self.sigma)

    def sigma_segments(self):
        if not self.sigma:
            return np.zeros((0, 2)), np.zeros((0, 2))
        return (np.array([p.a for p in self.sigma]),
                np.array([p.b for p in self.sigma]))

    def on_sigma(self, points, tol=None):
        """Boolean mask: points within tol of the contact surface."""
        tol = self.snap_tol if tol is None else tol
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.sigma:
            return np.zeros(len(pts), bool)
        a, b = self.sigma_segments()
        return points_segments_distance(pts, a, b).min(axis=1) <= tol

    def sigma_normal_at(self, point):
        """Normal of the nearest contact piece (adjacent-segment rule at corners)."""
        if not self.sigma:
            raise InvariantViolation("domain has no contact surface")
        a, b = self.sigma_segments()
        d = point_segments_distance(point, a, b)
        return self.sigma[int(np.argmin(d))].normal

    def container_boundary_segments(self):
        segs_a, segs_b = [], []
        for ring in self.container.rings():
            a, b = ring_edges(ring)
            segs_a.append(a)
            segs_b.append(b)
        return np.vstack(segs_a), np.vstack(segs_b)

    def on_container_wall(self, points, tol=None):
        tol = self.snap_tol if tol is None else tol
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a, b = self.container_boundary_segments()
        return points_segments_distance(pts, a, b).min(axis=1) <= tol

    def contains_points(self, points, tol=None):
        """Closure test: inside the container or within tol of its boundary."""
        tol = self.snap_tol if tol is None else tol
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.container.contains_points(pts)
        return inside | self.on_container_wall(pts, tol)

    def covers_shape(self, shapely_geom, tol=None) -> bool:
        """Closure containment for whole shapes; robust at concave corners."""
        tol = self.snap_tol if tol is None else tol
        cached = self.__dict__.get("_container_buffered")
        if cached is None:
            cached = self.container.to_shapely().buffer(100 * tol)
            object.__setattr__(self, "_container_buffered", cached)
        return bool(cached.covers(shapely_geom))


def build_domain(container, substrates=(), snap_tol=None, container_holes=()) -> Domain:
    """Assemble a Domain and derive the contact surface from edge overlaps.

    The contact surface is the set of substrate boundary edges that lie on the
    container boundary (collinear within the snap tolerance). Its normal is
    the substrate-exterior normal, pointing into the container.
    """
    cont = PolygonWithHoles.make(container, container_holes)
    if abs(cont.area) < 1e-14:
        raise DegenerateGeometry("container has near-zero area")
    subs = tuple(PolygonWithHoles.make(s) for s in substrates)

    pts = np.vstack([cont.outer] + [s.outer for s in subs]) if subs else cont.outer
    diameter = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if snap_tol is None:
        snap_tol = 1e-9 * diameter

    cont_sh = cont.to_shapely()
    for s in subs:
        if abs(s.area) < 1e-14:
            raise DegenerateGeometry("substrate has near-zero area")
        inter = cont_sh.intersection(s.to_shapely()).area
        if inter > snap_tol * diameter:
            raise OverlappingInteriors(
                f"container and substrate interiors overlap (area {inter:.3e})")

    pieces = []
    ca, cb = None, None
    rings = cont.rings()
    ca = np.vstack([ring_edges(r)[0] for r in rings])
    cb = np.vstack([ring_edges(r)[1] for r in rings])
    for s in subs:
        sa, sb = ring_edges(s.outer)
        for i in range(len(sa)):
            p, q = sa[i], sb[i]
            d = q - p
            ln = np.linalg.norm(d)
            if ln <= snap_tol:
                continue
            u = d / ln
            nrm = np.array([u[1], -u[0]])  # substrate-exterior normal
            for j in range(len(ca)):
                r, t = ca[j], cb[j]
                e = t - r
                le = np.linalg.norm(e)
                if le <= snap_tol:
                    continue
                # parallel and on the same line?
                if abs(u[0] * e[1] - u[1] * e[0]) > snap_tol:
                    continue
                if abs(np.dot(r - p, nrm)) > snap_tol:
                    continue
                t0 = np.dot(r - p, u)
                t1 = np.dot(t - p, u)
                lo, hi = max(0.0, min(t0, t1)), min(ln, max(t0, t1))
                if hi - lo > snap_tol:
                    pieces.append(SigmaPiece(_freeze(p + lo * u), _freeze(p + hi * u),
                                             _freeze(nrm)))
    return Domain(cont, subs, tuple(pieces), snap_tol)


# ---------------------------------------------------------------------------
# free crystal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeCrystal:
    """Polygonal material region with zero-width slits and debonded contact segments."""

    components: tuple = ()
    slits: tuple = ()
    delamination: tuple = ()  # (2,2) segments lying on the contact surface

    @staticmethod
    def make(components=(), slits=(), delamination=()):
        comps = tuple(c if isinstance(c, PolygonWithHoles) else PolygonWithHoles.make(*c)
                      if isinstance(c, tuple) else PolygonWithHoles.make(c)
                      for c in components)
        sl = tuple(s if isinstance(s, Slit) else Slit.make(*s) for s in slits)
        dl = tuple(_freeze(seg) for seg in delamination)
        return FreeCrystal(comps, sl, dl)

    # -- measures ----------------------------------------------------------

    @property
    def area(self) -> float:
        return float(sum(c.area for c in self.components))

    def boundary_curves(self):
        """Closed rings and slit polylines making up the topological boundary."""
        curves = []
        for c in self.components:
            for r in c.rings():
                curves.append((np.vstack([r, r[:1]]), True))
        for s in self.slits:
            curves.append((s.points, False))
        return curves

    def boundary_segments(self):
        segs_a, segs_b = [], []
        for c in self.components:
            for r in c.rings():
                a, b = ring_edges(r)
                segs_a.append(a)
                segs_b.append(b)
        for s in self.slits:
            segs_a.append(s.points[:-1])
            segs_b.append(s.points[1:])
        if not segs_a:
            return np.zeros((0, 2)), np.zeros((0, 2))
        return np.vstack(segs_a), np.vstack(segs_b)

    def contains_points(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(len(pts), bool)
        for c in self.components:
            inside |= c.contains_points(pts)
        return inside

    # -- validation ---------------------------------------------------------

    def validate(self, domain: Domain, m: int | None = None, snap_tol=None):
        """Check all structural invariants; raise InvariantViolation on failure."""
        tol = domain.snap_tol if snap_tol is None else snap_tol
        scale = max(domain.diameter, 1.0)
        shapes = []
        for c in self.components:
            sh = c.to_shapely()
            if not sh.is_valid:
                raise InvariantViolation("component ring is self-intersecting")
            if sh.area < 1e-12 * scale * scale:
                raise DegenerateGeometry("component has near-zero area")
            shapes.append(sh)
            verts = np.vstack([r for r in c.rings()])
            if not domain.contains_points(verts, 10 * tol).all():
                raise InvariantViolation("component leaves the container")
        for i in range(len(shapes)):
            for j in range(i + 1, len(shapes)):
                if shapes[i].intersection(shapes[j]).area > tol * scale:
                    raise InvariantViolation("components overlap")

        for s in self.slits:
            mids = 0.5 * (s.points[:-1] + s.points[1:])
            probe = np.vstack([s.points, mids])
            inside = self.contains_points(probe)
            on_bdry = self._near_own_boundary(probe, tol, exclude_slit=s)
            if s.tag == "crack":
                # cracks live in the closed material region
                if not (inside | on_bdry | self._near_slit(probe, s, tol)).all():
                    raise InvariantViolation("crack slit leaves the material region")
            else:
                if (inside & ~on_bdry).any():
                    raise InvariantViolation("filament slit enters the material interior")
            self._check_no_transversal_crossing(s, tol)

        sa_all, sb_all = self.boundary_segments()
        for seg in self.delamination:
            probe = np.vstack([seg, seg.mean(axis=0)[None, :]])
            if not domain.on_sigma(probe, 10 * tol).all():
                raise InvariantViolation("delamination segment off the contact surface")
            if len(sa_all):
                d = points_segments_distance(probe, sa_all, sb_all).min(axis=1)
                if (d > 10 * tol).any():
                    raise InvariantViolation("delamination segment off the crystal boundary")
            else:
                raise InvariantViolation("delamination without crystal boundary")

        if m is not None and self.component_count(tol) > m:
            raise InvariantViolation(
                f"boundary has {self.component_count(tol)} components, budget is {m}")
        return self

    def _near_slit(self, points, slit, tol):
        return points_segments_distance(points, slit.points[:-1], slit.points[1:]).min(axis=1) <= tol

    def _near_own_boundary(self, points, tol, exclude_slit=None):
        segs_a, segs_b = [], []
        for c in self.components:
            for r in c.rings():
                a, b = ring_edges(r)
                segs_a.append(a)
                segs_b.append(b)
        for s in self.slits:
            if s is exclude_slit:
                continue
            segs_a.append(s.points[:-1])
            segs_b.append(s.points[1:])
        if not segs_a:
            return np.zeros(len(points), bool)
        return points_segments_distance(points, np.vstack(segs_a),
                                        np.vstack(segs_b)).min(axis=1) <= tol

    def _check_no_transversal_crossing(self, slit, tol):
        for i in range(len(slit.points) - 1):
            p, q = slit.points[i], slit.points[i + 1]
            for c in self.components:
                for r in c.rings():
                    a, b = ring_edges(r)
                    for j in range(len(a)):
                        if segments_cross(p, q, a[j], b[j]):
                            raise InvariantViolation(
                                "slit crosses a polygon edge transversally")

    # -- topology ------------------------------------------------------------

    def component_count(self, snap_tol=1e-9) -> int:
        """Connected components of the boundary: rings and slits merged on touch."""
        curves = self.boundary_curves()
        n = len(curves)
        if n == 0:
            return 0
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(n):
            pi, _ = curves[i]
            ai, bi = pi[:-1], pi[1:]
            for j in range(i + 1, n):
                if find(i) == find(j):
                    continue
                pj, _ = curves[j]
                aj, bj = pj[:-1], pj[1:]
                if self._curves_touch(ai, bi, aj, bj, snap_tol):
                    parent[find(j)] = find(i)
        return len({find(i) for i in range(n)})

    @staticmethod
    def _curves_touch(ai, bi, aj, bj, tol):
        d = points_segments_distance(np.vstack([ai, bi]), aj, bj)
        if d.min() <= tol:
            return True
        d = points_segments_distance(np.vstack([aj, bj]), ai, bi)
        if d.min() <= tol:
            return True
        for k in range(len(ai)):
            for l in range(len(aj)):
                if segments_cross(ai[k], bi[k], aj[l], bj[l]):
                    return True
        return False


def area(crystal: FreeCrystal) -> float:
    """Material area: component areas minus hole areas; slits contribute zero."""
    return crystal.area


# ---------------------------------------------------------------------------
# boundary classification
# ---------------------------------------------------------------------------


class ArcClass(enum.Enum):
    FREE_BOUNDARY = "free_boundary"
    CRACK = "crack"
    FILAMENT = "filament"
    WETTING_LAYER = "wetting"
    CONTACT = "contact"
    DELAMINATION = "delamination"


@dataclass(frozen=True)
class ClassifiedArc:
    segment: np.ndarray  # (2,2)
    cls: ArcClass
    normal: np.ndarray
    multiplicity: int
    on_wall: bool = False
    length: float = 0.0
    midpoint: np.ndarray = None

    def __post_init__(self):
        if self.length == 0.0:
            object.__setattr__(self, "length",
                               float(np.linalg.norm(self.segment[1] - self.segment[0])))
        if self.midpoint is None:
            object.__setattr__(self, "midpoint",
                               0.5 * (self.segment[0] + self.segment[1]))


def _collect_split_points(domain: Domain, crystal: FreeCrystal):
    pts = []
    for piece in domain.sigma:
        pts.append(piece.a)
        pts.append(piece.b)
    for seg in crystal.delamination:
        pts.append(seg[0])
        pts.append(seg[1])
    for ring in domain.container.rings():
        pts.extend(ring)
    return np.array(pts) if pts else np.zeros((0, 2))


def _split_edges_at_points(P0, P1, normals, splitters, tol):
    """Split edges passing near splitter points; returns piece arrays.

    Only edges actually carrying an interior splitter are cut, so the common
    case is a pass-through.
    """
    if len(P0) == 0 or len(splitters) == 0:
        return P0, P1, normals
    d = P1 - P0
    ln2 = (d * d).sum(axis=1)
    ln = np.sqrt(ln2)
    diff = splitters[None, :, :] - P0[:, None, :]
    t = np.einsum("esk,ek->es", diff, d) / ln2[:, None]
    proj = P0[:, None, :] + t[..., None] * d[:, None, :]
    dist = np.linalg.norm(proj - splitters[None, :, :], axis=2)
    eps_t = (tol / np.maximum(ln, 1e-300))[:, None]
    near = (dist <= tol) & (t > eps_t) & (t < 1 - eps_t)
    needs = near.any(axis=1)
    if not needs.any():
        return P0, P1, normals
    keep0, keep1, keepn = [P0[~needs]], [P1[~needs]], [normals[~needs]]
    for e in np.where(needs)[0]:
        cuts = sorted(set([0.0, 1.0] + list(np.round(t[e][near[e]], 15))))
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            if t1 <= t0:
                continue
            keep0.append((P0[e] + t0 * d[e])[None, :])
            keep1.append((P0[e] + t1 * d[e])[None, :])
            keepn.append(normals[e][None, :])
    return np.vstack(keep0), np.vstack(keep1), np.vstack(keepn)


def _near_segments(points, seg_a, seg_b, tol):
    if len(seg_a) == 0 or len(points) == 0:
        return np.zeros(len(points), bool)
    return points_segments_distance(points, seg_a, seg_b).min(axis=1) <= tol


def classify_boundary(crystal: FreeCrystal, domain: Domain, snap_tol=None):
    """Assign every boundary arc to exactly one surface-tension class.

    Ring edges: on the contact surface they are contact or (if listed in the
    delamination set) delamination; anywhere else they are free boundary, with
    a flag for pieces lying on the container wall away from the substrate.
    Slits: cracks count twice; filaments count twice off the contact surface
    and become wetting layer on it.
    """
    tol = domain.snap_tol if snap_tol is None else snap_tol
    test_tol = 10 * tol
    splitters = _collect_split_points(domain, crystal)
    sig_a, sig_b = domain.sigma_segments()
    sig_normals = (np.array([p.normal for p in domain.sigma])
                   if domain.sigma else np.zeros((0, 2)))
    del_a = (np.array([s[0] for s in crystal.delamination])
             if crystal.delamination else np.zeros((0, 2)))
    del_b = (np.array([s[1] for s in crystal.delamination])
             if crystal.delamination else np.zeros((0, 2)))
    wall_a, wall_b = domain.container_boundary_segments()

    arcs = []

    # ring edges ------------------------------------------------------------
    starts, ends = [], []
    for comp in crystal.components:
        for ring in comp.rings():
            a, b = ring_edges(ring)
            starts.append(a)
            ends.append(b)
    if starts:
        P0 = np.vstack(starts)
        P1 = np.vstack(ends)
        d = P1 - P0
        ln = np.linalg.norm(d, axis=1)
        keep = ln > tol
        P0, P1, d, ln = P0[keep], P1[keep], d[keep], ln[keep]
        outward = np.column_stack([d[:, 1], -d[:, 0]]) / ln[:, None]
        P0, P1, outward = _split_edges_at_points(P0, P1, outward, splitters, test_tol)
        mids = 0.5 * (P0 + P1)
        lens = np.linalg.norm(P1 - P0, axis=1)

        if len(sig_a):
            dist_sig = points_segments_distance(mids, sig_a, sig_b)
            on_sig = dist_sig.min(axis=1) <= test_tol
            sig_idx = dist_sig.argmin(axis=1)
        else:
            on_sig = np.zeros(len(mids), bool)
            sig_idx = np.zeros(len(mids), int)
        near_del = _near_segments(mids, del_a, del_b, test_tol)
        on_wall = _near_segments(mids, wall_a, wall_b, test_tol)
        inside = domain.container.contains_points(mids)

        bad = ~on_sig & ~on_wall & ~inside
        if bad.any():
            raise UnclassifiableArc(
                f"edge piece at {mids[bad][0]} lies outside the container")
        for i in range(len(mids)):
            seg = np.array([P0[i], P1[i]])
            if on_sig[i]:
                nu = sig_normals[sig_idx[i]]
                cls = ArcClass.DELAMINATION if near_del[i] else ArcClass.CONTACT
                arcs.append(ClassifiedArc(seg, cls, nu, 1,
                                          length=float(lens[i]), midpoint=mids[i]))
            else:
                arcs.append(ClassifiedArc(seg, ArcClass.FREE_BOUNDARY,
                                          outward[i], 1, on_wall=bool(on_wall[i]),
                                          length=float(lens[i]), midpoint=mids[i]))

    # slits ------------------------------------------------------------------
    for slit in crystal.slits:
        P0 = slit.points[:-1]
        P1 = slit.points[1:]
        d = P1 - P0
        ln = np.linalg.norm(d, axis=1)
        keep = ln > tol
        P0, P1, d, ln = P0[keep], P1[keep], d[keep], ln[keep]
        if len(P0) == 0:
            continue
        perp = np.column_stack([d[:, 1], -d[:, 0]]) / ln[:, None]
        if slit.tag == "crack":
            for i in range(len(P0)):
                arcs.append(ClassifiedArc(np.array([P0[i], P1[i]]),
                                          ArcClass.CRACK, perp[i], 2))
            continue
        P0, P1, perp = _split_edges_at_points(P0, P1, perp, splitters, test_tol)
        mids = 0.5 * (P0 + P1)
        lens = np.linalg.norm(P1 - P0, axis=1)
        if len(sig_a):
            dist_sig = points_segments_distance(mids, sig_a, sig_b)
            on_sig = dist_sig.min(axis=1) <= test_tol
            sig_idx = dist_sig.argmin(axis=1)
        else:
            on_sig = np.zeros(len(mids), bool)
            sig_idx = np.zeros(len(mids), int)
        for i in range(len(mids)):
            seg = np.array([P0[i], P1[i]])
            if on_sig[i]:
                arcs.append(ClassifiedArc(seg, ArcClass.WETTING_LAYER,
                                          sig_normals[sig_idx[i]], 1,
                                          length=float(lens[i]), midpoint=mids[i]))
            else:
                arcs.append(ClassifiedArc(seg, ArcClass.FILAMENT,
                                          perp[i], 2,
                                          length=float(lens[i]), midpoint=mids[i]))
    return arcs


def class_lengths(arcs):
    """Total arc length per class (multiplicity not applied)."""
    totals = {c: 0.0 for c in ArcClass}
    for arc in arcs:
        totals[arc.cls] += arc.length
    return totals


def boundary_length(crystal: FreeCrystal, cls=None, domain: Domain | None = None,
                    snap_tol=None) -> float:
    """Boundary length, optionally restricted to one class.

    Without a domain only tag-based filters are available (crack/filament
    straight from the slit tags, everything else needs classification).
    """
    if cls is None:
        total = 0.0
        for c in crystal.components:
            for r in c.rings():
                total += polyline_length(r, closed=True)
        total += sum(s.length for s in crystal.slits)
        return total
    if domain is None:
        if cls == ArcClass.CRACK:
            return sum(s.length for s in crystal.slits if s.tag == "crack")
        if cls == ArcClass.FILAMENT:
            return sum(s.length for s in crystal.slits if s.tag == "filament")
        raise InvariantViolation(f"class {cls} requires a domain to classify against")
    return class_lengths(classify_boundary(crystal, domain, snap_tol))[cls]


def component_count(crystal: FreeCrystal, snap_tol=1e-9) -> int:
    return crystal.component_count(snap_tol)


# ---------------------------------------------------------------------------
# signed distance and convergence diagnostic
# ---------------------------------------------------------------------------


def sdist(points, crystal: FreeCrystal):
    """Signed distance to the crystal boundary: negative inside, +inf if empty."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    scalar = np.asarray(points).ndim == 1
    a, b = crystal.boundary_segments()
    if len(a) == 0:
        out = np.full(len(pts), np.inf)
        return float(out[0]) if scalar else out
    d = points_segments_distance(pts, a, b).min(axis=1)
    inside = crystal.contains_points(pts)
    out = np.where(inside, -d, d)
    return float(out[0]) if scalar else out


def hausdorff_gap(crystal_a: FreeCrystal, crystal_b: FreeCrystal,
                  domain: Domain | None = None, bbox=None, n: int = 256) -> float:
    """Sup over a sample grid of |sdist difference|; diagnostic for shape convergence."""
    if bbox is None:
        if domain is not None:
            lo, hi = domain.bbox
        else:
            pts = [np.vstack(c.rings()) for c in crystal_a.components + crystal_b.components]
            pts += [s.points for s in crystal_a.slits + crystal_b.slits]
            allp = np.vstack(pts)
            lo, hi = allp.min(axis=0), allp.max(axis=0)
    else:
        lo, hi = np.asarray(bbox[0], float), np.asarray(bbox[1], float)
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    da = sdist(grid, crystal_a)
    db = sdist(grid, crystal_b)
    return float(np.abs(da - db).max())


# ---------------------------------------------------------------------------
# geometry file I/O
# ---------------------------------------------------------------------------


def crystal_to_dict(crystal: FreeCrystal) -> dict:
    return {
        "components": [
            {"vertices": c.outer.tolist(),
             "holes": [h.tolist() for h in c.holes]}
            for c in crystal.components
        ],
        "slits": [{"vertices": s.points.tolist(), "tag": s.tag} for s in crystal.slits],
        "delamination": [seg.tolist() for seg in crystal.delamination],
    }


def crystal_from_dict(data: dict) -> FreeCrystal:
    comps = [PolygonWithHoles.make(c["vertices"], c.get("holes", ()))
             for c in data.get("components", [])]
    slits = [Slit.make(s["vertices"], s["tag"]) for s in data.get("slits", [])]
    delam = [np.asarray(seg, dtype=float) for seg in data.get("delamination", [])]
    return FreeCrystal.make(comps, slits, delam)


def domain_to_dict(domain: Domain) -> dict:
    return {
        "container": domain.container.outer.tolist(),
        "container_holes": [h.tolist() for h in domain.container.holes],
        "substrates": [s.outer.tolist() for s in domain.substrates],
        "snap_tol": domain.snap_tol,
    }


def domain_from_dict(data: dict) -> Domain:
    return build_domain(data["container"], data.get("substrates", ()),
                        snap_tol=data.get("snap_tol"),
                        container_holes=data.get("container_holes", ()))


def save_geometry(path, domain: Domain, crystal: FreeCrystal):
    payload = {"domain": domain_to_dict(domain), "crystal": crystal_to_dict(crystal)}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def load_geometry(path):
    with open(path) as fh:
        payload = json.load(fh)
    return domain_from_dict(payload["domain"]), crystal_from_dict(payload["crystal"])
