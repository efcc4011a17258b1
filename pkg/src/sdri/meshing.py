"""Conforming triangulation of crystal plus substrate with seam duplication.

Strategy: build a planar straight-line graph from all material boundaries,
split mutually overlapping or touching constraint segments into elementary
pieces, subdivide to the target edge length, then iterate batch Delaunay
(scipy/Qhull) with midpoint splits until every constraint piece appears as a
mesh edge, inserting circumcenters of poor-quality or oversized triangles
between rounds. Crack and delaminated contact edges are finally opened by
duplicating the nodes along them, one copy per angular wedge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .errors import MeshFailure
from .geometry import (
    Domain,
    FreeCrystal,
    points_segments_distance,
    ring_edges,
)

SUBSTRATE_REGION = -1

# roles a constraint piece can carry; seams get opened after triangulation
ROLE_BOUNDARY = "boundary"
ROLE_CRACK = "crack"
ROLE_DELAM = "delam"


@dataclass
class Mesh:
    vertices: np.ndarray          # (n, 2)
    triangles: np.ndarray         # (m, 3) int
    regions: np.ndarray           # (m,) int, film component index or SUBSTRATE_REGION
    constraint_edges: dict        # frozenset(node pair) -> set of roles
    doubled_pairs: list           # (original, duplicate) node index pairs
    h: float
    node_components: np.ndarray = field(default=None)  # connected piece id per node
    min_angle: float = 0.0

    @property
    def num_doubled(self) -> int:
        return len(self.doubled_pairs)

    def edge_roles(self, i, j):
        return self.constraint_edges.get(frozenset((i, j)), set())

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def to_dict(self):
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "regions": self.regions.tolist(),
            "doubled_pairs": [list(p) for p in self.doubled_pairs],
            "h": self.h,
        }


# ---------------------------------------------------------------------------
# constraint graph assembly
# ---------------------------------------------------------------------------


def _min_angles(verts, tris):
    p = verts[tris]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    angles = []
    for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
        cosv = np.clip((y**2 + z**2 - x**2) / (2 * y * z), -1.0, 1.0)
        angles.append(np.degrees(np.arccos(cosv)))
    return np.minimum(np.minimum(angles[0], angles[1]), angles[2])


def _collect_raw_segments(crystal: FreeCrystal, domain: Domain):
    """All material boundary segments with their roles."""
    segs = []
    for comp in crystal.components:
        for ring in comp.rings():
            a, b = ring_edges(ring)
            for i in range(len(a)):
                segs.append((a[i].copy(), b[i].copy(), {ROLE_BOUNDARY}))
    for s in domain.substrates:
        a, b = ring_edges(s.outer)
        for i in range(len(a)):
            segs.append((a[i].copy(), b[i].copy(), {ROLE_BOUNDARY}))
    for slit in crystal.slits:
        if slit.tag != "crack":
            continue  # filaments carry no elastic degrees of freedom
        for i in range(len(slit.points) - 1):
            segs.append((slit.points[i].copy(), slit.points[i + 1].copy(), {ROLE_CRACK}))
    for seg in crystal.delamination:
        segs.append((np.asarray(seg[0], float), np.asarray(seg[1], float), {ROLE_DELAM}))
    return segs


def _split_at_foreign_points(segs, tol):
    """Split every segment at any other segment endpoint lying on it."""
    endpoints = np.array([p for s in segs for p in (s[0], s[1])])
    out = []
    for a, b, roles in segs:
        d = b - a
        L = float(np.linalg.norm(d))
        if L <= tol:
            continue
        t = np.dot(endpoints - a, d) / (L * L)
        proj = a[None, :] + t[:, None] * d[None, :]
        close = np.linalg.norm(proj - endpoints, axis=1) <= tol
        inner = close & (t * L > tol) & ((1 - t) * L > tol)
        cuts = sorted(set([0.0, 1.0] + list(np.round(t[inner], 14))))
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            if (t1 - t0) * L > tol:
                out.append((a + t0 * d, a + t1 * d, set(roles)))
    return out


def _merge_collinear_duplicates(segs, tol):
    """Merge geometrically identical pieces, unioning their roles.

    After foreign-point splitting, overlapping collinear constraints (film
    bottom edge vs substrate top edge, delamination markers on either) reduce
    to identical elementary pieces.
    """
    canon = {}
    q = max(tol, 1e-13)
    for a, b, roles in segs:
        ka = (round(a[0] / q), round(a[1] / q))
        kb = (round(b[0] / q), round(b[1] / q))
        key = (min(ka, kb), max(ka, kb))
        if key in canon:
            canon[key][2].update(roles)
        else:
            canon[key] = [a, b, set(roles)]
    return list(canon.values())


def _subdivide(segs, h, tol):
    pieces = []
    for a, b, roles in segs:
        L = float(np.linalg.norm(b - a))
        n = max(1, int(math.ceil(L / h - 1e-9)))
        for i in range(n):
            p = a + (b - a) * (i / n)
            q = a + (b - a) * ((i + 1) / n)
            pieces.append((p, q, set(roles)))
    return pieces


class _PointPool:
    """Deduplicating point store with snap quantization."""

    def __init__(self, tol):
        self.tol = max(tol, 1e-13)
        self.points = []
        self.index = {}

    def add(self, p):
        key = (round(p[0] / self.tol), round(p[1] / self.tol))
        if key in self.index:
            return self.index[key]
        idx = len(self.points)
        self.points.append((float(p[0]), float(p[1])))
        self.index[key] = idx
        return idx

    def array(self):
        return np.asarray(self.points, dtype=float)


def _region_of(points, crystal, domain):
    """Region id per point: film component index, substrate, or None."""
    pts = np.atleast_2d(points)
    out = np.full(len(pts), -2, dtype=int)
    for ci, comp in enumerate(crystal.components):
        mask = (out == -2) & comp.contains_points(pts)
        out[mask] = ci
    for s in domain.substrates:
        mask = (out == -2) & s.contains_points(pts)
        out[mask] = SUBSTRATE_REGION
    return out


def _circumcenters(verts, tris):
    p = verts[tris]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    ab, ac = b - a, c - a
    d = 2 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    d = np.where(np.abs(d) < 1e-300, 1e-300, d)
    ab2 = (ab * ab).sum(axis=1)
    ac2 = (ac * ac).sum(axis=1)
    ux = (ac[:, 1] * ab2 - ab[:, 1] * ac2) / d
    uy = (ab[:, 0] * ac2 - ac[:, 0] * ab2) / d
    return a + np.column_stack([ux, uy])


def triangulate(crystal: FreeCrystal, dom: Domain, h: float,
                max_rounds: int = 40, min_angle_target: float = 20.0) -> Mesh:
    """Quality triangulation of crystal and substrate with opened seams.

    Raises MeshFailure when constraint recovery or the angle target cannot be
    met (degenerate input: slit hugging an edge, needle components).
    """
    if h <= 0:
        raise MeshFailure("target edge length must be positive")
    if not crystal.components and not dom.substrates:
        raise MeshFailure("nothing to mesh")
    tol = max(dom.snap_tol, 1e-12 * max(dom.diameter, 1.0))

    segs = _collect_raw_segments(crystal, dom)
    segs = _split_at_foreign_points(segs, 10 * tol)
    segs = _merge_collinear_duplicates(segs, 10 * tol)
    pieces = _subdivide(segs, h, tol)

    pool = _PointPool(10 * tol)
    plist = []  # (i, j, roles)
    for a, b, roles in pieces:
        plist.append([pool.add(a), pool.add(b), roles])

    # interior seeding grid, pruned near constraints
    lo, hi = dom.bbox
    nx = max(2, int(round((hi[0] - lo[0]) / h)) + 1)
    ny = max(2, int(round((hi[1] - lo[1]) / h)) + 1)
    gx = np.linspace(lo[0], hi[0], nx)
    gy = np.linspace(lo[1], hi[1], ny)
    mg = np.meshgrid(gx, gy)
    grid = np.column_stack([mg[0].ravel(), mg[1].ravel()])
    reg = _region_of(grid, crystal, dom)
    grid = grid[reg != -2]
    if len(grid):
        seg_a = np.array([pool.points[i] for i, _, _ in plist])
        seg_b = np.array([pool.points[j] for _, j, _ in plist])
        dmin = points_segments_distance(grid, seg_a, seg_b).min(axis=1)
        grid = grid[dmin > 0.55 * h]
    for g in grid:
        pool.add(g)

    min_len = h / 256.0
    mesh_tris = None
    regions = None
    for round_no in range(max_rounds):
        verts = pool.array()
        if len(verts) < 3:
            raise MeshFailure("not enough points to triangulate")
        dt = Delaunay(verts, qhull_options="Qbb Qc Qz")
        edge_set = set()
        for simplex in dt.simplices:
            for k in range(3):
                edge_set.add(frozenset((int(simplex[k]), int(simplex[(k + 1) % 3]))))

        missing = [idx for idx, (i, j, _) in enumerate(plist)
                   if frozenset((i, j)) not in edge_set]
        changed = False
        if missing:
            replacement = []
            for idx, entry in enumerate(plist):
                i, j, roles = entry
                if idx in set(missing):
                    a, b = verts[i], verts[j]
                    if np.linalg.norm(b - a) < min_len:
                        raise MeshFailure(
                            "constraint recovery stalled; geometry nearly degenerate")
                    mid = pool.add(0.5 * (a + b))
                    replacement.append([i, mid, roles])
                    replacement.append([mid, j, roles])
                    changed = True
                else:
                    replacement.append(entry)
            plist = replacement
            if changed:
                continue

        # region-filter triangles
        centroids = verts[dt.simplices].mean(axis=1)
        regs = _region_of(centroids, crystal, dom)
        keep = regs != -2
        mesh_tris = dt.simplices[keep]
        regions = regs[keep]
        if len(mesh_tris) == 0:
            raise MeshFailure("all triangles fell outside the material regions")

        angles = _min_angles(verts, mesh_tris)
        areas = _tri_areas(verts, mesh_tris)
        bad = (angles < min_angle_target) | (areas > 0.75 * h * h)
        if not bad.any():
            break

        seg_a = np.array([pool.points[i] for i, _, _ in plist])
        seg_b = np.array([pool.points[j] for _, j, _ in plist])
        mid_ab = 0.5 * (seg_a + seg_b)
        rad = 0.5 * np.linalg.norm(seg_b - seg_a, axis=1)

        ccenters = _circumcenters(verts, mesh_tris[bad])
        creg = _region_of(ccenters, crystal, dom)
        to_split = set()
        added = 0
        for c, cr in zip(ccenters, creg):
            d = np.linalg.norm(mid_ab - c, axis=1)
            enc = np.where(d < rad - 1e-12)[0]
            if len(enc):
                for e in enc:
                    if rad[e] * 2 > min_len:
                        to_split.add(int(e))
            elif cr != -2:
                pool.add(c)
                added += 1
        if to_split:
            replacement = []
            for idx, entry in enumerate(plist):
                i, j, roles = entry
                if idx in to_split:
                    mid = pool.add(0.5 * (np.array(pool.points[i]) + np.array(pool.points[j])))
                    replacement.append([i, mid, roles])
                    replacement.append([mid, j, roles])
                else:
                    replacement.append(entry)
            plist = replacement
        elif added == 0:
            break  # nothing insertable left; accept what we have
    else:
        verts = pool.array()

    if mesh_tris is None:
        raise MeshFailure("triangulation did not produce any triangles")

    verts = pool.array()
    worst = float(_min_angles(verts, mesh_tris).min())
    if worst < 0.7 * min_angle_target:
        raise MeshFailure(f"mesh quality stalled at min angle {worst:.2f} deg")

    constraint_edges = {}
    for i, j, roles in plist:
        key = frozenset((i, j))
        constraint_edges.setdefault(key, set()).update(roles)

    mesh = Mesh(vertices=verts, triangles=np.ascontiguousarray(mesh_tris, dtype=int),
                regions=np.ascontiguousarray(regions, dtype=int),
                constraint_edges=constraint_edges, doubled_pairs=[], h=h,
                min_angle=worst)
    _open_seams(mesh)
    _compact(mesh)
    mesh.node_components = _node_components(mesh)
    return mesh


def _tri_areas(verts, tris):
    p = verts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


# ---------------------------------------------------------------------------
# seam opening (doubled nodes along cracks and delamination)
# ---------------------------------------------------------------------------


def _seam_edges(mesh: Mesh):
    return {key for key, roles in mesh.constraint_edges.items()
            if (ROLE_CRACK in roles or ROLE_DELAM in roles)}


def _open_seams(mesh: Mesh):
    """Duplicate nodes along seam edges, one copy per angular wedge.

    Incident triangles of a seam vertex are grouped by walking across shared
    non-seam edges; every wedge beyond the first gets its own node copy. Seam
    endpoints keep a single node (their star stays connected), interior seam
    vertices split in two, seam junctions split into as many wedges as meet.
    """
    seams = _seam_edges(mesh)
    if not seams:
        return
    tris = mesh.triangles
    incident = {}
    for t_idx, tri in enumerate(tris):
        for v in tri:
            incident.setdefault(int(v), []).append(t_idx)

    seam_vertices = sorted({v for key in seams for v in key})
    verts_list = [mesh.vertices]
    extra = []
    next_id = len(mesh.vertices)
    new_edges = {}

    for v in seam_vertices:
        tlist = incident.get(v, [])
        if len(tlist) <= 1:
            continue
        # adjacency among incident triangles across non-seam edges through v
        edge_owner = {}
        adj = {t: set() for t in tlist}
        for t in tlist:
            others = [int(w) for w in tris[t] if int(w) != v]
            for w in others:
                key = (v, w)
                if frozenset(key) in seams:
                    continue
                if key in edge_owner:
                    adj[t].add(edge_owner[key])
                    adj[edge_owner[key]].add(t)
                else:
                    edge_owner[key] = t
        # wedges = connected components
        seen = set()
        wedges = []
        for t in tlist:
            if t in seen:
                continue
            stack, comp = [t], []
            seen.add(t)
            while stack:
                cur = stack.pop()
                comp.append(cur)
                for nb in adj[cur]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            wedges.append(sorted(comp))
        if len(wedges) <= 1:
            continue
        for wedge in wedges[1:]:
            copy_id = next_id
            next_id += 1
            extra.append(mesh.vertices[v].copy())
            mesh.doubled_pairs.append((int(v), copy_id))
            for t in wedge:
                tri = tris[t]
                tris[t] = np.where(tri == v, copy_id, tri)

    if extra:
        mesh.vertices = np.vstack([mesh.vertices, np.array(extra)])
        # remap constraint edge keys onto the surviving (renamed) node pairs
        remapped = {}
        edge_lookup = set()
        for tri in tris:
            for k in range(3):
                edge_lookup.add(frozenset((int(tri[k]), int(tri[(k + 1) % 3]))))
        coords = mesh.vertices
        for key, roles in mesh.constraint_edges.items():
            i, j = tuple(key)
            candidates = [e for e in edge_lookup
                          if _same_segment(coords, e, coords[i], coords[j])]
            for e in candidates:
                remapped.setdefault(e, set()).update(roles)
        mesh.constraint_edges = remapped


def _same_segment(coords, edge_key, a, b):
    i, j = tuple(edge_key)
    p, q = coords[i], coords[j]
    eps = 1e-9 * (np.linalg.norm(b - a) + 1.0)
    return ((np.linalg.norm(p - a) < eps and np.linalg.norm(q - b) < eps)
            or (np.linalg.norm(p - b) < eps and np.linalg.norm(q - a) < eps))


def _compact(mesh: Mesh):
    """Drop vertices referenced by no triangle and renumber."""
    used = np.unique(mesh.triangles)
    remap = -np.ones(len(mesh.vertices), dtype=int)
    remap[used] = np.arange(len(used))
    mesh.vertices = mesh.vertices[used]
    mesh.triangles = remap[mesh.triangles]
    mesh.constraint_edges = {
        frozenset((int(remap[i]), int(remap[j]))): roles
        for (i, j), roles in ((tuple(k), r) for k, r in mesh.constraint_edges.items())
        if remap[i] >= 0 and remap[j] >= 0
    }
    mesh.doubled_pairs = [(int(remap[i]), int(remap[j])) for i, j in mesh.doubled_pairs
                          if remap[i] >= 0 and remap[j] >= 0]


def _node_components(mesh: Mesh):
    n = len(mesh.vertices)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for tri in mesh.triangles:
        a = find(int(tri[0]))
        for v in tri[1:]:
            b = find(int(v))
            if a != b:
                parent[b] = a
    roots = {}
    out = np.zeros(n, dtype=int)
    for i in range(n):
        r = find(i)
        out[i] = roots.setdefault(r, len(roots))
    return out


# ---------------------------------------------------------------------------
# uniform refinement (nested spaces)
# ---------------------------------------------------------------------------


def uniform_refine(mesh: Mesh) -> Mesh:
    """Midpoint subdivision: each triangle into four congruent children.

    Seams stay open automatically: the two sides of a duplicated edge carry
    distinct node pairs, so their midpoints are created separately.
    """
    verts = [tuple(p) for p in mesh.vertices]
    midpoint = {}

    def mid(i, j):
        key = (min(i, j), max(i, j))
        if key not in midpoint:
            midpoint[key] = len(verts)
            verts.append(tuple(0.5 * (mesh.vertices[i] + mesh.vertices[j])))
        return midpoint[key]

    tris, regs = [], []
    for tri, region in zip(mesh.triangles, mesh.regions):
        a, b, c = (int(v) for v in tri)
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]])
        regs.extend([region] * 4)

    constraint_edges = {}
    for key, roles in mesh.constraint_edges.items():
        i, j = tuple(key)
        mk = (min(i, j), max(i, j))
        if mk in midpoint:
            m = midpoint[mk]
            constraint_edges.setdefault(frozenset((i, m)), set()).update(roles)
            constraint_edges.setdefault(frozenset((m, j)), set()).update(roles)
        else:
            constraint_edges.setdefault(key, set()).update(roles)

    out = Mesh(vertices=np.array(verts, dtype=float),
               triangles=np.array(tris, dtype=int),
               regions=np.array(regs, dtype=int),
               constraint_edges=constraint_edges,
               doubled_pairs=list(mesh.doubled_pairs),
               h=mesh.h / 2.0)
    out.min_angle = float(_min_angles(out.vertices, out.triangles).min())
    out.node_components = _node_components(out)
    return out
