"""Linear elastic equilibrium on the triangulated scene with mismatch strain.

The stored energy of a displacement u is sum over triangles of
area * (e(u) - E0)^T C (e(u) - E0) in the engineering strain basis
(e11, e22, e12). Piecewise-linear elements make e(u) constant per triangle;
the mismatch term is integrated exactly for constant and affine u0 (centroid
rule for the cross term, mid-edge three-point rule for the pure E0 term).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import HypothesisViolated, NonConvergence, SingularSystem
from .meshing import SUBSTRATE_REGION, Mesh

_DSCALE = np.diag([1.0, 1.0, math.sqrt(2.0)])


def isotropic_matrix(lam: float, mu: float) -> np.ndarray:
    """Energy-density matrix of 2 mu |M|^2 + lam tr(M)^2 in (e11,e22,e12) basis."""
    return np.array([
        [2 * mu + lam, lam, 0.0],
        [lam, 2 * mu + lam, 0.0],
        [0.0, 0.0, 4 * mu],
    ])


def coercivity_constant(cmat: np.ndarray) -> float:
    """Largest c3 with v^T C v >= 2 c3 |M|^2 for all symmetric M."""
    m = np.linalg.inv(_DSCALE) @ cmat @ np.linalg.inv(_DSCALE)
    return 0.5 * float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())


@dataclass
class ElasticTensor:
    """Per-region quadratic energy densities.

    ``film`` applies to every crystal component unless overridden by
    ``component_overrides[index]``; ``substrate`` applies below the contact
    surface. Entries are 3x3 symmetric matrices in the (e11, e22, e12) basis,
    or (lam, mu) pairs converted through ``isotropic_matrix``.
    """

    film: np.ndarray
    substrate: np.ndarray | None = None
    component_overrides: dict = field(default_factory=dict)

    @staticmethod
    def isotropic(lam=1.0, mu=1.0, substrate=None, overrides=None) -> "ElasticTensor":
        sub = None
        if substrate is not None:
            sub = isotropic_matrix(*substrate)
        ov = {k: isotropic_matrix(*v) for k, v in (overrides or {}).items()}
        return ElasticTensor(isotropic_matrix(lam, mu), sub, ov)

    @staticmethod
    def from_matrices(film, substrate=None, overrides=None) -> "ElasticTensor":
        ov = {k: np.asarray(v, float) for k, v in (overrides or {}).items()}
        sub = np.asarray(substrate, float) if substrate is not None else None
        return ElasticTensor(np.asarray(film, float), sub, ov)

    def matrix_for(self, region: int) -> np.ndarray:
        if region == SUBSTRATE_REGION:
            if self.substrate is None:
                raise HypothesisViolated("mesh has substrate but no substrate tensor")
            return self.substrate
        return self.component_overrides.get(region, self.film)

    def c3(self) -> float:
        mats = [self.film] + list(self.component_overrides.values())
        if self.substrate is not None:
            mats.append(self.substrate)
        return min(coercivity_constant(m) for m in mats)

    def validate(self, tol=1e-12):
        for m in [self.film, self.substrate, *self.component_overrides.values()]:
            if m is None:
                continue
            if not np.allclose(m, m.T, atol=1e-10 * max(1.0, abs(m).max())):
                raise HypothesisViolated("elastic tensor is not symmetric")
        c3 = self.c3()
        if c3 <= tol:
            raise HypothesisViolated(f"elastic tensor not coercive (c3={c3:.3e})")
        return c3


@dataclass
class MismatchSpec:
    """Target strain: sym-gradient of an affine map in the film, zero in substrate.

    ``grad`` holds the displacement gradient G of u0(x) = G x. A callable
    ``strain_field(points) -> (n,3)`` overrides it for manufactured tests.
    """

    grad: np.ndarray | None = None
    strain_field: object = None

    @staticmethod
    def lattice(e0: float) -> "MismatchSpec":
        # conventional epitaxy choice u0 = (e0 x1, 0)
        return MismatchSpec(grad=np.array([[e0, 0.0], [0.0, 0.0]]))

    @staticmethod
    def zero() -> "MismatchSpec":
        return MismatchSpec(grad=np.zeros((2, 2)))

    def strain_at(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.strain_field is not None:
            return np.asarray(self.strain_field(pts), dtype=float)
        if self.grad is None:
            return np.zeros((len(pts), 3))
        g = np.asarray(self.grad, dtype=float)
        e = 0.5 * (g + g.T)
        return np.tile([e[0, 0], e[1, 1], e[0, 1]], (len(pts), 1))

    @property
    def is_zero(self) -> bool:
        return self.strain_field is None and (
            self.grad is None or not np.any(self.grad))


@dataclass
class ElasticState:
    mesh: Mesh
    u: np.ndarray
    energy: float
    split: dict
    gauge: str
    residual: float

    def strains(self) -> np.ndarray:
        return _strains(self.mesh, self.u)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _shape_gradients(mesh: Mesh):
    p = mesh.vertices[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    # 2A and barycentric gradient coefficients
    det = ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
           - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    area = 0.5 * np.abs(det)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / det[:, None]
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / det[:, None]
    return b, c, area


def _b_matrices(mesh: Mesh):
    b, c, area = _shape_gradients(mesh)
    m = len(mesh.triangles)
    B = np.zeros((m, 3, 6))
    B[:, 0, 0::2] = b
    B[:, 1, 1::2] = c
    B[:, 2, 0::2] = 0.5 * c
    B[:, 2, 1::2] = 0.5 * b
    return B, area


def _region_matrices(mesh: Mesh, tensor: ElasticTensor):
    mats = np.zeros((len(mesh.triangles), 3, 3))
    for region in np.unique(mesh.regions):
        mats[mesh.regions == region] = tensor.matrix_for(int(region))
    return mats


def _mismatch_vectors(mesh: Mesh, mismatch: MismatchSpec):
    """Per-triangle (centroid value, mid-edge quadrature values) of E0."""
    p = mesh.vertices[mesh.triangles]
    centroids = p.mean(axis=1)
    v0c = mismatch.strain_at(centroids)
    film = mesh.regions != SUBSTRATE_REGION
    v0c[~film] = 0.0
    mids = 0.5 * (p + np.roll(p, -1, axis=1))  # (m,3,2) edge midpoints
    v0q = mismatch.strain_at(mids.reshape(-1, 2)).reshape(len(p), 3, 3)
    v0q[~film] = 0.0
    return v0c, v0q


def _strains(mesh: Mesh, u) -> np.ndarray:
    B, _ = _b_matrices(mesh)
    ul = u.reshape(-1, 2)[mesh.triangles].reshape(len(mesh.triangles), 6)
    return np.einsum("mij,mj->mi", B, ul)


def _assemble(mesh: Mesh, tensor: ElasticTensor, mismatch: MismatchSpec):
    B, area = _b_matrices(mesh)
    C = _region_matrices(mesh, tensor)
    v0c, v0q = _mismatch_vectors(mesh, mismatch)

    Ke = np.einsum("m,mki,mkl,mlj->mij", area, B, C, B)
    fe = np.einsum("m,mki,mkl,ml->mi", area, B, C, v0c)
    # pure mismatch term integrated with the mid-edge rule (exact to quadratics)
    c0_tri = area / 3.0 * np.einsum("mqi,mij,mqj->m", v0q, C, v0q)
    c0c_tri = area * np.einsum("mi,mij,mj->m", v0c, C, v0c)

    n = len(mesh.vertices)
    dof = np.empty((len(mesh.triangles), 6), dtype=int)
    dof[:, 0::2] = 2 * mesh.triangles
    dof[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dof, 6, axis=1).ravel()
    cols = np.tile(dof, (1, 6)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(2 * n, 2 * n)).tocsr()
    f = np.zeros(2 * n)
    np.add.at(f, dof.ravel(), fe.ravel())
    return K, f, float(c0_tri.sum()), (B, area, C, v0c, c0_tri, c0c_tri)


def _gauge_rows(mesh: Mesh, components, only_x=False):
    """Mean-displacement and mean-rotation constraints per connected piece."""
    rows = []
    n = len(mesh.vertices)
    for comp in components:
        nodes = np.where(mesh.node_components == comp)[0]
        w = 1.0 / len(nodes)
        r_tx = np.zeros(2 * n)
        r_tx[2 * nodes] = w
        rows.append(r_tx)
        if only_x:
            continue
        r_ty = np.zeros(2 * n)
        r_ty[2 * nodes + 1] = w
        rows.append(r_ty)
        center = mesh.vertices[nodes].mean(axis=0)
        rel = mesh.vertices[nodes] - center
        r_rot = np.zeros(2 * n)
        r_rot[2 * nodes] = -rel[:, 1] * w
        r_rot[2 * nodes + 1] = rel[:, 0] * w
        rows.append(r_rot)
    return rows


def solve_elastic(mesh: Mesh, tensor: ElasticTensor, mismatch: MismatchSpec,
                  gauge: str = "mean", horizontal_only: bool = False,
                  residual_tol: float = 1e-8) -> ElasticState:
    """Minimize the stored energy over nodal displacements.

    ``gauge`` fixes rigid modes: "mean" constrains mean displacement and mean
    rotation of every connected piece of the mesh graph; "clamp_substrate_bottom"
    pins the lowest substrate edge to zero and mean-gauges any piece left
    floating (a fully delaminated film, for instance). ``horizontal_only``
    freezes the vertical displacement component everywhere.
    """
    K, f, c0, per_tri = _assemble(mesh, tensor, mismatch)
    n = len(mesh.vertices)
    ndof = 2 * n

    fixed = np.zeros(ndof, dtype=bool)
    if horizontal_only:
        fixed[1::2] = True

    comps = np.unique(mesh.node_components)
    gauged_comps = list(comps)
    if gauge == "clamp_substrate_bottom":
        sub_nodes = np.unique(mesh.triangles[mesh.regions == SUBSTRATE_REGION])
        if len(sub_nodes) == 0:
            raise SingularSystem("clamp gauge requested but the mesh has no substrate")
        y_min = mesh.vertices[sub_nodes, 1].min()
        clamp = sub_nodes[mesh.vertices[sub_nodes, 1]
                          <= y_min + 1e-9 * (1 + abs(y_min))]
        fixed[2 * clamp] = True
        fixed[2 * clamp + 1] = True
        clamped_comps = set(mesh.node_components[clamp])
        gauged_comps = [c for c in comps if c not in clamped_comps]
    elif gauge != "mean":
        raise SingularSystem(f"unknown gauge policy {gauge!r}")

    rows = _gauge_rows(mesh, gauged_comps, only_x=horizontal_only)

    free = ~fixed
    idx = np.where(free)[0]
    Kff = K[idx][:, idx]
    ff = f[idx]
    G = (sp.csr_matrix(np.array(rows)[:, idx]) if rows
         else sp.csr_matrix((0, len(idx))))

    kkt = sp.bmat([[Kff, G.T], [G, None]], format="csc") if G.shape[0] else Kff.tocsc()
    rhs = np.concatenate([ff, np.zeros(G.shape[0])]) if G.shape[0] else ff

    try:
        sol = spla.spsolve(kkt, rhs)
    except Exception as exc:  # pragma: no cover - scipy signals vary
        raise SingularSystem(f"direct solve failed: {exc}") from None
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("direct solve returned non-finite values; rigid mode left")

    res = np.linalg.norm(kkt @ sol - rhs)
    rel = res / max(np.linalg.norm(rhs), 1e-300)
    if rel > residual_tol:
        sol, info = spla.minres(kkt, rhs, x0=sol, rtol=1e-10, maxiter=20000)
        rel = np.linalg.norm(kkt @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if info != 0 or rel > residual_tol:
            raise NonConvergence(f"linear solve stalled at relative residual {rel:.3e}")

    u = np.zeros(ndof)
    u[idx] = sol[: len(idx)]
    u2 = u.reshape(-1, 2)

    B, area, C, v0c, c0_tri, c0c_tri = per_tri
    strains = _strains(mesh, u2)
    diff = strains - v0c
    e_tri = area * np.einsum("mi,mij,mj->m", diff, C, diff) + (c0_tri - c0c_tri)
    film_mask = mesh.regions != SUBSTRATE_REGION
    # each summand is a nonnegative quadratic; tiny negatives are roundoff
    split = {
        "film": max(float(e_tri[film_mask].sum()), 0.0),
        "substrate": max(float(e_tri[~film_mask].sum()), 0.0),
    }
    energy = max(float(e_tri.sum()), 0.0)
    return ElasticState(mesh=mesh, u=u2, energy=energy, split=split,
                        gauge=gauge, residual=float(rel))


def elastic_energy(state: ElasticState):
    """Minimized energy with its film/substrate split."""
    return state.energy, dict(state.split)
