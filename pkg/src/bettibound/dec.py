"""Discrete exterior calculus on closed triangulated surfaces.

The chain complex is carried by integer incidence matrices d0 (edges x
vertices) and d1 (faces x edges) with d1 d0 = 0 exactly.  Diagonal Hodge
stars come from the barycentric dual: star0 holds vertex dual areas,
star1 the ratio of barycentric dual edge length to primal edge length
(always positive, at the price of first-order accuracy), star2 the
inverse face areas.  From these,

    L0 = star0^(-1) d0^T star1 d0                 on vertex functions,
    L1 = d0 star0^(-1) d0^T star1 + star1^(-1) d1^T star2 d1   on edge functions,

both self-adjoint and positive semidefinite in their star-weighted L2
spaces.  The kernel of L1 consists of the harmonic edge functions, whose
dimension equals the first Betti number; an independent combinatorial
count b1 = E - rank(d0) - rank(d1) cross-checks every kernel computation.

Curvature enters through vertex angle defects: K(v) multiplied by the
dual area is 2*pi minus the incident angle sum, and the defects sum to
2*pi times the Euler characteristic (discrete Gauss-Bonnet).  On a
surface the Ricci endomorphism is K times the identity on the two
dimensional cotangent fiber, which is what the bound pipeline feeds into
the matrix potential machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .measure import SelfAdjointOperator, WeightedFiniteSpace
from .mesh import AnalyticSurface, MeshError, TriangleMesh

__all__ = [
    "DECOperators",
    "CurvatureField",
    "build_dec",
    "gaussian_curvature",
    "betti1_oracle",
    "betti1_rank_count",
    "ricci_potential",
    "RicciPotentialData",
    "schrodinger_comparison",
]

GAUSS_BONNET_TOL = 1e-9


@dataclass(frozen=True)
class DECOperators:
    """Incidence matrices and diagonal Hodge stars of a surface mesh."""

    mesh: TriangleMesh
    d0: np.ndarray
    d1: np.ndarray
    star0: np.ndarray
    star1: np.ndarray
    star2: np.ndarray

    def __post_init__(self):
        if np.any(self.star0 <= 0) or np.any(self.star1 <= 0) or np.any(self.star2 <= 0):
            raise MeshError("Hodge star entries must be strictly positive")
        if self.incidence_composition_max() != 0:
            raise MeshError("d1 d0 does not vanish; incidence assembly is broken")

    def incidence_composition_max(self) -> int:
        """max |(d1 d0)_ij| in exact integer arithmetic (sparse, so cheap)."""
        product = csr_matrix(self.d1.astype(np.int64)) @ csr_matrix(
            self.d0.astype(np.int64)
        )
        if product.nnz == 0:
            return 0
        return int(np.max(np.abs(product.data)))

    # Function spaces weighted by the stars.
    def vertex_space(self) -> WeightedFiniteSpace:
        return WeightedFiniteSpace(self.star0)

    def edge_space(self) -> WeightedFiniteSpace:
        return WeightedFiniteSpace(self.star1)

    def laplacian0_matrix(self) -> np.ndarray:
        return (self.d0.T * self.star1[None, :]) @ self.d0 / self.star0[:, None]

    def laplacian1_matrix(self) -> np.ndarray:
        lower = self.d0 @ ((self.d0.T * self.star1[None, :]) / self.star0[:, None])
        upper = (self.d1.T * self.star2[None, :]) @ self.d1 / self.star1[:, None]
        return lower + upper

    def laplacian0(self) -> SelfAdjointOperator:
        return SelfAdjointOperator(self.laplacian0_matrix(), self.vertex_space())

    def laplacian1(self) -> SelfAdjointOperator:
        return SelfAdjointOperator(self.laplacian1_matrix(), self.edge_space())

    def apply_laplacian0(self, values: np.ndarray) -> np.ndarray:
        """L0 applied as a composition; kills constants exactly."""
        grad = self.d0 @ np.asarray(values, dtype=float)
        return (self.d0.T @ (self.star1 * grad)) / self.star0


def build_dec(mesh: TriangleMesh) -> DECOperators:
    """Assemble incidence matrices and barycentric Hodge stars."""
    ne, nv, nf = mesh.edge_count, mesh.vertex_count, mesh.face_count
    d0 = np.zeros((ne, nv), dtype=np.int64)
    d0[np.arange(ne), mesh.edges[:, 0]] = -1
    d0[np.arange(ne), mesh.edges[:, 1]] = 1
    d1 = np.zeros((nf, ne), dtype=np.int64)
    for k in range(3):
        d1[np.arange(nf), mesh.face_edges[:, k]] = mesh.face_signs[:, k]

    # Barycentric dual edge: centroid to edge midpoint in each adjacent
    # face has length median/3, and the median is metric data,
    # m = sqrt(2a^2 + 2b^2 - c^2)/2 toward the side of length c.
    el = mesh.edge_lengths[mesh.face_edges]
    dual_contrib = np.zeros(ne)
    for k in range(3):
        c = el[:, k]
        a = el[:, (k + 1) % 3]
        b = el[:, (k + 2) % 3]
        median = 0.5 * np.sqrt(np.maximum(2 * a**2 + 2 * b**2 - c**2, 0.0))
        np.add.at(dual_contrib, mesh.face_edges[:, k], median / 3.0)
    star1 = dual_contrib / mesh.edge_lengths

    return DECOperators(
        mesh=mesh,
        d0=d0.astype(float),
        d1=d1.astype(float),
        star0=mesh.dual_areas.copy(),
        star1=star1,
        star2=1.0 / mesh.face_areas,
    )


@dataclass(frozen=True)
class CurvatureField:
    """Gaussian curvature per vertex, from angle defects or a closed form."""

    mesh: TriangleMesh
    values: np.ndarray
    source: str  # "angle-defect" or "analytic"

    def gauss_bonnet_residual(self) -> float:
        total = float(np.sum(self.values * self.mesh.dual_areas))
        return abs(total - 2.0 * np.pi * self.mesh.euler_characteristic)

    def min(self) -> float:
        return float(self.values.min())


def gaussian_curvature(
    mesh: TriangleMesh, source: str = "angle-defect", surface: AnalyticSurface = None
) -> CurvatureField:
    """Angle-defect curvature, or the analytic one sampled at vertices.

    The angle-defect field satisfies discrete Gauss-Bonnet by construction
    up to rounding; the residual is verified here so that downstream
    certificates never run on an inconsistent mesh.
    """
    if source == "angle-defect":
        values = mesh.angle_defects() / mesh.dual_areas
        field = CurvatureField(mesh, values, source)
        residual = field.gauss_bonnet_residual()
        if residual > GAUSS_BONNET_TOL * max(1.0, abs(mesh.euler_characteristic)):
            raise MeshError(f"Gauss-Bonnet residual {residual:.3e} exceeds tolerance")
        return field
    if source == "analytic":
        if surface is None:
            raise ValueError("analytic curvature needs the generating surface")
        return CurvatureField(mesh, surface.curvature_values(mesh), source)
    raise ValueError(f"unknown curvature source {source!r}")


def betti1_rank_count(dec: DECOperators) -> int:
    """b1 = E - rank(d0) - rank(d1) over the simplicial chain complex.

    rank(d0) is also recomputed exactly as V minus the number of graph
    components; a mismatch with the numeric rank flags a broken mesh.
    """
    mesh = dec.mesh
    rank_d0 = int(np.linalg.matrix_rank(dec.d0))
    components = _component_count(mesh)
    if rank_d0 != mesh.vertex_count - components:
        raise MeshError(
            f"numeric rank of d0 ({rank_d0}) disagrees with the graph count "
            f"({mesh.vertex_count - components})"
        )
    rank_d1 = int(np.linalg.matrix_rank(dec.d1))
    return mesh.edge_count - rank_d0 - rank_d1


def _component_count(mesh: TriangleMesh) -> int:
    parent = list(range(mesh.vertex_count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in mesh.edges.tolist():
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(v) for v in range(mesh.vertex_count)})


def betti1_oracle(mesh: TriangleMesh, dec: DECOperators = None) -> int:
    """First Betti number by two independent routes, which must agree.

    Route (a): dimension of the kernel of the edge Laplacian L1 under the
    scale-invariant zero tolerance.  Route (b): rank-nullity over the
    chain complex.  Disagreement raises, since it signals a meshing or
    tolerance bug rather than a soft numerical issue.
    """
    if dec is None:
        dec = build_dec(mesh)
    harmonic = dec.laplacian1().kernel_dim()
    combinatorial = betti1_rank_count(dec)
    if harmonic != combinatorial:
        raise MeshError(
            f"Betti oracles disagree: harmonic kernel {harmonic} vs "
            f"combinatorial count {combinatorial}"
        )
    return harmonic


@dataclass(frozen=True)
class RicciPotentialData:
    """Pointwise data of the curvature shortfall potential (Ric - rho0)_-.

    On a surface Ric = K * identity on the 2-dimensional cotangent fiber,
    so the negative part of Ric - rho0 is (rho0 - K)_+ times the identity
    and its squared pointwise HS norm is 2 (rho0 - K)_+^2.
    """

    rho: np.ndarray
    hs_density_sq: np.ndarray
    norm_2hs: float
    shortfall: np.ndarray


def ricci_potential(curvature: CurvatureField, rho0: float) -> RicciPotentialData:
    """rho = K and the (2,HS) norm of the curvature shortfall below rho0."""
    if rho0 <= 0.0:
        raise ValueError("rho0 must be strictly positive")
    k = curvature.values
    shortfall = np.clip(rho0 - k, 0.0, None)
    density = 2.0 * shortfall**2
    norm_sq = float(np.sum(curvature.mesh.dual_areas * density))
    return RicciPotentialData(
        rho=k.copy(),
        hs_density_sq=density,
        norm_2hs=float(np.sqrt(norm_sq)),
        shortfall=shortfall,
    )


def schrodinger_comparison(dec: DECOperators, rho: np.ndarray) -> SelfAdjointOperator:
    """The comparison operator L0 + rho on star0-weighted vertex functions."""
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if rho.size != dec.mesh.vertex_count:
        raise ValueError("rho must be a vertex function")
    matrix = dec.laplacian0_matrix() + np.diag(rho)
    return SelfAdjointOperator(matrix, dec.vertex_space())
