"""Weighted finite measure spaces and operators on vector-valued L2.

Everything downstream works over a finite set of N points with strictly
positive weights m(x).  Functions take values in R^n (the fiber) and the
inner product is the weighted one,

    <f, g>_m = sum_x m(x) f(x).g(x).

Operators act on the stacked coordinates (point-major, so index x*n + i
addresses fiber coordinate i at point x).  An operator A is self-adjoint
on L2(m) exactly when the conjugated matrix

    S = M^(1/2) A M^(-1/2),    M = diag(weights repeated per fiber slot),

is symmetric.  All singular value and eigenvalue computations here run on
S, so a single Euclidean symmetric eigensolver serves for all weighted
geometry.

Norms provided:

* ``schatten_norm(A, p)``: the l^p norm of the singular values of S.
* ``two_inf_norm(A)``: the L2(m) -> L^inf norm with Euclidean fiber norm,
  which for a kernel operator is the largest weighted L2 norm of a kernel
  row.
* ``one_two_norm(A)``: the L1(m) -> L2(m) norm, equal by duality to the
  2->inf norm of the weighted adjoint.
* ``operator_norm(A)``: the ordinary L2(m) -> L2(m) norm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WeightedFiniteSpace",
    "VectorFunction",
    "WeightedOperator",
    "SelfAdjointOperator",
    "OperatorNormReport",
    "weighted_inner_product",
    "semigroup",
    "singular_values",
    "schatten_norm",
    "schatten_power_sum",
    "hs_norm",
    "operator_norm",
    "two_inf_norm",
    "one_two_norm",
]

# An eigenvalue counts as zero iff |lambda| <= ZERO_TOL * (1 + spectral radius).
ZERO_TOL = 1e-9

SELFADJOINT_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-10


class DimensionMismatchError(ValueError):
    """Operands live on different spaces or have incompatible shapes."""


@dataclass(frozen=True)
class WeightedFiniteSpace:
    """Finite measure space: N points carrying strictly positive weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise ValueError("space needs at least one point")
        if not np.all(w > 0.0):
            raise ValueError("all weights must be strictly positive")
        if not np.isfinite(w.sum()) or w.sum() <= 0.0:
            raise ValueError("total mass must be finite and positive")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def point_count(self) -> int:
        return self.weights.size

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def stacked_weights(self, fiber: int) -> np.ndarray:
        """Weight of each stacked coordinate (each m(x) repeated fiber times)."""
        return np.repeat(self.weights, fiber)

    def same_as(self, other: "WeightedFiniteSpace") -> bool:
        return self.weights.shape == other.weights.shape and np.array_equal(
            self.weights, other.weights
        )


@dataclass(frozen=True)
class VectorFunction:
    """An element of L2(m; R^n), stored as an N x n array of values."""

    values: np.ndarray
    space: WeightedFiniteSpace

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[0] != self.space.point_count:
            raise DimensionMismatchError(
                f"values of shape {v.shape} do not match a space with "
                f"{self.space.point_count} points"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def fiber(self) -> int:
        return self.values.shape[1]

    def norm(self) -> float:
        return float(np.sqrt(weighted_inner_product(self, self)))

    def pointwise_norm(self) -> np.ndarray:
        """Scalar function x -> |f(x)| with the Euclidean fiber norm."""
        return np.linalg.norm(self.values, axis=1)


def weighted_inner_product(f: VectorFunction, g: VectorFunction) -> float:
    """<f, g>_m = sum_x m(x) f(x).g(x)."""
    if not f.space.same_as(g.space) or f.fiber != g.fiber:
        raise DimensionMismatchError("inner product operands live on different spaces")
    return float(np.sum(f.space.weights * np.sum(f.values * g.values, axis=1)))


@dataclass(frozen=True)
class OperatorNormReport:
    """A Schatten exponent (or the aliases 'hs'/'tr') with the norm value."""

    p: float | str
    value: float

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("norm values are nonnegative")

    @property
    def exponent(self) -> float:
        if self.p == "hs":
            return 2.0
        if self.p == "tr":
            return 1.0
        return float(self.p)


class WeightedOperator:
    """A linear operator on L2(m; R^n), held as its dense stacked matrix."""

    def __init__(self, matrix, space: WeightedFiniteSpace, fiber: int = 1):
        if fiber < 1:
            raise ValueError("fiber dimension must be at least 1")
        mat = np.array(matrix, dtype=float)
        dim = space.point_count * fiber
        if mat.shape != (dim, dim):
            raise DimensionMismatchError(
                f"matrix of shape {mat.shape} does not act on a space of "
                f"stacked dimension {dim}"
            )
        mat.setflags(write=False)
        self.matrix = mat
        self.space = space
        self.fiber = fiber
        self._sqrt_w = np.sqrt(space.stacked_weights(fiber))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def conjugated(self) -> np.ndarray:
        """M^(1/2) A M^(-1/2); symmetric iff A is self-adjoint on L2(m)."""
        return (self._sqrt_w[:, None] * self.matrix) / self._sqrt_w[None, :]

    def apply(self, f: VectorFunction) -> VectorFunction:
        if not f.space.same_as(self.space) or f.fiber != self.fiber:
            raise DimensionMismatchError("function does not live on the operator's space")
        out = self.matrix @ f.values.reshape(-1)
        return VectorFunction(out.reshape(-1, self.fiber), self.space)

    def apply_array(self, values: np.ndarray) -> np.ndarray:
        vals = np.asarray(values, dtype=float)
        return (self.matrix @ vals.reshape(-1)).reshape(vals.shape)

    def adjoint(self) -> "WeightedOperator":
        """The adjoint with respect to the weighted inner product."""
        w = self.space.stacked_weights(self.fiber)
        mat = (self.matrix.T * w[None, :]) / w[:, None]
        return WeightedOperator(mat, self.space, self.fiber)

    def compose(self, other: "WeightedOperator") -> "WeightedOperator":
        self._check_compatible(other)
        return WeightedOperator(self.matrix @ other.matrix, self.space, self.fiber)

    def _check_compatible(self, other: "WeightedOperator"):
        if not self.space.same_as(other.space) or self.fiber != other.fiber:
            raise DimensionMismatchError("operators live on different spaces")


class SelfAdjointOperator(WeightedOperator):
    """Self-adjoint operator with its weighted spectral decomposition cached.

    The decomposition A = U diag(w) U^T M has eigenvalues w ascending and
    columns of U orthonormal in the weighted inner product (U^T M U = I).
    Construction verifies self-adjointness of the conjugated matrix and
    that the decomposition reconstructs it to relative tolerance 1e-10.
    """

    def __init__(self, matrix, space, fiber=1, _decomposition=None):
        super().__init__(matrix, space, fiber)
        conj = self.conjugated()
        scale = float(np.linalg.norm(conj))
        asym = float(np.max(np.abs(conj - conj.T))) if conj.size else 0.0
        if asym > SELFADJOINT_TOL * max(scale, 1e-300) and asym > 1e-14:
            raise ValueError(
                f"operator is not self-adjoint on the weighted space "
                f"(asymmetry {asym:.3e} vs scale {scale:.3e})"
            )
        if _decomposition is None:
            sym = 0.5 * (conj + conj.T)
            evals, evecs = np.linalg.eigh(sym)
        else:
            evals, evecs = _decomposition
            evals = np.asarray(evals, dtype=float)
            evecs = np.asarray(evecs, dtype=float)
        residual = float(
            np.linalg.norm((evecs * evals[None, :]) @ evecs.T - conj)
        )
        if residual > RECONSTRUCTION_TOL * max(scale, 1.0):
            raise ValueError(
                f"spectral decomposition does not reconstruct the operator "
                f"(residual {residual:.3e} vs scale {scale:.3e})"
            )
        evals.setflags(write=False)
        evecs.setflags(write=False)
        self.eigenvalues = evals
        self._euclidean_vectors = evecs

    @classmethod
    def from_spectrum(
        cls,
        space: WeightedFiniteSpace,
        eigenvalues: np.ndarray,
        euclidean_vectors: np.ndarray,
        fiber: int = 1,
    ) -> "SelfAdjointOperator":
        """Build U diag(w) U^T M from eigendata of the conjugated matrix.

        ``euclidean_vectors`` is Euclidean-orthonormal (the eigenvectors of
        the conjugated symmetric matrix); eigenvalues must be ascending.
        """
        evals = np.asarray(eigenvalues, dtype=float)
        order = np.argsort(evals, kind="stable")
        evals = evals[order]
        q = np.asarray(euclidean_vectors, dtype=float)[:, order]
        conj = (q * evals[None, :]) @ q.T
        sqrt_w = np.sqrt(space.stacked_weights(fiber))
        mat = (conj / sqrt_w[:, None]) * sqrt_w[None, :]
        return cls(mat, space, fiber, _decomposition=(evals, q))

    @property
    def basis(self) -> np.ndarray:
        """m-orthonormal eigenvectors as columns, matching ``eigenvalues``."""
        return self._euclidean_vectors / self._sqrt_w[:, None]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def zero_threshold(self) -> float:
        return ZERO_TOL * (1.0 + self.spectral_radius)

    def kernel_dim(self) -> int:
        return int(np.count_nonzero(np.abs(self.eigenvalues) <= self.zero_threshold()))

    def kernel_basis(self) -> np.ndarray:
        """m-orthonormal basis of the kernel (columns; may be empty)."""
        mask = np.abs(self.eigenvalues) <= self.zero_threshold()
        return self.basis[:, mask]

    def eigen_multiplicity(self, value: float) -> int:
        return int(
            np.count_nonzero(np.abs(self.eigenvalues - value) <= self.zero_threshold())
        )

    def semigroup(self, t: float) -> "SelfAdjointOperator":
        """exp(-t A) via spectral calculus; shares the cached eigenbasis."""
        if t < 0.0:
            raise ValueError("semigroup time must be nonnegative")
        new_vals = np.exp(-t * self.eigenvalues)
        return SelfAdjointOperator.from_spectrum(
            self.space, new_vals, self._euclidean_vectors, self.fiber
        )

    def shifted(self, c: float) -> "SelfAdjointOperator":
        """A + c in place of A, reusing the eigenbasis."""
        return SelfAdjointOperator.from_spectrum(
            self.space, self.eigenvalues + c, self._euclidean_vectors, self.fiber
        )

    def apply_inverse_of_one_minus_semigroup(self, t: float) -> WeightedOperator:
        """(I - exp(-t A))^(-1), valid when all eigenvalues are positive.

        Applied via the spectral decomposition, never by a generic linear
        solve, so symmetry is preserved exactly.
        """
        gaps = 1.0 - np.exp(-t * self.eigenvalues)
        if np.any(gaps <= 0.0):
            raise ValueError("I - exp(-tA) is singular: operator has spectrum <= 0")
        return SelfAdjointOperator.from_spectrum(
            self.space, 1.0 / gaps, self._euclidean_vectors, self.fiber
        )


def semigroup(operator: SelfAdjointOperator, t: float) -> SelfAdjointOperator:
    """Free-function form of ``SelfAdjointOperator.semigroup``."""
    return operator.semigroup(t)


def singular_values(operator: WeightedOperator) -> np.ndarray:
    """Singular values in the weighted metric, descending.

    Uses |eigenvalues| when the conjugated matrix is symmetric (cheaper and
    exact for self-adjoint operators), otherwise a full SVD.
    """
    conj = operator.conjugated()
    asym = float(np.max(np.abs(conj - conj.T))) if conj.size else 0.0
    scale = float(np.max(np.abs(conj))) if conj.size else 0.0
    if asym <= 1e-13 * max(scale, 1.0):
        vals = np.abs(np.linalg.eigvalsh(0.5 * (conj + conj.T)))
        return np.sort(vals)[::-1]
    return np.linalg.svd(conj, compute_uv=False)


def schatten_power_sum(operator: WeightedOperator, p: float) -> float:
    """sum_i s_i(A)^p, the p-th power of the Schatten norm, computed directly."""
    if p <= 0.0:
        raise ValueError("Schatten exponent must be positive")
    s = singular_values(operator)
    return float(np.sum(s**p))


def schatten_norm(operator: WeightedOperator, p: float) -> float:
    """l^p norm of the weighted singular values; quasi-norm for p in (0,1)."""
    if p <= 0.0:
        raise ValueError("Schatten exponent must be positive")
    if p < 1.0:
        warnings.warn(
            f"p={p} < 1 gives a quasi-norm without the triangle inequality",
            stacklevel=2,
        )
    s = singular_values(operator)
    if s.size == 0:
        return 0.0
    top = float(s[0])
    if top == 0.0:
        return 0.0
    # Scale out the largest singular value so s^p cannot overflow/underflow.
    return float(top * np.sum((s / top) ** p) ** (1.0 / p))


def hs_norm(operator: WeightedOperator) -> float:
    """Hilbert-Schmidt norm (Schatten p=2) in the weighted metric."""
    return float(np.linalg.norm(operator.conjugated()))


def operator_norm(operator: WeightedOperator) -> float:
    """L2(m) -> L2(m) operator norm (largest weighted singular value)."""
    s = singular_values(operator)
    return float(s[0]) if s.size else 0.0


def two_inf_norm(operator: WeightedOperator) -> float:
    """L2(m) -> L^inf norm with the Euclidean norm on fibers.

    Exact on finite spaces: the block row of A at point x, mapped through
    M^(-1/2), has largest singular value equal to sup over the weighted
    unit ball of |Af(x)|; the norm is the max over points.  For a scalar
    kernel operator this is max_x of the weighted L2 norm of the kernel
    row k(x, .).
    """
    n = operator.fiber
    inv_sqrt = 1.0 / operator._sqrt_w
    scaled = operator.matrix * inv_sqrt[None, :]
    best = 0.0
    for x in range(operator.space.point_count):
        block = scaled[x * n : (x + 1) * n, :]
        if n == 1:
            val = float(np.linalg.norm(block))
        else:
            val = float(np.linalg.svd(block, compute_uv=False)[0])
        best = max(best, val)
    return best


def one_two_norm(operator: WeightedOperator) -> float:
    """L1(m) -> L2(m) norm; by duality the 2->inf norm of the adjoint."""
    return two_inf_norm(operator.adjoint())
