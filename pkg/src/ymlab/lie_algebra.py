"""Structure algebra of the gauge group.

Only U(1) and SU(2) are supported.  Elements of the Lie algebra are stored as
real coefficient vectors in an orthonormal basis of anti-Hermitian matrices,
and every bracket is a contraction with precomputed structure constants.
Array-valued helpers take the basis index as the *leading* axis so that whole
lattice fields can be bracketed at once.

Adding another compact group means supplying a basis and an inner-product
normalization making that basis orthonormal; everything else is derived.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidInput

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

GROUP_TAGS = {"U1": 1, "SU2": 2}


@dataclass(frozen=True, eq=False)
class GroupSpec:
    name: str
    dim: int
    basis: np.ndarray = field(repr=False)
    ip_normalization: float
    structure_constants: np.ndarray = field(repr=False)
    commutator_bound: float
    # nonzero (a, b, c, f_abc) entries; the hot-loop bracket walks this list
    _terms: tuple = field(repr=False, default=())

    @property
    def abelian(self) -> bool:
        return not self._terms

    @property
    def tag(self) -> int:
        return GROUP_TAGS[self.name]

    def inner(self, X: np.ndarray, Y: np.ndarray) -> float:
        """Inner product of two matrices in the algebra: -ip_normalization * Re tr(XY)."""
        return float(-self.ip_normalization * np.real(np.trace(X @ Y)))

    def __eq__(self, other):
        return isinstance(other, GroupSpec) and other.name == self.name

    def __hash__(self):
        return hash(self.name)


def _build(name: str, basis: np.ndarray, norm: float) -> GroupSpec:
    dim = basis.shape[0]
    f = np.zeros((dim, dim, dim))
    for a in range(dim):
        for b in range(dim):
            C = basis[a] @ basis[b] - basis[b] @ basis[a]
            for c in range(dim):
                f[a, b, c] = -norm * np.real(np.trace(basis[c] @ C))
    f[np.abs(f) < 1e-14] = 0.0
    terms = tuple(
        (a, b, c, float(f[a, b, c]))
        for a in range(dim)
        for b in range(dim)
        for c in range(dim)
        if f[a, b, c] != 0.0
    )
    spec = GroupSpec(name, dim, basis, norm, f, 0.0, terms)
    object.__setattr__(spec, "commutator_bound", _measure_commutator_bound(spec))
    return spec


def _measure_commutator_bound(g: GroupSpec) -> float:
    """sup over unit x of the operator norm of ad x.

    ad x depends linearly on x, so its norm is attained on the unit sphere; a
    deterministic sample of directions plus the basis vectors is enough for the
    low-dimensional algebras used here.
    """
    if g.dim == 1 or not g._terms:
        return 0.0
    rng = np.random.default_rng(12345)
    dirs = np.vstack([np.eye(g.dim), rng.standard_normal((256, g.dim))])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    best = 0.0
    for x in dirs:
        ad = np.einsum("a,abc->cb", x, g.structure_constants)
        best = max(best, np.linalg.norm(ad, 2))
    return float(best)


@lru_cache(maxsize=None)
def u1() -> GroupSpec:
    return _build("U1", np.array([[[1j]]]), 1.0)


@lru_cache(maxsize=None)
def su2() -> GroupSpec:
    # e_a = -(i/2) sigma_a, orthonormal for <X, Y> = -2 tr(XY)
    return _build("SU2", -0.5j * _PAULI, 2.0)


def group_spec(name: str) -> GroupSpec:
    try:
        return {"U1": u1, "SU2": su2}[name.upper()]()
    except KeyError:
        raise InvalidInput(f"unsupported group {name!r}; expected U1 or SU2") from None


def group_from_tag(tag: int) -> GroupSpec:
    for name, t in GROUP_TAGS.items():
        if t == tag:
            return group_spec(name)
    raise InvalidInput(f"unknown group tag {tag}")


@dataclass(frozen=True)
class LieValue:
    coeffs: np.ndarray
    group: GroupSpec

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != self.group.dim:
            raise InvalidInput(
                f"expected {self.group.dim} coefficients for {self.group.name}, got {c.shape[0]}"
            )
        object.__setattr__(self, "coeffs", c)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs**2)))

    def matrix(self) -> np.ndarray:
        return to_matrix(self.coeffs, self.group)

    def __add__(self, other):
        return LieValue(self.coeffs + other.coeffs, self.group)

    def __sub__(self, other):
        return LieValue(self.coeffs - other.coeffs, self.group)

    def __mul__(self, s):
        return LieValue(self.coeffs * s, self.group)

    __rmul__ = __mul__


# -- array-level primitives (basis index on axis 0) --------------------------


def bracket(x: np.ndarray, y: np.ndarray, g: GroupSpec) -> np.ndarray:
    """[x, y] for coefficient arrays of shape (dim, ...)."""
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    for a, b, c, fabc in g._terms:
        out[c] += fabc * (x[a] * y[b])
    return out


def inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pointwise inner product, summing over the leading basis axis."""
    return np.sum(x * y, axis=0)


def to_matrix(coeffs: np.ndarray, g: GroupSpec) -> np.ndarray:
    """Matrix representative; coeffs (dim, ...) -> (..., N, N)."""
    c = np.asarray(coeffs, dtype=float)
    return np.tensordot(np.moveaxis(c, 0, -1), g.basis, axes=([-1], [0]))


def from_matrix(M: np.ndarray, g: GroupSpec) -> np.ndarray:
    """Project (..., N, N) algebra matrices onto basis coefficients (dim, ...)."""
    coeffs = -g.ip_normalization * np.real(np.einsum("...ij,aji->a...", M, g.basis))
    return coeffs


def commutator(X: LieValue, Y: LieValue, g: GroupSpec) -> LieValue:
    if X.group != g or Y.group != g:
        raise InvalidInput("commutator arguments belong to different groups")
    return LieValue(bracket(X.coeffs, Y.coeffs, g), g)


def ad_invariance_check(X: LieValue, Y: LieValue, Z: LieValue, g: GroupSpec) -> float:
    """|<[X,Y],Z> + <Y,[X,Z]>|, zero for an Ad-invariant inner product."""
    lhs = float(np.dot(bracket(X.coeffs, Y.coeffs, g), Z.coeffs))
    rhs = float(np.dot(Y.coeffs, bracket(X.coeffs, Z.coeffs, g)))
    return abs(lhs + rhs)


def jacobi_residual(X: LieValue, Y: LieValue, Z: LieValue, g: GroupSpec) -> float:
    x, y, z = X.coeffs, Y.coeffs, Z.coeffs
    r = bracket(x, bracket(y, z, g), g) + bracket(y, bracket(z, x, g), g) + bracket(z, bracket(x, y, g), g)
    return float(np.linalg.norm(r))


# -- group level --------------------------------------------------------------


def exp_coeffs(coeffs: np.ndarray, g: GroupSpec) -> np.ndarray:
    """Closed-form exponential of coefficient arrays (dim, ...) -> (..., N, N)."""
    c = np.asarray(coeffs, dtype=float)
    if g.name == "U1":
        return np.exp(1j * c[0])[..., None, None]
    if g.name == "SU2":
        # exp(-(i/2) theta n.sigma) = cos(theta/2) I - i sin(theta/2) n.sigma
        theta = np.sqrt(np.sum(c**2, axis=0))
        half = 0.5 * theta
        # sin(half)/theta with the removable singularity at 0 handled by sinc
        s = 0.5 * np.sinc(half / np.pi)
        cos = np.cos(half)
        shape = theta.shape
        U = np.empty(shape + (2, 2), dtype=complex)
        nx, ny, nz = (s * c[0], s * c[1], s * c[2])
        U[..., 0, 0] = cos - 1j * nz
        U[..., 0, 1] = -1j * nx - ny
        U[..., 1, 0] = -1j * nx + ny
        U[..., 1, 1] = cos + 1j * nz
        return U
    raise InvalidInput(f"no closed-form exponential for {g.name}")


def group_exp(X: LieValue, g: GroupSpec) -> np.ndarray:
    return exp_coeffs(X.coeffs, g)


def log_coeffs(U: np.ndarray, g: GroupSpec) -> np.ndarray:
    """Principal logarithm of group elements (..., N, N) -> coefficients (dim, ...)."""
    U = np.asarray(U, dtype=complex)
    if g.name == "U1":
        return np.angle(U[..., 0, 0])[None]
    if g.name == "SU2":
        a0 = 0.5 * np.real(U[..., 0, 0] + U[..., 1, 1])
        # U = a0 I - i b.sigma  =>  b_a = (i/2) tr(U sigma_a)
        b = np.stack([np.real(0.5j * np.einsum("...ij,ji->...", U, _PAULI[a])) for a in range(3)])
        nb = np.sqrt(np.sum(b**2, axis=0))
        half = np.arctan2(nb, a0)
        safe = np.where(nb > 0, nb, 1.0)
        scale = np.where(nb > 1e-300, 2.0 * half / safe, 2.0)
        return b * scale
    raise InvalidInput(f"no closed-form logarithm for {g.name}")


def adjoint_inverse(U: np.ndarray, coeffs: np.ndarray, g: GroupSpec) -> np.ndarray:
    """Coefficients of U^{-1} X U for X given by coeffs; U (..., N, N), coeffs (dim, ...)."""
    if g.abelian:
        return np.array(coeffs, dtype=float, copy=True)
    X = to_matrix(coeffs, g)
    Ui = np.conj(np.swapaxes(U, -1, -2))
    return from_matrix(Ui @ X @ U, g)
