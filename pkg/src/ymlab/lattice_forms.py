"""Lie-algebra valued differential forms on a periodic cubic lattice.

Layout
------
A p-form is stored as ``data[c, a, i, j, k]``: ``c`` runs over the sorted
multi-indices of degree p (``COMPONENTS[p]``), ``a`` over the Lie-algebra basis
and ``i, j, k`` over lattice sites along x, y, z.

The lattice is staggered: the component with multi-index ``K`` at site ``x``
lives at ``x + (h/2) * sum(e_i for i in K)``.  So 0-forms sit on vertices,
1-forms on edge midpoints, 2-forms on face centres and 3-forms on cell
centres.  Forward differences then map each degree to the next one *centred*,
and every averaging operator below moves a value by half a cell.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft
from scipy.linalg import eigh_tridiagonal

from . import lie_algebra as la
from .errors import InvalidDegree, InvalidInput

COMPONENTS = {p: list(combinations(range(3), p)) for p in range(4)}
COMPONENT_INDEX = {K: i for p in COMPONENTS for i, K in enumerate(COMPONENTS[p])}

SNAPSHOT_MAGIC = b"YMF1"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdI")


@dataclass(frozen=True)
class Grid:
    n: int
    L: float = 2 * np.pi
    bc: str = "periodic"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise InvalidInput(f"grid needs n >= 4 points per axis, got {self.n}")
        if not self.L > 0:
            raise InvalidInput("box side must be positive")
        if self.bc.lower() != "periodic":
            raise InvalidInput(f"only periodic boundary conditions are supported, got {self.bc!r}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self) -> float:
        return self.h**3

    def coords(self, K=()) -> tuple:
        """Physical coordinates (X, Y, Z) of the staggered location of component K."""
        axes = []
        for d in range(3):
            x = np.arange(self.n) * self.h
            if d in K:
                x = x + 0.5 * self.h
            axes.append(x)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self):
        """Integer-indexed angular wavenumbers along one axis (FFT ordering)."""
        return 2 * np.pi * sfft.fftfreq(self.n, d=self.h)


class FormField:
    """A lattice p-form with values in the Lie algebra of ``group``."""

    __slots__ = ("degree", "grid", "group", "data")

    def __init__(self, degree: int, grid: Grid, group: la.GroupSpec, data: Optional[np.ndarray] = None):
        if degree not in COMPONENTS:
            raise InvalidDegree(f"form degree must be 0..3, got {degree}")
        shape = (len(COMPONENTS[degree]), group.dim) + grid.shape
        if data is None:
            data = np.zeros(shape)
        else:
            data = np.asarray(data, dtype=float)
            if data.shape != shape:
                raise InvalidInput(f"data shape {data.shape} does not match {shape}")
        self.degree = degree
        self.grid = grid
        self.group = group
        self.data = data

    # -- construction ------------------------------------------------------

    @classmethod
    def zeros(cls, degree, grid, group):
        return cls(degree, grid, group)

    @classmethod
    def from_function(cls, degree: int, grid: Grid, group: la.GroupSpec, fn: Callable) -> "FormField":
        """Sample ``fn(K, X, Y, Z) -> array (dim, n, n, n)`` at each component's location."""
        f = cls(degree, grid, group)
        for c, K in enumerate(COMPONENTS[degree]):
            f.data[c] = np.broadcast_to(fn(K, *grid.coords(K)), f.data[c].shape)
        return f

    def zeros_like(self) -> "FormField":
        return FormField(self.degree, self.grid, self.group)

    def copy(self) -> "FormField":
        return FormField(self.degree, self.grid, self.group, self.data.copy())

    def like(self, data) -> "FormField":
        return FormField(self.degree, self.grid, self.group, data)

    def component(self, K) -> np.ndarray:
        return self.data[COMPONENT_INDEX[tuple(K)]]

    @property
    def n_components(self) -> int:
        return self.data.shape[0]

    # -- arithmetic --------------------------------------------------------

    def _check(self, other: "FormField"):
        if not isinstance(other, FormField):
            return NotImplemented
        if other.degree != self.degree or other.grid != self.grid or other.group != self.group:
            raise InvalidInput("form fields differ in degree, grid or group")

    def __add__(self, other):
        self._check(other)
        return self.like(self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        return self.like(self.data - other.data)

    def __mul__(self, s):
        return self.like(self.data * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self.like(self.data / s)

    def __neg__(self):
        return self.like(-self.data)

    def axpy(self, s, other: "FormField") -> "FormField":
        """self + s * other"""
        self._check(other)
        return self.like(self.data + s * other.data)

    def __repr__(self):
        return f"FormField(degree={self.degree}, n={self.grid.n}, group={self.group.name})"

    # -- checks ------------------------------------------------------------

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())

    def validate(self) -> "FormField":
        if not self.is_finite():
            raise InvalidInput("form field contains NaN or Inf")
        return self


def pairwise_sum(x: np.ndarray) -> float:
    """Deterministic sum of all entries.

    numpy reduces contiguous float arrays by blocked pairwise summation, so
    flattening to a fresh contiguous buffer fixes the reduction tree.
    """
    return float(np.add.reduce(np.ascontiguousarray(x).reshape(-1)))


def pointwise_norm(f: FormField) -> np.ndarray:
    """Fibre norm |f(x)| over all components and basis coefficients, shape (n, n, n)."""
    return np.sqrt(np.sum(f.data**2, axis=(0, 1)))


def inner(u: FormField, v: FormField) -> float:
    """L2 inner product <u, v> = h^3 sum over sites, components and basis."""
    u._check(v)
    return u.grid.cell_volume * pairwise_sum(u.data * v.data)


def l2_norm(f: FormField) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def lp_norm(f: FormField, p: float = 2.0) -> float:
    if not p >= 1:
        raise InvalidInput(f"L^p norm needs p >= 1, got {p}")
    mag = pointwise_norm(f)
    if np.isinf(p):
        return float(np.max(mag))
    if p == 2:
        return l2_norm(f)
    return float((f.grid.cell_volume * pairwise_sum(mag**p)) ** (1.0 / p))


# -- staggered stencils on raw arrays (spatial axes are the last three) ------


def shift(a: np.ndarray, axis: int, step: int) -> np.ndarray:
    """a(x + step * h e_axis) on the periodic lattice."""
    return np.roll(a, -step, axis=axis - 3)


def avg_fwd(a, axis):
    return 0.5 * (a + shift(a, axis, 1))


def avg_bwd(a, axis):
    return 0.5 * (a + shift(a, axis, -1))


def avg_fwd_many(a, axes):
    for ax in axes:
        a = avg_fwd(a, ax)
    return a


def avg_bwd_many(a, axes):
    for ax in axes:
        a = avg_bwd(a, ax)
    return a


def diff_fwd(a, axis, h):
    return (shift(a, axis, 1) - a) / h


def diff_bwd(a, axis, h):
    return (a - shift(a, axis, -1)) / h


# -- Sobolev norms -------------------------------------------------------------


@dataclass
class SobolevSpec:
    b: float
    reference_connection: Optional[FormField] = None

    def __post_init__(self):
        if not 0.0 <= self.b <= 1.0:
            raise InvalidInput(f"Sobolev index b must lie in [0, 1], got {self.b}")
        A = self.reference_connection
        if A is not None and A.degree != 1:
            raise InvalidDegree("reference connection must be a 1-form")


def discrete_symbol(grid: Grid) -> np.ndarray:
    """Eigenvalues 4 sum_j sin^2(k_j h / 2) / h^2 of the flat lattice Laplacian."""
    k = grid.wavenumbers()
    s = 4.0 * np.sin(0.5 * k * grid.h) ** 2 / grid.h**2
    return s[:, None, None] + s[None, :, None] + s[None, None, :]


def _spectral_multiplier_norm(f: FormField, mult: np.ndarray, workers: int = 1) -> float:
    fh = sfft.fftn(f.data, axes=(-3, -2, -1), workers=workers)
    N = f.grid.n**3
    return float(np.sqrt(f.grid.cell_volume / N * pairwise_sum(mult * np.abs(fh) ** 2)))


def lanczos_quadratic_form(apply, v: np.ndarray, fn, max_nodes: int = 20, tol: float = 1e-8) -> float:
    """Gauss quadrature estimate of v^T fn(M) v for symmetric M given by ``apply``.

    Runs Lanczos with full reorthogonalisation and stops when two consecutive
    estimates agree to ``tol`` (relative) or after ``max_nodes`` nodes.
    """
    beta0 = float(np.sqrt(np.sum(v * v)))
    if beta0 == 0:
        return 0.0
    Q = [v / beta0]
    alphas, betas = [], []
    prev = None
    est = 0.0
    for k in range(max_nodes):
        w = apply(Q[-1])
        alpha = float(np.sum(w * Q[-1]))
        w = w - alpha * Q[-1] - (betas[-1] * Q[-2] if betas else 0.0)
        for q in Q:
            w = w - np.sum(w * q) * q
        alphas.append(alpha)
        theta, S = eigh_tridiagonal(np.array(alphas), np.array(betas)) if betas else (
            np.array(alphas),
            np.ones((1, 1)),
        )
        est = beta0**2 * float(np.sum(S[0, :] ** 2 * fn(theta)))
        if prev is not None and abs(est - prev) <= tol * abs(est):
            break
        prev = est
        beta = float(np.sqrt(np.sum(w * w)))
        if beta <= 1e-14 * beta0:
            break
        betas.append(beta)
        Q.append(w / beta)
    return est


def h_b_norm(f: FormField, spec: SobolevSpec, *, method: str = "auto", workers: int = 1) -> float:
    """||(1 - Delta_A)^{b/2} f||_2 with Delta_A the lattice Bochner Laplacian.

    With a vanishing (or absent) reference connection the flat multiplier
    (1 + lambda_h(k))^{b} is applied in Fourier space; otherwise, or when
    ``method="lanczos"``, the quadratic form is evaluated by Lanczos quadrature.
    """
    from .covariant_calculus import bochner_laplacian

    if spec.b == 0:
        return l2_norm(f)
    A = spec.reference_connection
    flat = A is None or not np.any(A.data)
    if method == "auto":
        method = "spectral" if flat else "lanczos"
    if method == "spectral":
        if not flat:
            raise InvalidInput("spectral H_b norm requires a zero reference connection")
        return _spectral_multiplier_norm(f, (1.0 + discrete_symbol(f.grid)) ** spec.b, workers)
    if A is None:
        A = FormField.zeros(1, f.grid, f.group)
    vol = f.grid.cell_volume

    def apply(x):
        y = f.like(x.reshape(f.data.shape))
        return (y - bochner_laplacian(A, y)).data.reshape(-1)

    q = lanczos_quadratic_form(apply, f.data.reshape(-1), lambda t: t**spec.b)
    return float(np.sqrt(vol * q))


def h1A_norm(f: FormField, A: FormField) -> float:
    """Gauge-invariant H_1 norm: sum_j ||d_j^A f||^2 + ||f||^2."""
    from .covariant_calculus import covariant_gradient_sq

    return float(np.sqrt(covariant_gradient_sq(A, f) + inner(f, f)))


# -- random fields -------------------------------------------------------------


def spectral_random_field(
    degree: int,
    grid: Grid,
    group: la.GroupSpec,
    s: float,
    rng: np.random.Generator,
    amplitude: float = 1.0,
    kmax: Optional[float] = None,
) -> FormField:
    """Gaussian field with |f^(k)| ~ (1 + |k|^2)^(-s/2 - 3/4) xi_k, rescaled to ||f||_2 = amplitude.

    The mean (k = 0) is removed; ``kmax`` optionally truncates the spectrum.
    """
    f = FormField(degree, grid, group)
    noise = rng.standard_normal(f.data.shape)
    k = grid.wavenumbers()
    k2 = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    filt = (1.0 + k2) ** (-0.5 * s - 0.75)
    filt[0, 0, 0] = 0.0
    if kmax is not None:
        filt[k2 > kmax**2] = 0.0
    f.data = np.real(sfft.ifftn(sfft.fftn(noise, axes=(-3, -2, -1)) * filt, axes=(-3, -2, -1)))
    nrm = l2_norm(f)
    if nrm > 0:
        f.data *= amplitude / nrm
    return f


# -- binary snapshots ----------------------------------------------------------


def write_snapshot(f: FormField, path) -> None:
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, f.degree, f.grid.n, float(f.grid.L), f.group.tag)
    # payload order: z slowest, then y, x, component, basis fastest
    payload = np.ascontiguousarray(np.transpose(f.data, (4, 3, 2, 0, 1)), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_snapshot(path) -> FormField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise InvalidInput("snapshot truncated")
    magic, version, degree, n, L, tag = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise InvalidInput(f"bad snapshot magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise InvalidInput(f"unsupported snapshot version {version}")
    grid = Grid(n, L)
    group = la.group_from_tag(tag)
    ncomp = len(COMPONENTS[degree])
    expected = n**3 * ncomp * group.dim
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if payload.size != expected:
        raise InvalidInput(f"snapshot payload has {payload.size} values, expected {expected}")
    data = payload.reshape(n, n, n, ncomp, group.dim).transpose(3, 4, 2, 1, 0)
    return FormField(degree, grid, group, np.array(data, dtype=float))
