"""Gauge-covariant exterior calculus on the staggered periodic lattice.

Conventions (see ``lattice_forms`` for the staggering):

* ``ext_d`` uses forward differences, ``coext_d`` is its exact L2 adjoint.
* ``wedge_comm(u, v)`` brings both factors to the location of the target
  component by half-cell averaging and brackets them there.  It is bilinear
  and graded symmetric, and [u ^ u]_jk = 2 [u_j, u_k] on 1-forms.
* ``interior_comm(u, v)`` is *defined* as the L2 adjoint of w -> [u ^ w], so
  ``cov_d`` and ``cov_d_star`` are exact adjoints of each other.
* The covariant partial derivative ``D_j^A`` is forward-differenced and the
  Bochner Laplacian is -sum_j (D_j^A)^T D_j^A, hence symmetric and <= 0.

All of these are second-order accurate for smooth fields because every value
is evaluated at the centre of the stencil it came from.
"""
from __future__ import annotations

from itertools import combinations

from . import lie_algebra as la
from .errors import InvalidDegree, InvalidInput
from .lattice_forms import (
    COMPONENT_INDEX,
    COMPONENTS,
    FormField,
    avg_bwd,
    avg_bwd_many,
    avg_fwd,
    avg_fwd_many,
    diff_bwd,
    diff_fwd,
    inner,
)


def _perm_sign(I, J) -> int:
    """Sign of the permutation sorting the concatenation I + J."""
    seq = list(I) + list(J)
    sign = 1
    for a in range(len(seq)):
        for b in range(a + 1, len(seq)):
            if seq[a] > seq[b]:
                sign = -sign
    return sign


def _splits(K, p):
    """(I, J, sign) with I u J = K, |I| = p, sign of dx^I ^ dx^J relative to dx^K."""
    for I in combinations(K, p):
        J = tuple(i for i in K if i not in I)
        yield I, J, _perm_sign(I, J)


def _require_degree(f: FormField, degree: int, what: str):
    if f.degree != degree:
        raise InvalidDegree(f"{what} must be a {degree}-form, got degree {f.degree}")


# -- flat operators -------------------------------------------------------------


def ext_d(f: FormField) -> FormField:
    p = f.degree
    if p >= 3:
        raise InvalidDegree("exterior derivative of a 3-form is zero-dimensional; not supported")
    h = f.grid.h
    out = FormField(p + 1, f.grid, f.group)
    for c, K in enumerate(COMPONENTS[p + 1]):
        acc = out.data[c]
        for pos, i in enumerate(K):
            J = K[:pos] + K[pos + 1 :]
            term = diff_fwd(f.data[COMPONENT_INDEX[J]], i, h)
            acc += term if pos % 2 == 0 else -term
    return out


def coext_d(f: FormField) -> FormField:
    p = f.degree
    if p == 0:
        raise InvalidDegree("codifferential of a 0-form is not defined")
    h = f.grid.h
    out = FormField(p - 1, f.grid, f.group)
    for c, J in enumerate(COMPONENTS[p - 1]):
        acc = out.data[c]
        for i in range(3):
            if i in J:
                continue
            K = tuple(sorted(J + (i,)))
            pos = K.index(i)
            # adjoint of the forward difference is minus the backward difference
            term = diff_bwd(f.data[COMPONENT_INDEX[K]], i, h)
            acc -= term if pos % 2 == 0 else -term
    return out


# -- commutator products ---------------------------------------------------------


def wedge_comm(u: FormField, v: FormField) -> FormField:
    p, q = u.degree, v.degree
    if p + q > 3:
        raise InvalidDegree(f"wedge of degrees {p} and {q} exceeds 3")
    if u.group != v.group or u.grid != v.grid:
        raise InvalidInput("wedge factors live on different grids or groups")
    g = u.group
    out = FormField(p + q, u.grid, g)
    if g.abelian:
        return out
    for c, K in enumerate(COMPONENTS[p + q]):
        for I, J, sign in _splits(K, p):
            a = avg_fwd_many(u.data[COMPONENT_INDEX[I]], J)
            b = avg_fwd_many(v.data[COMPONENT_INDEX[J]], I)
            out.data[c] += sign * la.bracket(a, b, g)
    return out


def interior_comm(u: FormField, v: FormField) -> FormField:
    """[u _| v], the L2 adjoint of w -> [u ^ w] (w of degree deg v - deg u)."""
    p, pr = u.degree, v.degree
    r = pr - p
    if r < 0:
        raise InvalidDegree(f"interior product of degree {p} into degree {pr} is undefined")
    if u.group != v.group or u.grid != v.grid:
        raise InvalidInput("interior factors live on different grids or groups")
    g = u.group
    out = FormField(r, u.grid, g)
    if g.abelian:
        return out
    for c, J in enumerate(COMPONENTS[r]):
        rest = tuple(i for i in range(3) if i not in J)
        for I in combinations(rest, p):
            K = tuple(sorted(I + J))
            sign = _perm_sign(I, J)
            a = avg_fwd_many(u.data[COMPONENT_INDEX[I]], J)
            # <[a, y], z> = -<y, [a, z]>, then undo the averaging applied to w
            term = la.bracket(a, v.data[COMPONENT_INDEX[K]], g)
            out.data[c] -= sign * avg_bwd_many(term, I)
    return out


def cov_d(A: FormField, u: FormField) -> FormField:
    _require_degree(A, 1, "connection")
    return ext_d(u) + wedge_comm(A, u)


def cov_d_star(A: FormField, u: FormField) -> FormField:
    _require_degree(A, 1, "connection")
    return coext_d(u) + interior_comm(A, u)


def curvature(A: FormField) -> FormField:
    _require_degree(A, 1, "connection")
    B = ext_d(A)
    if not A.group.abelian:
        B.data += 0.5 * wedge_comm(A, A).data
    return B


# -- covariant partial derivatives, Bochner and Hodge Laplacians ------------------


def covariant_partial(A: FormField, u: FormField, j: int) -> FormField:
    """D_j^A u = D_j^+ u + [A_j, u], evaluated half a cell forward along j."""
    g, h = u.group, u.grid.h
    out = u.like(diff_fwd(u.data, j, h))
    if not g.abelian:
        Aj = A.data[j]
        for c, K in enumerate(COMPONENTS[u.degree]):
            out.data[c] += la.bracket(avg_fwd_many(Aj, K), avg_fwd(u.data[c], j), g)
    return out


def covariant_partial_adjoint(A: FormField, v: FormField, j: int) -> FormField:
    g, h = v.group, v.grid.h
    out = v.like(-diff_bwd(v.data, j, h))
    if not g.abelian:
        Aj = A.data[j]
        for c, K in enumerate(COMPONENTS[v.degree]):
            out.data[c] -= avg_bwd(la.bracket(avg_fwd_many(Aj, K), v.data[c], g), j)
    return out


def covariant_gradient_sq(A: FormField, u: FormField) -> float:
    """sum_j ||D_j^A u||_2^2."""
    total = 0.0
    for j in range(3):
        Dj = covariant_partial(A, u, j)
        total += inner(Dj, Dj)
    return total


def bochner_laplacian(A: FormField, u: FormField) -> FormField:
    _require_degree(A, 1, "connection")
    out = u.zeros_like()
    for j in range(3):
        out.data -= covariant_partial_adjoint(A, covariant_partial(A, u, j), j).data
    return out


def hodge_laplacian(A: FormField, u: FormField) -> FormField:
    """L_A u = -(d_A^* d_A + d_A d_A^*) u for a 1-form u."""
    _require_degree(u, 1, "argument of the Hodge Laplacian")
    return -(cov_d_star(A, cov_d(A, u)) + cov_d(A, cov_d_star(A, u)))


def weitzenboeck_residual(A: FormField, u: FormField, B: FormField = None) -> FormField:
    """(d_A^* d_A + d_A d_A^*) u - (-Delta_A u + [u _| B]); zero in the continuum."""
    if B is None:
        B = curvature(A)
    return -hodge_laplacian(A, u) + bochner_laplacian(A, u) - interior_comm(u, B)


def bianchi_residual(A: FormField, B: FormField = None) -> FormField:
    if B is None:
        B = curvature(A)
    return cov_d(A, B)
