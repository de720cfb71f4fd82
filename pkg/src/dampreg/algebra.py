"""Quaternion arithmetic and the coordinate matrices used by the regularizing maps.

Quaternions are scalar-first, ``(u0, u1, u2, u3) = u0 + i u1 + j u2 + k u3``
with ``i*j = k``, ``j*k = i``, ``k*i = j``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np


class Quaternion(NamedTuple):
    u0: float
    u1: float
    u2: float
    u3: float

    @property
    def norm2(self) -> float:
        return self.u0 * self.u0 + self.u1 * self.u1 + self.u2 * self.u2 + self.u3 * self.u3

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def quat_mul(a, b) -> Quaternion:
    """Hamilton product ``a * b``."""
    a0, a1, a2, a3 = (float(x) for x in a)
    b0, b1, b2, b3 = (float(x) for x in b)
    return Quaternion(
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


def quat_conj(q) -> Quaternion:
    q0, q1, q2, q3 = (float(x) for x in q)
    return Quaternion(q0, -q1, -q2, -q3)


def quat_star(q) -> Quaternion:
    """The star operation: flips the sign of the ``k`` component only."""
    q0, q1, q2, q3 = (float(x) for x in q)
    return Quaternion(q0, q1, q2, -q3)


def quat_norm(q) -> float:
    return float(np.sqrt(Quaternion(*(float(x) for x in q)).norm2))


# Signed permutations. Column j of the K-S matrix is _PERM_4D[j] @ U and the
# two columns of the L-C matrix are _PERM_2D[1] @ U, _PERM_2D[2] @ U.
_PERM_2D = {
    1: ((1, 0), (0, 1)),
    2: ((0, -1), (1, 0)),
}
_PERM_4D = {
    0: ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)),
    1: ((0, -1, 0, 0), (1, 0, 0, 0), (0, 0, 0, 1), (0, 0, -1, 0)),
    2: ((0, 0, -1, 0), (0, 0, 0, -1), (1, 0, 0, 0), (0, 1, 0, 0)),
    3: ((0, 0, 0, 1), (0, 0, -1, 0), (0, 1, 0, 0), (-1, 0, 0, 0)),
}
_FAMILIES = {"2D": _PERM_2D, "4D": _PERM_4D}


@lru_cache(maxsize=None)
def _perm(family: str, index: int) -> np.ndarray:
    try:
        table = _FAMILIES[family.upper()]
    except KeyError:
        raise ValueError(f"unknown permutation family {family!r}; expected '2D' or '4D'") from None
    if index not in table:
        raise ValueError(
            f"permutation index {index} out of range for family {family}; valid: {sorted(table)}"
        )
    m = np.array(table[index], dtype=float)
    m.flags.writeable = False
    return m


def permutation_matrix(family: str, index: int) -> np.ndarray:
    """Signed permutation matrix ``P^(index)`` of the 2-D or 4-D family."""
    return _perm(family, index).copy()


def permutation_apply(family: str, index: int, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    p = _perm(family, index)
    if u.shape != (p.shape[0],):
        raise ValueError(f"family {family} acts on {p.shape[0]}-vectors, got shape {u.shape}")
    return p @ u


def permutation_indices(family: str) -> tuple[int, ...]:
    return tuple(sorted(_FAMILIES[family.upper()]))


def lc_matrix(u) -> np.ndarray:
    """Levi-Civita matrix ``[[U1, -U2], [U2, U1]]`` (multiplication by U as a complex number)."""
    u1, u2 = (float(x) for x in u)
    return np.array([[u1, -u2], [u2, u1]])


def ks_matrix(u) -> np.ndarray:
    """4x4 Kustaanheimo-Stiefel matrix A(U); satisfies ``A^T A = |U|^2 I``."""
    u0, u1, u2, u3 = (float(x) for x in u)
    return np.array(
        [
            [u0, -u1, -u2, u3],
            [u1, u0, -u3, -u2],
            [u2, u3, u0, u1],
            [u3, -u2, u1, -u0],
        ]
    )


def uhat_n(u, n: int) -> np.ndarray:
    """Generalized L-C matrix built by the recursion

    ``U^(N) = Uhat_{N-1} U``, ``Uhat_N = (P^(1) U^(N), P^(2) U^(N))``, ``Uhat_0 = I``.

    ``Uhat_N U`` is the complex power ``U^(N+1)``.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"N must be a non-negative integer, got {n!r}")
    u = np.asarray(u, dtype=float)
    if u.shape != (2,):
        raise ValueError(f"uhat_n acts on 2-vectors, got shape {u.shape}")
    mat = np.eye(2)
    p1, p2 = _perm("2D", 1), _perm("2D", 2)
    for _ in range(int(n)):
        un = mat @ u
        mat = np.column_stack((p1 @ un, p2 @ un))
    return mat
