"""Finite-dimensional angular-momentum algebra for half-integer spins.

Conventions used throughout the package:

* basis states are ordered by magnetic quantum number m = -j .. +j,
* rotations are active, U = exp(-i * angle * J_axis),
* a "pi pulse" means rotation area pi.

Everything here is a pure function of its arguments; matrices are
freshly allocated (or cached immutable) numpy arrays.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def _two_j(j) -> int:
    """Validate j and return 2j as an int."""
    two_j = 2 * j
    if abs(two_j - round(two_j)) > 1e-9 or round(two_j) < 0:
        raise ValueError(f"j must be a non-negative half-integer, got {j!r}")
    return int(round(two_j))


def m_values(j) -> np.ndarray:
    """Magnetic quantum numbers m = -j .. +j in ascending order."""
    two_j = _two_j(j)
    return np.arange(-two_j, two_j + 1, 2) / 2.0


def spin_operators(j) -> dict[str, np.ndarray]:
    """Matrix representations of Jx, Jy, Jz, J+ and J- for spin j.

    Entries follow the standard ladder convention
    <m+1|J+|m> = sqrt(j(j+1) - m(m+1)) in the ascending-m basis.
    """
    two_j = _two_j(j)
    dim = two_j + 1
    m = m_values(j)
    jz = np.diag(m).astype(complex)
    jplus = np.zeros((dim, dim), dtype=complex)
    for k in range(dim - 1):
        mk = m[k]
        jplus[k + 1, k] = math.sqrt(j * (j + 1) - mk * (mk + 1))
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2.0
    jy = (jplus - jminus) / 2.0j
    return {"Jx": jx, "Jy": jy, "Jz": jz, "Jplus": jplus, "Jminus": jminus}


def unitary_from_generator(generator: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i * angle * G) for Hermitian G, via eigendecomposition."""
    w, v = np.linalg.eigh(generator)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def wigner_d_element(j, m_to, m_from, theta: float) -> float:
    """Closed-form d^j_{m',m}(theta) = <j m'|exp(-i theta Jy)|j m>.

    Factorials are exact integers; the sum is the standard one over the
    single free summation index.
    """
    _two_j(j)
    jpm = int(round(j + m_from))
    jmm = int(round(j - m_from))
    jpmp = int(round(j + m_to))
    jmmp = int(round(j - m_to))
    if min(jpm, jmm, jpmp, jmmp) < 0:
        raise ValueError(f"invalid magnetic quantum numbers for j={j}")
    dm = int(round(m_to - m_from))
    pref = math.sqrt(
        math.factorial(jpm) * math.factorial(jmm)
        * math.factorial(jpmp) * math.factorial(jmmp)
    )
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    total = 0.0
    for k in range(max(0, -dm), min(jpm, jmmp) + 1):
        denom = (
            math.factorial(jpm - k) * math.factorial(k)
            * math.factorial(dm + k) * math.factorial(jmmp - k)
        )
        total += (-1) ** (dm + k) / denom * c ** (jpm + jmmp - 2 * k) * s ** (dm + 2 * k)
    return pref * total


def wigner_d_matrix(j, theta: float) -> np.ndarray:
    """Full rotation matrix d^j(theta) about y, ascending-m basis."""
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    m = m_values(j)
    dim = len(m)
    d = np.empty((dim, dim))
    for a in range(dim):
        for b in range(dim):
            d[a, b] = wigner_d_element(j, m[a], m[b], theta)
    return d


@lru_cache(maxsize=1024)
def _rotation_unitary_cached(two_j: int, area: float, axis_phase: float):
    ops = spin_operators(two_j / 2.0)
    generator = math.cos(axis_phase) * ops["Jx"] + math.sin(axis_phase) * ops["Jy"]
    u = unitary_from_generator(generator, area)
    u.setflags(write=False)
    return u


def rotation_unitary(j, area: float, axis_phase: float = 0.0) -> np.ndarray:
    """U = exp(-i * area * (Jx cos(phi) + Jy sin(phi))).

    Returns a read-only cached array; callers must not mutate it.
    """
    two_j = _two_j(j)
    return _rotation_unitary_cached(two_j, float(area), float(axis_phase))
