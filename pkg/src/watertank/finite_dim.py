"""Exact finite-dimensional backstepping oracle.

For controllable pairs (A, B) and (A~, B) there is a unique (T, K) with
``T A + B K = A~ T`` and ``T B = B``; it is constructed through the control
canonical form and doubles as a fast test anchor for the modal pipeline.
Matrices are capped at n <= 12 (companion conditioning degrades beyond
that; this is a test anchor, not a production pole placer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from watertank.errors import ConfigError, NumericalError

__all__ = ["LinearPair", "ctrb", "to_canonical", "backstep_pair", "backstep_lstsq"]

_MAX_N = 12


@dataclass
class LinearPair:
    """A state matrix with a single input column."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float).reshape(-1)
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape != (n,):
            raise ConfigError("A must be n x n and B length n")
        if n > _MAX_N:
            raise ConfigError(f"n capped at {_MAX_N} for the companion construction")

    @property
    def n(self) -> int:
        return self.A.shape[0]


def ctrb(pair: LinearPair) -> np.ndarray:
    """Controllability matrix [B, AB, ..., A^(n-1) B]."""
    cols = [pair.B]
    for _ in range(pair.n - 1):
        cols.append(pair.A @ cols[-1])
    return np.stack(cols, axis=1)


def to_canonical(pair: LinearPair):
    """Change of basis to control canonical (companion) form.

    Returns ``(Tc, canonical_pair)`` with ``Tc A Tc^-1`` in companion form
    (ones on the superdiagonal, characteristic coefficients in the last
    row) and ``Tc B = e_n``. Raises on rank deficiency.
    """
    n = pair.n
    C = ctrb(pair)
    if np.linalg.matrix_rank(C) < n:
        raise NumericalError("pair is not controllable (rank-deficient ctrb matrix)")
    q = np.linalg.solve(C.T, np.eye(n)[:, -1])  # last row of C^-1
    rows = [q]
    for _ in range(n - 1):
        rows.append(rows[-1] @ pair.A)
    Tc = np.stack(rows, axis=0)
    Ac = Tc @ pair.A @ np.linalg.inv(Tc)
    Bc = Tc @ pair.B
    return Tc, LinearPair(Ac, Bc)


def _companion(A: np.ndarray) -> np.ndarray:
    """Companion matrix of the characteristic polynomial of A."""
    n = A.shape[0]
    coeffs = np.poly(A)  # [1, c_{n-1}, ..., c_0]
    M = np.zeros((n, n))
    M[np.arange(n - 1), np.arange(1, n)] = 1.0
    M[-1, :] = -coeffs[:0:-1]
    return M


def backstep_pair(pairA: LinearPair, pairAtilde: LinearPair):
    """Unique (T, K) with ``T A + B K = A~ T`` and ``T B = B``.

    Built via the canonical forms of both pairs: in A's canonical frame the
    gain is read off from the companion matrix of A~, and
    ``T = T_(A~)^-1 T_A`` satisfies both equations. Residuals are checked to
    1e-10 in max norm.
    """
    if pairA.n != pairAtilde.n:
        raise ConfigError("pairs must share the dimension")
    if not np.allclose(pairA.B, pairAtilde.B, atol=0.0, rtol=0.0):
        raise ConfigError("pairs must share B")
    TA, canA = to_canonical(pairA)
    TT, _ = to_canonical(pairAtilde)
    cAt = _companion(pairAtilde.A)
    # in canonical coordinates: Abar + e_n Kbar = companion(A~)
    Kbar = (cAt - canA.A)[-1, :]
    K = Kbar @ TA
    T = np.linalg.solve(TT, TA)
    scale = max(
        1.0,
        float(np.max(np.abs(pairA.A))),
        float(np.max(np.abs(pairAtilde.A))),
    )
    r1 = np.max(np.abs(T @ pairA.A + np.outer(pairA.B, K) - pairAtilde.A @ T))
    r2 = np.max(np.abs(T @ pairA.B - pairA.B))
    cond = float(np.linalg.cond(T))
    if r1 / scale > 1e-10 or r2 > 1e-10:
        raise NumericalError(
            f"backstepping residuals too large: {r1:.2e}, {r2:.2e} (cond T = {cond:.2e})"
        )
    return T, K


def backstep_lstsq(pairA: LinearPair, pairAtilde: LinearPair):
    """Independent least-squares solve of the (T, K) linear system.

    Vectorizes ``T A + B K - A~ T = 0`` and ``T B = B`` into one linear
    system in the n^2 + n unknowns; used to confirm uniqueness against the
    companion construction.
    """
    n = pairA.n
    A, B, At = pairA.A, pairA.B, pairAtilde.A
    nT = n * n
    rows = []
    rhs = []
    # (T A)_{ij} + B_i K_j - (A~ T)_{ij} = 0
    for i in range(n):
        for j in range(n):
            row = np.zeros(nT + n)
            for k in range(n):
                row[i * n + k] += A[k, j]
                row[k * n + j] -= At[i, k]
            row[nT + j] += B[i]
            rows.append(row)
            rhs.append(0.0)
    # (T B)_i = B_i
    for i in range(n):
        row = np.zeros(nT + n)
        row[i * n : (i + 1) * n] = B
        rows.append(row)
        rhs.append(B[i])
    M = np.asarray(rows)
    sol, *_ = np.linalg.lstsq(M, np.asarray(rhs), rcond=None)
    T = sol[:nT].reshape(n, n)
    K = sol[nT:]
    return T, K
