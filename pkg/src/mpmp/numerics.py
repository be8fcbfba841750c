"""Dense real symmetric linear algebra and bracketed root finding.

Every best response in the package reduces to one of three primitives:
the smallest eigenpair of a symmetric matrix, a positive definite solve,
or a scalar root of a monotone function.
"""

import numpy as np
from scipy.linalg import LinAlgError
from scipy.optimize import brentq

from .exceptions import BracketError, InvalidInputError, SingularMatrixError

SYMMETRY_RTOL = 1e-12
SIGN_THRESHOLD = 1e-9
SPD_RCOND = 1e-14
# Eigenvalues within this relative distance of the minimum count as degenerate.
DEGENERACY_RTOL = 1e-10


def _as_symmetric(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    scale = np.max(np.abs(m))
    if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise InvalidInputError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def canonical_sign(v):
    """Flip ``v`` so that its first component with magnitude above 1e-9 is positive."""
    idx = np.flatnonzero(np.abs(v) > SIGN_THRESHOLD)
    if idx.size and v[idx[0]] < 0:
        return -v
    return v


def min_eigvec(m):
    """Smallest eigenvalue of a symmetric matrix and a unit eigenvector for it.

    The eigenvector is made unique up to the degenerate case by the sign
    convention of :func:`canonical_sign`; for a fixed input the output is
    bit-for-bit deterministic.

    Parameters
    ----------
    m : (n, n) array_like
        Real symmetric matrix with finite entries.

    Returns
    -------
    eigenvalue : float
    v : (n,) ndarray
        Unit-norm eigenvector.
    """
    w, u = np.linalg.eigh(_as_symmetric(m))
    v = canonical_sign(u[:, 0])
    return float(w[0]), v / np.linalg.norm(v)


def min_eig_response(m, current=None):
    """Unit minimiser of ``x @ m @ x`` that stays as close as possible to ``current``.

    When the smallest eigenvalue is degenerate, the whole eigenspace is
    optimal; the projection of ``current`` onto it is returned so that a
    player already playing a best response does not move. Without a usable
    projection this falls back to :func:`min_eigvec`.
    """
    m = _as_symmetric(m)
    w, u = np.linalg.eigh(m)
    if current is not None:
        scale = max(abs(w[0]), abs(w[-1]), np.finfo(float).tiny)
        cluster = u[:, w <= w[0] + DEGENERACY_RTOL * scale]
        if cluster.shape[1] > 1:
            proj = cluster @ (cluster.T @ current)
            norm = np.linalg.norm(proj)
            if norm > 1e-8:
                return proj / norm
        elif current @ u[:, 0] < 0:
            return -u[:, 0]
        else:
            return u[:, 0].copy()
    v = canonical_sign(u[:, 0])
    return v / np.linalg.norm(v)


def solve_spd(m, b):
    """Solve ``m @ x = b`` for a symmetric positive definite ``m``.

    Raises
    ------
    SingularMatrixError
        If ``m`` is not numerically positive definite, i.e. its Cholesky
        factorisation fails or the squared ratio of extreme Cholesky pivots
        falls below 1e-14.
    """
    m = _as_symmetric(m)
    b = np.asarray(b, dtype=float)
    try:
        chol = np.linalg.cholesky(m)
    except (LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularMatrixError("matrix is not positive definite") from exc
    diag = np.abs(np.diag(chol))
    if (diag.min() / diag.max()) ** 2 < SPD_RCOND:
        raise SingularMatrixError("matrix is numerically singular")
    y = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, y)


def bisect_root(f, lo, hi, tol=1e-12):
    """Root of a continuous monotone scalar function on ``[lo, hi]``.

    Bracketed Brent iteration (bisection-safeguarded). The returned ``x``
    satisfies ``|f(x)| <= tol`` or lies in a final bracket narrower than
    ``tol * max(1, |x|)``.

    Raises
    ------
    BracketError
        If ``f(lo)`` and ``f(hi)`` have the same strict sign.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return float(lo)
    if fhi == 0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"f({lo})={flo} and f({hi})={fhi} have the same sign")
    rtol = max(tol / 4, 4 * np.finfo(float).eps)
    return float(brentq(f, lo, hi, xtol=tol / 4, rtol=rtol, maxiter=500))
