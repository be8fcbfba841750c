"""Input validation helpers shared by the data types, runners and estimators."""

import numpy as np

from .exceptions import InvalidInputError

UNIT_NORM_TOL = 1e-10


def check_codes(codes, N=None, K=None):
    """Return ``codes`` as a float N x K array with finite, unit-norm columns."""
    codes = np.asarray(codes, dtype=float)
    if codes.ndim != 2 or codes.shape[0] < 1 or codes.shape[1] < 1:
        raise InvalidInputError(f"codes must be a non-empty N x K matrix, got shape {codes.shape}")
    if (N is not None and codes.shape[0] != N) or (K is not None and codes.shape[1] != K):
        raise InvalidInputError(f"codes must have shape {(N, K)}, got {codes.shape}")
    if not np.all(np.isfinite(codes)):
        raise InvalidInputError("codes have non-finite entries")
    norms = np.linalg.norm(codes, axis=0)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise InvalidInputError("every code must have unit norm")
    return codes


def check_powers(powers, K=None, P_max=None):
    """Return ``powers`` as a length-K float vector in ``[0, P_max]``."""
    powers = np.asarray(powers, dtype=float)
    if powers.ndim != 1 or (K is not None and powers.shape[0] != K):
        raise InvalidInputError(f"powers must be a vector of length {K}, got shape {powers.shape}")
    if not np.all(np.isfinite(powers)) or np.any(powers < 0):
        raise InvalidInputError("powers must be finite and non-negative")
    if P_max is not None and np.any(powers > P_max):
        raise InvalidInputError(f"powers must not exceed P_max={P_max}")
    return powers


def check_user_index(k, K):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 0 <= k < K:
        raise InvalidInputError(f"user index must be an integer in [0, {K}), got {k!r}")
    return int(k)


def check_scenario(sc):
    from .model import Scenario

    if not isinstance(sc, Scenario):
        raise InvalidInputError(f"expected a Scenario, got {type(sc).__name__}")
    return sc


def check_state(st, sc, P_max=None):
    """Check that a GameState fits a Scenario (dimensions, power cap)."""
    from .model import GameState

    if not isinstance(st, GameState):
        raise InvalidInputError(f"expected a GameState, got {type(st).__name__}")
    check_codes(st.codes, sc.N, sc.K)
    check_powers(st.powers, sc.K, P_max)
    return st
