"""Utilities, potentials, and single-player best responses.

Every function takes a user index ``k`` (0-based), a :class:`Scenario` and
a :class:`GameState`, and is a pure function of them. Notation in comments:
``W[j, k] = p_j h_{j,a(k)}^2`` is the power of user ``j`` received at the
receiver of user ``k``, and ``C_l`` the received covariance at receiver ``l``.
"""

import enum
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np

from . import _kernels
from .exceptions import DegeneratePowerError, InvalidStateError, ValidationError
from .numerics import bisect_root, solve_spd
from .validation import check_user_index

POWER_FLOOR = 1e-30


class PotentialKind(str, enum.Enum):
    NEG_SUM_INVERSE_SINR = "NegSumInverseSinr"
    NEG_SUM_RHO = "NegSumRho"
    TOTAL_MSE = "TotalMse"


@dataclass(frozen=True)
class EfficiencyParams:
    """Parameters of the bit/Joule utility ``R (L/M) f(gamma) / p``.

    ``f(gamma) = (1 - exp(-gamma))**M``. ``R`` and ``L/M`` only scale the
    utility; ``M`` sets the SINR target and ``P_max`` caps every power.
    """

    R: float = 1e5
    L: int = 100
    M: int = 100
    P_max: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.R) and self.R > 0):
            raise ValidationError(f"must be positive, got {self.R!r}", "efficiency.R")
        if not (np.isfinite(self.P_max) and self.P_max > 0):
            raise ValidationError(f"must be positive, got {self.P_max!r}", "efficiency.P_max")
        if not self.M >= 2:
            raise ValidationError(f"must be >= 2, got {self.M!r}", "efficiency.M")
        if not 0 < self.L <= self.M:
            raise ValidationError(f"must satisfy 0 < L <= M, got {self.L!r}", "efficiency.L")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown field {unknown[0]!r}", "efficiency")
        return cls(**d)


# ---------------------------------------------------------------------------
# covariances and SINR/MSE


def _arrays(sc, st):
    return st.codes, st.powers, sc.gains_sq, sc.assignment, float(sc.noise_variance)


def _args(k, sc, st):
    # kernel arguments for a single-player computation; kernels do not bounds-check
    return (*_arrays(sc, st), check_user_index(k, sc.K))


def received_powers(sc, st):
    """``W[j, k] = p_j h_{j,a(k)}^2`` as a K x K array."""
    return st.powers[:, None] * sc.gains_sq[:, sc.assignment]


def covariance(ell, sc, st, exclude=None):
    """``sigma^2 I + sum_j p_j h_{j,ell}^2 s_j s_j^T``, optionally without user ``exclude``."""
    w = st.powers * sc.gains_sq[:, ell]
    if exclude is not None:
        w = w.copy()
        w[exclude] = 0.0
    c = (st.codes * w) @ st.codes.T
    c[np.diag_indices_from(c)] += sc.noise_variance
    return c


def interference_covariance(k, sc, st):
    """Interference-plus-noise covariance seen by user ``k`` at its receiver."""
    return covariance(sc.assignment[k], sc, st, exclude=k)


def _receiver(k, st, receiver):
    d = st.receivers[:, k] if receiver is None else np.asarray(receiver, dtype=float)
    if not np.any(d):
        raise InvalidStateError(f"user {k} has an all-zero receiver")
    return d


def sinr(k, sc, st, receiver=None):
    """Output SINR of user ``k`` with its stored (or the given) linear receiver."""
    d = _receiver(k, st, receiver)
    s = st.codes[:, k]
    num = st.powers[k] * sc.own_gain_sq[k] * (d @ s) ** 2
    return float(num / (d @ interference_covariance(k, sc, st) @ d))


def all_sinrs(sc, st):
    """Vector of :func:`sinr` over every user, using the stored receivers."""
    W = received_powers(sc, st)
    X = st.codes.T @ st.receivers  # X[j, k] = s_j . d_k
    own = np.diag(X)
    d_norm2 = np.sum(st.receivers**2, axis=0)
    if np.any(d_norm2 == 0):
        raise InvalidStateError("a stored receiver is all-zero")
    den = sc.noise_variance * d_norm2 + np.sum(W * X**2, axis=0) - np.diag(W) * own**2
    return st.powers * sc.own_gain_sq * own**2 / den


def matched_filter_sinrs(sc, st):
    """SINR of every user if each receiver were its own code (``d_k = s_k``)."""
    return st.powers * sc.own_gain_sq / _mf_forms(sc, st)


def _mf_forms(sc, st):
    # s_k^T C_{-k} s_k for every k
    W = received_powers(sc, st)
    G = st.codes.T @ st.codes
    np.fill_diagonal(W, 0.0)
    return sc.noise_variance * np.diag(G) + np.sum(W * G**2, axis=0)


def lmmse_receiver(k, sc, st):
    """LMMSE detector ``sqrt(p_k) h_{k,a(k)} C_{a(k)}^{-1} s_k`` (unnormalised)."""
    return _kernels.lmmse_receiver(*_args(k, sc, st))


def lmmse_receivers(sc, st):
    """N x K matrix of LMMSE detectors for all users, one solve per receiver."""
    return _kernels.lmmse_receivers(*_arrays(sc, st))


def lmmse_sinr(k, sc, st):
    """SINR of user ``k`` under LMMSE detection, ``p h^2 s^T C_{-k}^{-1} s``."""
    s = st.codes[:, k]
    return float(st.powers[k] * sc.own_gain_sq[k] * (s @ solve_spd(interference_covariance(k, sc, st), s)))


def mse(k, sc, st, receiver=None):
    """Mean square error ``E[(b_k - d_k^T r_{a(k)})^2]`` with the stored receiver."""
    d = st.receivers[:, k] if receiver is None else np.asarray(receiver, dtype=float)
    ell = sc.assignment[k]
    cross = np.sqrt(st.powers[k]) * sc.gains[k, ell] * (d @ st.codes[:, k])
    return float(1.0 - 2.0 * cross + d @ covariance(ell, sc, st) @ d)


def all_mse(sc, st):
    """Vector of :func:`mse` over every user."""
    W = received_powers(sc, st)
    X = st.codes.T @ st.receivers
    amp = np.sqrt(st.powers * sc.own_gain_sq)
    return (1.0 - 2.0 * amp * np.diag(X) + sc.noise_variance * np.sum(st.receivers**2, axis=0)
            + np.sum(W * X**2, axis=0))


# ---------------------------------------------------------------------------
# code-allocation games


def greedy_ia_best_response(k, sc, st):
    """SINR-maximising code under LMMSE detection: least-interfered direction."""
    return _kernels.greedy_ia_response(*_args(k, sc, st))


def mmse_pair_update(k, sc, st):
    """One step of the individual-MSE iteration: LMMSE receiver, then its direction as code."""
    if st.powers[k] <= 0:
        raise DegeneratePowerError(f"user {k} has zero power")
    return _kernels.mmse_pair_response(*_args(k, sc, st))


def downlink_covariance(b, dsc, codes):
    c = dsc.p * dsc.gains[b] ** 2 * (codes @ codes.T)
    c[np.diag_indices_from(c)] += dsc.noise_variance
    return c


def downlink_mmse_update(b, dsc, codes):
    """Downlink version of :func:`mmse_pair_update` for receiver ``b``."""
    d = np.sqrt(dsc.p) * dsc.gains[b] * solve_spd(downlink_covariance(b, dsc, codes), codes[:, b])
    return d, d / np.linalg.norm(d)


def downlink_sinr(b, dsc, codes, receiver):
    d = np.asarray(receiver, dtype=float)
    s = codes[:, b]
    c = downlink_covariance(b, dsc, codes) - dsc.p * dsc.gains[b] ** 2 * np.outer(s, s)
    return float(dsc.p * dsc.gains[b] ** 2 * (d @ s) ** 2 / (d @ c @ d))


def _require_positive_powers(st):
    if np.any(st.powers <= 0):
        raise DegeneratePowerError("the inverse-SINR game needs every power > 0")


def menon_matrix(k, sc, st):
    """Quadratic form whose negative is the inverse-SINR game utility of user ``k``."""
    _require_positive_powers(st)
    return _kernels.menon_matrix(*_args(k, sc, st))


def menon_best_response(k, sc, st):
    _require_positive_powers(st)
    return _kernels.menon_response(*_args(k, sc, st))


def menon_utility(k, sc, st):
    s = st.codes[:, k]
    return float(-(s @ menon_matrix(k, sc, st) @ s))


def sinr_potential_matrix(k, sc, st):
    """Quadratic form whose negative is the SINR-potential game utility of user ``k``."""
    return _kernels.sinr_potential_matrix(*_args(k, sc, st))


def sinr_potential_best_response(k, sc, st):
    return _kernels.sinr_potential_response(*_args(k, sc, st))


def sinr_potential_utility(k, sc, st):
    s = st.codes[:, k]
    return float(-(s @ sinr_potential_matrix(k, sc, st) @ s))


# ---------------------------------------------------------------------------
# potentials


def potential(kind, sc, st):
    """Potential function value.

    ``NegSumInverseSinr`` is ``-sum 1/gamma_k`` under matched filtering,
    ``NegSumRho`` is ``-sum p_m h^2 s_m^T C_{-m} s_m`` (receiver-free), and
    ``TotalMse`` is the sum of MSEs with the stored receivers.
    """
    kind = PotentialKind(kind)
    if kind is PotentialKind.NEG_SUM_INVERSE_SINR:
        signal = st.powers * sc.own_gain_sq
        if np.any(signal <= 0):
            raise ZeroDivisionError("inverse-SINR potential is undefined with a zero SINR")
        return float(-np.sum(_mf_forms(sc, st) / signal))
    if kind is PotentialKind.NEG_SUM_RHO:
        return float(-np.sum(st.powers * sc.own_gain_sq * _mf_forms(sc, st)))
    return float(np.sum(all_mse(sc, st)))


# ---------------------------------------------------------------------------
# total-MSE game


def tmse_receiver_best_response(k, sc, st):
    return lmmse_receiver(k, sc, st)


def high_sinr_cross_term(k, sc, st):
    """MSE that user ``k`` inflicts on the other users: ``p_k sum_{l!=k} h_{k,a(l)}^2 (d_l^T s_k)^2``."""
    proj = st.receivers.T @ st.codes[:, k]
    w = sc.gains_sq[k, sc.assignment].copy()
    w[k] = 0.0
    return float(st.powers[k] * np.sum(w * proj**2))


def tmse_cost(k, sc, st):
    """Player cost in the total-MSE game: own MSE plus :func:`high_sinr_cross_term`."""
    return mse(k, sc, st) + high_sinr_cross_term(k, sc, st)


def tmse_utility(k, sc, st):
    return -tmse_cost(k, sc, st)


def tmse_code_best_response(k, sc, st):
    """Unit code minimising the total-MSE player cost for fixed receivers.

    Solves ``min s^T D s - 2 b^T s`` on the unit sphere with
    ``D = sum_l p_k h_{k,a(l)}^2 d_l d_l^T`` and
    ``b = sqrt(p_k) h_{k,a(k)} d_k``. The minimiser is
    ``(lam I + D)^{-1} b`` where ``lam > -lambda_min(D)`` makes it unit
    norm; the norm is strictly decreasing in ``lam`` so a bracketed search
    finds it. If ``b`` has no component along the smallest eigenvector of
    ``D`` and the norm stays below one on the whole interval, the
    minimiser is completed with that eigenvector.
    """
    k = check_user_index(k, sc.K)
    if st.powers[k] <= 0:
        raise DegeneratePowerError(f"user {k} has zero power")
    if not np.any(st.receivers[:, k]):
        raise InvalidStateError(f"user {k} has an all-zero receiver")
    return _kernels.tmse_code_response(st.codes, st.receivers, st.powers, sc.gains_sq,
                                       sc.assignment, k)


# ---------------------------------------------------------------------------
# energy efficiency and power control


def efficiency_function(gamma, M):
    """Packet success rate approximation ``(1 - exp(-gamma))**M``."""
    return (-np.expm1(-np.asarray(gamma, dtype=float))) ** M


@lru_cache(maxsize=None)
def gamma_bar(M):
    """Unique positive root of ``M x exp(-x) = 1 - exp(-x)``.

    This is the SINR at which ``f(x)/x`` is maximal for
    ``f(x) = (1 - exp(-x))**M``.

    Raises
    ------
    ValidationError
        If ``M < 2`` (for ``M = 1`` the only root is ``x = 0``).
    """
    if not M >= 2:
        raise ValidationError(f"needs M >= 2 for a positive root, got {M!r}", "efficiency.M")

    def g(x):
        return M * x * np.exp(-x) + np.expm1(-x)

    return bisect_root(g, 1e-6, 50.0, tol=1e-15)


def power_best_response(k, sc, st, ep, receiver="lmmse"):
    """Energy-efficient power: the power reaching ``gamma_bar``, capped at ``P_max``.

    ``receiver`` is ``"lmmse"`` or ``"mf"`` (matched filter); both SINRs are
    linear in ``p_k`` so the target power is ``gamma_bar / (SINR per watt)``.
    """
    if receiver == "lmmse":
        per_watt = _kernels.lmmse_sinr_per_watt(*_args(k, sc, st))
    elif receiver == "mf":
        per_watt = _kernels.mf_sinr_per_watt(*_args(k, sc, st))
    else:
        raise ValueError(f"unknown receiver {receiver!r}")
    target = gamma_bar(ep.M) / per_watt
    return float(max(min(ep.P_max, target), POWER_FLOOR))


def energy_efficiency(k, sc, st, ep):
    """Bit/Joule utility of user ``k`` with its stored receiver."""
    if st.powers[k] <= 0:
        raise DegeneratePowerError(f"utility undefined for user {k} at zero power")
    return float(ep.R * ep.L / ep.M * efficiency_function(sinr(k, sc, st), ep.M) / st.powers[k])


def all_energy_efficiencies(sc, st, ep):
    if np.any(st.powers <= 0):
        raise DegeneratePowerError("utility undefined at zero power")
    return ep.R * ep.L / ep.M * efficiency_function(all_sinrs(sc, st), ep.M) / st.powers
