"""Estimator-style wrappers around the dynamics runners.

The "data" an allocator is fitted on is a :class:`~mpmp.model.Scenario`;
fitting runs the configured game to its equilibrium and stores the result
in trailing-underscore attributes. Hyperparameters are plain constructor
arguments, so ``get_params``/``set_params``/``clone`` from scikit-learn
work as usual.

>>> from mpmp import ScenarioConfig, generate_scenario
>>> sc = generate_scenario(ScenarioConfig(kind="PeerToPeer", K=4, B=4, seed=1))
>>> alloc = CodeAllocator(game="SinrPotential").fit(sc)
>>> alloc.codes_.shape
(8, 4)
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .dynamics import CODE_GAMES, JOINT_GAMES, POWER_GAMES, DynamicsConfig, Game, run_game
from .exceptions import InvalidInputError
from .games import EfficiencyParams, all_energy_efficiencies, all_sinrs
from .model import GameState, initial_codes, random_codes
from .validation import check_codes, check_scenario


def _start_codes(sc, init_codes, random_state):
    if init_codes is not None:
        return check_codes(init_codes, sc.N, sc.K)
    if random_state is None:
        return initial_codes(sc.config)
    return random_codes(sc.N, sc.K, random_state)


class _AllocatorBase(BaseEstimator):
    _allowed = ()

    def _dynamics(self):
        game = Game(self.game)
        if game not in self._allowed:
            names = ", ".join(g.value for g in self._allowed)
            raise InvalidInputError(f"game must be one of {names}, got {game.value!r}")
        return game

    def _store(self, sc, record):
        st = record.final_state
        self.record_ = record
        self.state_ = st
        self.codes_ = st.codes
        self.receivers_ = st.receivers
        self.powers_ = st.powers
        self.sinr_ = all_sinrs(sc, st)
        self.converged_ = record.converged
        self.n_rounds_ = record.rounds_used
        self.n_users_ = sc.K
        return self

    def _check_fitted(self):
        if not hasattr(self, "record_"):
            raise NotFittedError(f"this {type(self).__name__} instance is not fitted yet")


class CodeAllocator(_AllocatorBase):
    """Spreading-code allocation at fixed, equal transmit power.

    Parameters
    ----------
    game : str
        GreedyIA, GreedyMMSE, Menon, SinrPotential or TmseMin.
    power : float
        Common transmit power in watts.
    max_rounds : int
    code_tol : float
        Relative potential improvement (potential games) or code change
        (greedy games) below which a round counts as converged.
    random_state : int, numpy Generator or None
        Source of the starting codes; ``None`` uses the scenario's own
        code substream.

    Attributes
    ----------
    codes_, receivers_ : ndarray of shape (N, K)
    sinr_ : ndarray of shape (K,)
    converged_ : bool
    n_rounds_ : int
    record_ : RunRecord
    """

    _allowed = CODE_GAMES

    def __init__(self, game="SinrPotential", power=1.0, max_rounds=5000, code_tol=1e-8,
                 random_state=None):
        self.game = game
        self.power = power
        self.max_rounds = max_rounds
        self.code_tol = code_tol
        self.random_state = random_state

    def fit(self, scenario, init_codes=None):
        sc = check_scenario(scenario)
        game = self._dynamics()
        if not (np.isfinite(self.power) and self.power > 0):
            raise InvalidInputError(f"power must be positive, got {self.power!r}")
        cfg = DynamicsConfig(game=game, max_rounds=self.max_rounds, code_tol=self.code_tol)
        st0 = GameState.initial(_start_codes(sc, init_codes, self.random_state), self.power)
        return self._store(sc, run_game(sc, st0, cfg))

    def score(self, scenario=None):
        """Mean equilibrium SINR (linear) of the fitted allocation."""
        self._check_fitted()
        return float(np.mean(self.sinr_))


class EnergyEfficientAllocator(_AllocatorBase):
    """Joint code/power allocation maximising bit/Joule.

    Parameters
    ----------
    game : str
        Algorithm2 (default), Algorithm1, MenonJoint, PowerOnlyLMMSE or
        PowerOnlyMF.
    R, L, M, P_max : float, int, int, float
        Bit rate, information bits and total bits per packet, power cap.
    power_tol : float
        Outer ``E(n)`` threshold.
    max_outer : int
    random_state : int, numpy Generator or None

    Attributes
    ----------
    powers_ : ndarray of shape (K,)
    energy_efficiency_ : ndarray of shape (K,)
        Per-user bit/Joule at the fitted state.
    codes_, receivers_, sinr_, converged_, n_rounds_, record_
        As in :class:`CodeAllocator`; ``n_rounds_`` counts outer iterations.
    """

    _allowed = JOINT_GAMES + POWER_GAMES

    def __init__(self, game="Algorithm2", R=1e5, L=100, M=100, P_max=1.0, power_tol=1e-3,
                 max_outer=100, random_state=None):
        self.game = game
        self.R = R
        self.L = L
        self.M = M
        self.P_max = P_max
        self.power_tol = power_tol
        self.max_outer = max_outer
        self.random_state = random_state

    def fit(self, scenario, init_codes=None):
        sc = check_scenario(scenario)
        game = self._dynamics()
        ep = EfficiencyParams(R=self.R, L=self.L, M=self.M, P_max=self.P_max)
        cfg = DynamicsConfig(game=game, power_tol=self.power_tol, max_outer=self.max_outer)
        st0 = GameState.initial(_start_codes(sc, init_codes, self.random_state), ep.P_max)
        self._store(sc, run_game(sc, st0, cfg, ep))
        self.energy_efficiency_ = all_energy_efficiencies(sc, self.state_, ep)
        return self

    def score(self, scenario=None):
        """Mean bit/Joule over users of the fitted allocation."""
        self._check_fitted()
        return float(np.mean(self.energy_efficiency_))
