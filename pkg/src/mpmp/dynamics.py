"""Round-robin best-response dynamics and the joint code/power algorithms.

Users update one at a time in index order; a *round* is one pass over all
users. Round counts in a :class:`RunRecord` include the final round that
confirms convergence.
"""

import enum
import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import _kernels, games
from .exceptions import DegeneratePowerError, ValidationError
from .games import EfficiencyParams, PotentialKind
from .model import GameState
from .validation import check_scenario, check_state

RUN_RECORD_SCHEMA = "mpmp.run/1"


class Game(str, enum.Enum):
    GREEDY_IA = "GreedyIA"
    GREEDY_MMSE = "GreedyMMSE"
    MENON = "Menon"
    SINR_POTENTIAL = "SinrPotential"
    TMSE_MIN = "TmseMin"
    POWER_ONLY_MF = "PowerOnlyMF"
    POWER_ONLY_LMMSE = "PowerOnlyLMMSE"
    ALGORITHM1 = "Algorithm1"
    ALGORITHM2 = "Algorithm2"
    MENON_JOINT = "MenonJoint"
    INITIAL = "Initial"


CODE_GAMES = (Game.GREEDY_IA, Game.GREEDY_MMSE, Game.MENON, Game.SINR_POTENTIAL, Game.TMSE_MIN)
POWER_GAMES = (Game.POWER_ONLY_MF, Game.POWER_ONLY_LMMSE)
JOINT_GAMES = (Game.ALGORITHM1, Game.ALGORITHM2, Game.MENON_JOINT)

_JOINT_CODE_STEP = {
    Game.ALGORITHM1: Game.GREEDY_IA,
    Game.ALGORITHM2: Game.TMSE_MIN,
    Game.MENON_JOINT: Game.MENON,
}


@dataclass(frozen=True)
class DynamicsConfig:
    """Stopping rules and caps for every dynamics runner.

    ``code_tol`` is relative: a potential game stops when one round raises
    its potential by less than ``code_tol * |potential|``; games without a
    potential stop when no code moves by more than ``code_tol`` (up to
    sign). Power games stop when ``E(n) < power_tol``; inside the joint
    algorithms the power step uses the tighter ``inner_power_tol`` so that
    the outer ``E(n)`` is not dominated by inner truncation.
    """

    game: Game = Game.SINR_POTENTIAL
    max_rounds: int = 5000
    max_power_rounds: int = 500
    max_outer: int = 100
    code_tol: float = 1e-8
    power_tol: float = 1e-3
    inner_power_tol: float = 1e-6
    schedule: str = "RoundRobin"
    report_receiver: str = "lmmse"

    def __post_init__(self):
        try:
            object.__setattr__(self, "game", Game(self.game))
        except ValueError:
            choices = ", ".join(g.value for g in Game)
            raise ValidationError(f"unknown game {self.game!r} (expected one of {choices})",
                                  "dynamics.game") from None
        for name in ("max_rounds", "max_power_rounds", "max_outer"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValidationError(f"must be an integer >= 1, got {value!r}", f"dynamics.{name}")
        for name in ("code_tol", "power_tol", "inner_power_tol"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0):
                raise ValidationError(f"must be positive, got {value!r}", f"dynamics.{name}")
        if self.schedule != "RoundRobin":
            raise ValidationError("only 'RoundRobin' is supported", "dynamics.schedule")
        if self.report_receiver not in ("lmmse", "mf"):
            raise ValidationError("must be 'lmmse' or 'mf'", "dynamics.report_receiver")

    def to_dict(self):
        d = asdict(self)
        d["game"] = self.game.value
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown field {unknown[0]!r}", "dynamics")
        return cls(**d)


@dataclass
class RoundTrace:
    round: int
    potential: float | None
    sinr: np.ndarray
    power: np.ndarray
    E: float
    inner_rounds: int | None = None

    def to_dict(self):
        return {
            "round": self.round,
            "potential": self.potential,
            "sinr": np.asarray(self.sinr).tolist(),
            "power": np.asarray(self.power).tolist(),
            "E": self.E,
            "inner_rounds": self.inner_rounds,
        }


@dataclass
class RunRecord:
    game: Game
    trace: list = field(default_factory=list)
    converged: bool = False
    rounds_used: int = 0
    final_state: GameState | None = None

    @property
    def potentials(self):
        return np.array([np.nan if t.potential is None else t.potential for t in self.trace])

    @property
    def errors(self):
        return np.array([t.E for t in self.trace])

    def to_dict(self):
        return {
            "schema": RUN_RECORD_SCHEMA,
            "game": self.game.value,
            "converged": self.converged,
            "rounds_used": self.rounds_used,
            "trace": [t.to_dict() for t in self.trace],
            "final_state": self.final_state.to_dict() if self.final_state is not None else None,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def normalized_change(new, old):
    """``E = ||new - old|| / ||new||`` (0 when both are zero)."""
    den = np.linalg.norm(new)
    if den == 0:
        return 0.0 if np.linalg.norm(old) == 0 else np.inf
    return float(np.linalg.norm(new - old) / den)


def code_change(new, old):
    """Largest per-user code move, treating ``s`` and ``-s`` as the same strategy."""
    return float(np.max(np.minimum(np.linalg.norm(new - old, axis=0),
                                   np.linalg.norm(new + old, axis=0))))


def _objective(game, sc, st):
    # Value that the game's best responses never decrease, or None.
    if game is Game.MENON:
        return games.potential(PotentialKind.NEG_SUM_INVERSE_SINR, sc, st)
    if game is Game.SINR_POTENTIAL:
        return games.potential(PotentialKind.NEG_SUM_RHO, sc, st)
    if game is Game.TMSE_MIN:
        return -games.potential(PotentialKind.TOTAL_MSE, sc, st)
    return None


def _refresh_receivers(sc, st, mode):
    st.receivers[:] = games.lmmse_receivers(sc, st) if mode == "lmmse" else st.codes


def _update_player(game, k, sc, st):
    if game is Game.GREEDY_IA:
        st.codes[:, k] = games.greedy_ia_best_response(k, sc, st)
    elif game is Game.GREEDY_MMSE:
        st.receivers[:, k], st.codes[:, k] = games.mmse_pair_update(k, sc, st)
    elif game is Game.MENON:
        st.codes[:, k] = games.menon_best_response(k, sc, st)
    elif game is Game.SINR_POTENTIAL:
        st.codes[:, k] = games.sinr_potential_best_response(k, sc, st)
    elif game is Game.TMSE_MIN:
        st.receivers[:, k] = games.tmse_receiver_best_response(k, sc, st)
        st.codes[:, k] = games.tmse_code_best_response(k, sc, st)
    else:
        raise ValueError(f"{game.value} is not a code-allocation game")


_KERNEL_GAME = {
    Game.GREEDY_IA: _kernels.GREEDY_IA,
    Game.GREEDY_MMSE: _kernels.GREEDY_MMSE,
    Game.MENON: _kernels.MENON,
    Game.SINR_POTENTIAL: _kernels.SINR_POTENTIAL,
    Game.TMSE_MIN: _kernels.TMSE_MIN,
}


def _check_round_preconditions(game, st):
    # the compiled round skips the per-player checks done in `games`
    if game in (Game.GREEDY_MMSE, Game.MENON, Game.TMSE_MIN) and np.any(st.powers <= 0):
        raise DegeneratePowerError(f"{game.value} needs every power > 0")


def run_code_game(game, sc, st0, cfg=None, on_step=None):
    """Best-response dynamics of a code-allocation game at fixed powers.

    Parameters
    ----------
    game : Game or str
        One of GreedyIA, GreedyMMSE, Menon, SinrPotential, TmseMin.
    sc : Scenario
    st0 : GameState
        Starting profile; it is copied, never modified.
    cfg : DynamicsConfig, optional
    on_step : callable, optional
        Called as ``on_step(k, state)`` after every single-player update.
        Receivers in ``state`` are the ones the game itself maintains.

    Returns
    -------
    RunRecord
        One trace entry per round. The final state's receivers are LMMSE
        (or matched filters for Menon with ``report_receiver="mf"``).
    """
    game = Game(game)
    cfg = cfg or DynamicsConfig(game=game)
    if game not in CODE_GAMES:
        raise ValueError(f"{game.value} is not a code-allocation game")
    check_state(st0, check_scenario(sc))
    _check_round_preconditions(game, st0)  # powers stay fixed during a code game
    st = st0.copy()
    K = st.codes.shape[1]
    report = cfg.report_receiver if game is Game.MENON else "lmmse"
    _refresh_receivers(sc, st, "lmmse" if game is not Game.MENON else report)
    prev = _objective(game, sc, st)
    record = RunRecord(game=game)

    for rnd in range(1, cfg.max_rounds + 1):
        old_codes = st.codes.copy()
        if on_step is None:
            _kernels.code_round(_KERNEL_GAME[game], st.codes, st.receivers, st.powers,
                                sc.gains_sq, sc.assignment, float(sc.noise_variance))
        else:
            for k in range(K):
                _update_player(game, k, sc, st)
                on_step(k, st)
        _refresh_receivers(sc, st, report)
        value = _objective(game, sc, st)
        record.trace.append(RoundTrace(rnd, value, games.all_sinrs(sc, st), st.powers.copy(), 0.0))
        record.rounds_used = rnd
        if value is None:
            done = code_change(st.codes, old_codes) < cfg.code_tol
        else:
            done = value - prev < cfg.code_tol * max(abs(value), np.finfo(float).tiny)
            prev = value
        if done:
            record.converged = True
            break

    record.final_state = st
    return record


def run_power_game(sc, st, ep=None, cfg=None, receiver="lmmse", tol=None, max_rounds=None):
    """Energy-efficient power control at fixed codes.

    Each round updates every user's power to its capped best response, then
    refreshes the receivers (LMMSE, or ``d = s`` for the matched filter).
    Stops once ``E(n) = ||p(n) - p(n-1)|| / ||p(n)||`` drops below ``tol``
    (default ``cfg.power_tol``).
    """
    ep = ep or EfficiencyParams()
    cfg = cfg or DynamicsConfig(game=Game.POWER_ONLY_LMMSE if receiver == "lmmse"
                                else Game.POWER_ONLY_MF)
    tol = cfg.power_tol if tol is None else tol
    max_rounds = cfg.max_power_rounds if max_rounds is None else max_rounds
    check_state(st, check_scenario(sc))
    st = st.copy()
    K = st.codes.shape[1]
    record = RunRecord(game=Game.POWER_ONLY_LMMSE if receiver == "lmmse" else Game.POWER_ONLY_MF)
    for rnd in range(1, max_rounds + 1):
        old = st.powers.copy()
        for k in range(K):
            st.powers[k] = games.power_best_response(k, sc, st, ep, receiver=receiver)
        _refresh_receivers(sc, st, receiver)
        err = normalized_change(st.powers, old)
        record.trace.append(RoundTrace(rnd, None, games.all_sinrs(sc, st), st.powers.copy(), err))
        record.rounds_used = rnd
        if err < tol:
            record.converged = True
            break
    record.final_state = st
    return record


def _run_joint(game, sc, st0, ep, cfg):
    code_game = _JOINT_CODE_STEP[game]
    check_state(st0, check_scenario(sc))
    st = st0.copy()
    record = RunRecord(game=game)
    for n in range(1, cfg.max_outer + 1):
        prev_powers = st.powers.copy()
        codes = run_code_game(code_game, sc, st, cfg)
        powers = run_power_game(sc, codes.final_state, ep, cfg, receiver="lmmse",
                                tol=cfg.inner_power_tol)
        st = powers.final_state
        err = normalized_change(st.powers, prev_powers)
        value = _objective(code_game, sc, st)
        record.trace.append(RoundTrace(n, value, games.all_sinrs(sc, st), st.powers.copy(), err,
                                       inner_rounds=codes.rounds_used + powers.rounds_used))
        record.rounds_used = n
        if err < cfg.power_tol:
            record.converged = True
            break
    record.final_state = st
    return record


def run_algorithm1(sc, st0, ep=None, cfg=None):
    """Alternate greedy SINR-maximising code allocation and LMMSE power control.

    Convergence is not guaranteed when users outnumber the code dimension;
    the record reports whether the outer ``E(n)`` criterion was met.
    """
    return _run_joint(Game.ALGORITHM1, sc, st0, ep or EfficiencyParams(),
                      cfg or DynamicsConfig(game=Game.ALGORITHM1))


def run_algorithm2(sc, st0, ep=None, cfg=None):
    """Alternate the total-MSE code game and LMMSE power control.

    Each outer iteration warm-starts the code game from the previous codes.
    ``trace[n-1].E`` is ``||p(n) - p(n-1)|| / ||p(n)||`` with ``p(0)`` the
    starting powers.
    """
    return _run_joint(Game.ALGORITHM2, sc, st0, ep or EfficiencyParams(),
                      cfg or DynamicsConfig(game=Game.ALGORITHM2))


def run_menon_joint(sc, st0, ep=None, cfg=None):
    """Joint variant using the inverse-SINR (matched-filter) code game as the code step."""
    return _run_joint(Game.MENON_JOINT, sc, st0, ep or EfficiencyParams(),
                      cfg or DynamicsConfig(game=Game.MENON_JOINT))


def run_initial(sc, st0, cfg=None):
    """No adaptation: the starting codes with freshly computed receivers."""
    cfg = cfg or DynamicsConfig(game=Game.INITIAL)
    check_state(st0, check_scenario(sc))
    st = st0.copy()
    _refresh_receivers(sc, st, cfg.report_receiver)
    return RunRecord(game=Game.INITIAL, converged=True, rounds_used=0, final_state=st)


def run_game(sc, st0, cfg, ep=None):
    """Dispatch on ``cfg.game``."""
    game = cfg.game
    if game in CODE_GAMES:
        return run_code_game(game, sc, st0, cfg)
    if game is Game.POWER_ONLY_LMMSE:
        return run_power_game(sc, st0, ep, cfg, receiver="lmmse")
    if game is Game.POWER_ONLY_MF:
        return run_power_game(sc, st0, ep, cfg, receiver="mf")
    if game in JOINT_GAMES:
        return _run_joint(game, sc, st0, ep or EfficiencyParams(), cfg)
    return run_initial(sc, st0, cfg)


def run_downlink_mmse(dsc, codes, max_rounds=5000, tol=1e-10):
    """Iterate the downlink MSE updates round-robin until codes stop moving.

    Returns
    -------
    codes, receivers : ndarray
    rounds : int
    converged : bool
    """
    codes = np.array(codes, dtype=float)
    receivers = np.empty_like(codes)
    for rnd in range(1, max_rounds + 1):
        old = codes.copy()
        for b in range(dsc.B):
            receivers[:, b], codes[:, b] = games.downlink_mmse_update(b, dsc, codes)
        if code_change(codes, old) < tol:
            return codes, receivers, rnd, True
    return codes, receivers, max_rounds, False


def with_game(cfg, game):
    return replace(cfg, game=Game(game))
