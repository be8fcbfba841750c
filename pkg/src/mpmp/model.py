"""Network scenarios, game states, and their seeded random generation.

Geometry conventions
--------------------
* Nodes live in a ``side_m x side_m`` square (default 1000 m).
* Macro access points sit at the centres of a column-major grid of equal
  cells: one AP at the centre, two at (250, 500) and (750, 500), four at the
  quadrant centres (250, 250), (250, 750), (750, 250), (750, 750).
* Femtocell scenarios add ``n_femto`` APs placed uniformly in the square;
  a femto AP may only serve users within ``femto_radius_m`` of it. In a
  femtocell scenario ``B`` counts the macro APs only, so the scenario has
  ``B + n_femto`` receivers, macro APs first.
* Peer-to-peer links place each receiver uniformly in a disc of radius
  ``side_m / 2`` around its transmitter, clipped to the square.
* Squared channel gains are exponential with mean ``d**-2`` where the
  distance is clamped below by ``d_min_m``.

Random substreams
-----------------
All randomness derives from ``config.seed`` through
``numpy.random.SeedSequence(seed, spawn_key=(stream,))``:
stream 0 user positions, 1 receiver positions, 2 fading, 3 initial codes.
"""

import enum
import json
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property

import numpy as np

from .exceptions import InvalidInputError, ValidationError
from .validation import check_codes, check_powers

STREAM_USERS = 0
STREAM_RECEIVERS = 1
STREAM_FADING = 2
STREAM_CODES = 3

SCENARIO_SCHEMA = "mpmp.scenario/1"


class ScenarioKind(str, enum.Enum):
    PEER_TO_PEER = "PeerToPeer"
    MULTICELL = "Multicell"
    FEMTOCELL = "Femtocell"
    DOWNLINK = "DownlinkSingleCell"


def substream(seed, stream):
    """Independent generator for one of the documented random substreams."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream,)))


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of a random network realization.

    ``noise_variance`` is the per-chip thermal noise power in watts and
    ``K``, ``B``, ``N`` are the user count, receiver count, and processing
    gain. See the module docstring for the meaning of ``B`` in femtocell
    scenarios.
    """

    kind: ScenarioKind = ScenarioKind.PEER_TO_PEER
    K: int = 4
    B: int = 4
    N: int = 8
    side_m: float = 1000.0
    noise_variance: float = 1e-5
    seed: int = 0
    d_min_m: float = 10.0
    n_femto: int = 4
    femto_radius_m: float = 100.0
    downlink_power: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ScenarioKind(self.kind))
        except ValueError:
            choices = ", ".join(k.value for k in ScenarioKind)
            raise ValidationError(f"unknown kind {self.kind!r} (expected one of {choices})",
                                  "scenario.kind") from None
        for name in ("K", "B", "N"):
            _check_int(self, name, minimum=1)
        _check_int(self, "n_femto", minimum=0)
        if (isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer))
                or not 0 <= self.seed < 2**64):
            raise ValidationError("must be in [0, 2**64)", "scenario.seed")
        for name in ("side_m", "noise_variance", "d_min_m", "femto_radius_m", "downlink_power"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and np.isfinite(value) and value > 0):
                raise ValidationError(f"must be a positive number, got {value!r}", f"scenario.{name}")
        if self.kind is ScenarioKind.PEER_TO_PEER and self.K != self.B:
            raise ValidationError(f"peer-to-peer requires K == B (got K={self.K}, B={self.B})",
                                  "scenario.B")

    @property
    def n_receivers(self):
        if self.kind is ScenarioKind.FEMTOCELL:
            return self.B + self.n_femto
        return self.B

    def with_users(self, K):
        """Copy with ``K`` users (and ``B = K`` for peer-to-peer)."""
        if self.kind is ScenarioKind.PEER_TO_PEER:
            return replace(self, K=K, B=K)
        return replace(self, K=K)

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d, section="scenario"):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown field {unknown[0]!r}", section)
        return cls(**d)


def _check_int(cfg, name, minimum):
    value = getattr(cfg, name)
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise ValidationError(f"must be an integer >= {minimum}, got {value!r}", f"scenario.{name}")


@dataclass(frozen=True, eq=False)
class Scenario:
    """One network realization.

    ``gains[k, l]`` is the real amplitude gain from user ``k`` to receiver
    ``l`` and ``assignment[k]`` the 0-based receiver decoding user ``k``.
    """

    config: ScenarioConfig
    gains: np.ndarray
    assignment: np.ndarray
    user_positions: np.ndarray
    receiver_positions: np.ndarray
    n_macro: int = field(default=-1)

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        assignment = np.asarray(self.assignment, dtype=np.intp)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "user_positions", np.asarray(self.user_positions, dtype=float))
        object.__setattr__(self, "receiver_positions",
                           np.asarray(self.receiver_positions, dtype=float))
        if self.n_macro < 0:
            object.__setattr__(self, "n_macro", gains.shape[1])
        K, R = self.config.K, self.config.n_receivers
        if gains.shape != (K, R):
            raise ValidationError(f"expected shape {(K, R)}, got {gains.shape}", "scenario.gains")
        if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
            raise ValidationError("all gains must be finite and positive", "scenario.gains")
        if assignment.shape != (K,) or np.any(assignment < 0) or np.any(assignment >= R):
            raise ValidationError("each user needs a receiver index in [0, n_receivers)",
                                  "scenario.assignment")

    @property
    def K(self):
        return self.config.K

    @property
    def N(self):
        return self.config.N

    @property
    def noise_variance(self):
        return self.config.noise_variance

    @cached_property
    def gains_sq(self):
        """Squared gains ``h**2`` (K x receivers)."""
        return self.gains**2

    @cached_property
    def own_gain_sq(self):
        """``h[k, a(k)]**2`` for every user."""
        return self.gains_sq[np.arange(self.K), self.assignment]

    def to_dict(self):
        return {
            "schema": SCENARIO_SCHEMA,
            "config": self.config.to_dict(),
            "n_macro": int(self.n_macro),
            "user_positions": self.user_positions.tolist(),
            "receiver_positions": self.receiver_positions.tolist(),
            "gains": self.gains.tolist(),
            "assignment": self.assignment.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != SCENARIO_SCHEMA:
            raise ValidationError(f"expected schema {SCENARIO_SCHEMA!r}", "schema")
        return cls(
            config=ScenarioConfig.from_dict(d["config"]),
            gains=np.array(d["gains"], dtype=float),
            assignment=np.array(d["assignment"], dtype=np.intp),
            user_positions=np.array(d["user_positions"], dtype=float).reshape(-1, 2),
            receiver_positions=np.array(d["receiver_positions"], dtype=float).reshape(-1, 2),
            n_macro=int(d["n_macro"]),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class GameState:
    """Joint strategy profile: codes and receivers are N x K, powers length K.

    The container is frozen but the arrays are not: the dynamics engine
    works on a private :meth:`copy` and updates it in place.
    """

    codes: np.ndarray
    powers: np.ndarray
    receivers: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "codes", np.array(self.codes, dtype=float))
        object.__setattr__(self, "powers", np.array(self.powers, dtype=float).reshape(-1))
        object.__setattr__(self, "receivers", np.array(self.receivers, dtype=float))
        K = self.codes.shape[1] if self.codes.ndim == 2 else -1
        check_codes(self.codes)
        check_powers(self.powers, K)
        if self.receivers.shape != self.codes.shape or not np.all(np.isfinite(self.receivers)):
            raise InvalidInputError("receivers must be a finite matrix shaped like codes")

    @classmethod
    def initial(cls, codes, powers):
        """State with matched-filter receivers (``d_k = s_k``)."""
        codes = np.asarray(codes, dtype=float)
        powers = np.broadcast_to(np.asarray(powers, dtype=float), (codes.shape[1],))
        return cls(codes=codes, powers=powers, receivers=codes.copy())

    def copy(self):
        return GameState(self.codes.copy(), self.powers.copy(), self.receivers.copy())

    def to_dict(self):
        return {
            "codes": self.codes.tolist(),
            "powers": self.powers.tolist(),
            "receivers": self.receivers.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["codes"]), np.array(d["powers"]), np.array(d["receivers"]))


@dataclass(frozen=True, eq=False)
class DownlinkScenario:
    """Single transmitter broadcasting to ``B`` receivers with gains ``g_b``."""

    B: int
    N: int
    p: float
    gains: np.ndarray
    noise_variance: float

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float).reshape(-1)
        object.__setattr__(self, "gains", gains)
        if gains.shape != (self.B,) or np.any(gains <= 0):
            raise ValidationError("need B positive gains", "downlink.gains")
        if not self.p > 0:
            raise ValidationError("transmit power must be positive", "downlink.p")
        if not self.noise_variance > 0:
            raise ValidationError("must be positive", "downlink.noise_variance")


def macro_sites(B, side):
    """Centres of ``B`` cells of a column-major grid covering the square."""
    ncols = int(np.ceil(np.sqrt(B)))
    nrows = int(np.ceil(B / ncols))
    xs = (np.arange(ncols) + 0.5) * side / ncols
    ys = (np.arange(nrows) + 0.5) * side / nrows
    sites = [(x, y) for x in xs for y in ys]
    return np.array(sites[:B], dtype=float)


def _uniform_in_disc(rng, centres, radius):
    n = centres.shape[0]
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2 * np.pi, size=n)
    return centres + np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def _distances(a, b, d_min):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return np.maximum(d, d_min), d


def generate_scenario(config):
    """Draw a scenario from ``config``; identical configs give identical scenarios.

    Raises
    ------
    ValidationError
        If ``config`` describes the downlink (use
        :func:`generate_downlink_scenario`).
    """
    if not isinstance(config, ScenarioConfig):
        raise ValidationError("expected a ScenarioConfig", "scenario")
    if config.kind is ScenarioKind.DOWNLINK:
        raise ValidationError("use generate_downlink_scenario for the downlink", "scenario.kind")
    side = config.side_m
    users = substream(config.seed, STREAM_USERS).uniform(0.0, side, size=(config.K, 2))
    rx_rng = substream(config.seed, STREAM_RECEIVERS)

    if config.kind is ScenarioKind.PEER_TO_PEER:
        receivers = np.clip(_uniform_in_disc(rx_rng, users, side / 2), 0.0, side)
        n_macro = config.B
    elif config.kind is ScenarioKind.MULTICELL:
        receivers = macro_sites(config.B, side)
        n_macro = config.B
    else:
        femto = rx_rng.uniform(0.0, side, size=(config.n_femto, 2))
        receivers = np.vstack((macro_sites(config.B, side), femto))
        n_macro = config.B

    dist, raw = _distances(users, receivers, config.d_min_m)
    gains_sq = substream(config.seed, STREAM_FADING).exponential(scale=dist**-2.0)
    # Exponential draws can underflow to exactly zero only with negligible
    # probability; keep gains strictly positive regardless.
    gains_sq = np.maximum(gains_sq, np.finfo(float).tiny)

    if config.kind is ScenarioKind.PEER_TO_PEER:
        assignment = np.arange(config.K)
    else:
        eligible = np.ones_like(gains_sq, dtype=bool)
        eligible[:, n_macro:] = raw[:, n_macro:] <= config.femto_radius_m
        assignment = np.argmax(np.where(eligible, gains_sq, -np.inf), axis=1)

    return Scenario(config=config, gains=np.sqrt(gains_sq), assignment=assignment,
                    user_positions=users, receiver_positions=receivers, n_macro=n_macro)


def macro_only(scenario):
    """The same realization with femto APs removed and users reassigned.

    Positions and fading of the macro links are kept, so comparisons against
    the femtocell scenario are paired.
    """
    cfg = scenario.config
    if cfg.kind is not ScenarioKind.FEMTOCELL:
        return scenario
    gains = scenario.gains[:, : scenario.n_macro]
    return Scenario(
        config=replace(cfg, kind=ScenarioKind.MULTICELL),
        gains=gains,
        assignment=np.argmax(gains, axis=1),
        user_positions=scenario.user_positions,
        receiver_positions=scenario.receiver_positions[: scenario.n_macro],
        n_macro=scenario.n_macro,
    )


def generate_downlink_scenario(config):
    """Single-cell downlink: one transmitter at the square centre, ``B`` receivers."""
    side = config.side_m
    rx = substream(config.seed, STREAM_USERS).uniform(0.0, side, size=(config.B, 2))
    dist, _ = _distances(rx, np.array([[side / 2, side / 2]]), config.d_min_m)
    g_sq = substream(config.seed, STREAM_FADING).exponential(scale=dist[:, 0] ** -2.0)
    return DownlinkScenario(B=config.B, N=config.N, p=config.downlink_power,
                            gains=np.sqrt(np.maximum(g_sq, np.finfo(float).tiny)),
                            noise_variance=config.noise_variance)


def random_codes(N, K, seed):
    """``K`` unit-norm columns, each a normalised standard normal ``N``-vector."""
    if N < 1 or K < 1:
        raise ValidationError(f"need N, K >= 1 (got N={N}, K={K})", "codes")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.standard_normal((N, K))
    return x / np.linalg.norm(x, axis=0)


def initial_codes(config):
    """Initial codes for a scenario config, drawn from its code substream."""
    return random_codes(config.N, config.K, substream(config.seed, STREAM_CODES))
