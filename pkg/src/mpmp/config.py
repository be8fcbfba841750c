"""TOML run configuration with sections [scenario], [efficiency], [dynamics], [campaign].

Example::

    [scenario]
    kind = "PeerToPeer"
    N = 8
    noise_variance = 1e-5

    [efficiency]
    M = 100

    [dynamics]
    game = "SinrPotential"

    [campaign]
    K_list = [4, 8, 12]
    games = ["GreedyIA", "Menon", "SinrPotential", "GreedyMMSE"]
    trials = 200
    base_seed = 0

``scenario.kind``, ``scenario.N`` and ``scenario.noise_variance`` are
required; everything else has a default. Unknown sections or keys are
errors. ``campaign.K_list`` defaults to ``[scenario.K]`` and
``campaign.games`` to ``[dynamics.game]``; every campaign game shares
the [dynamics] stopping rules.
"""

from dataclasses import dataclass, replace

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .dynamics import DynamicsConfig, Game
from .exceptions import ValidationError
from .experiments import Campaign
from .games import EfficiencyParams
from .model import ScenarioConfig

SECTIONS = ("scenario", "efficiency", "dynamics", "campaign")
REQUIRED = {"scenario": ("kind", "N", "noise_variance")}
CAMPAIGN_KEYS = ("K_list", "games", "trials", "base_seed")


class ConfigError(ValidationError):
    """Unreadable or invalid configuration file."""


@dataclass(frozen=True)
class CliConfig:
    scenario: ScenarioConfig
    efficiency: EfficiencyParams
    dynamics: DynamicsConfig
    K_list: tuple
    games: tuple
    trials: int = 200
    base_seed: int = 0

    @classmethod
    def from_dict(cls, d):
        """Build and validate a config from parsed TOML tables.

        Raises
        ------
        ValidationError
            With a dotted path such as ``scenario.noise_variance``.
        """
        unknown = sorted(set(d) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown section [{unknown[0]}]", unknown[0])
        for section in SECTIONS:
            if not isinstance(d.get(section, {}), dict):
                raise ConfigError("must be a table", section)
        for section, keys in REQUIRED.items():
            for key in keys:
                if key not in d.get(section, {}):
                    raise ConfigError("required field is missing", f"{section}.{key}")

        scenario = ScenarioConfig.from_dict(dict(d["scenario"]))
        efficiency = _build(EfficiencyParams, d.get("efficiency", {}), "efficiency")
        dynamics = _build(DynamicsConfig, d.get("dynamics", {}), "dynamics")

        camp = dict(d.get("campaign", {}))
        unknown = sorted(set(camp) - set(CAMPAIGN_KEYS))
        if unknown:
            raise ConfigError(f"unknown field {unknown[0]!r}", "campaign")
        K_list = camp.get("K_list", [scenario.K])
        if not isinstance(K_list, list) or not all(isinstance(k, int) and not isinstance(k, bool)
                                                    for k in K_list):
            raise ConfigError("must be a list of integers", "campaign.K_list")
        names = camp.get("games", [dynamics.game.value])
        if not isinstance(names, list) or not names:
            raise ConfigError("must be a non-empty list of game names", "campaign.games")
        games = []
        for i, name in enumerate(names):
            try:
                games.append(Game(name))
            except ValueError:
                raise ConfigError(f"unknown game {name!r}", f"campaign.games[{i}]") from None
        out = cls(scenario, efficiency, dynamics, tuple(K_list), tuple(games),
                  camp.get("trials", 200), camp.get("base_seed", 0))
        out.campaign()  # run the campaign-level checks now
        return out

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "efficiency": self.efficiency.to_dict(),
            "dynamics": self.dynamics.to_dict(),
            "campaign": {
                "K_list": list(self.K_list),
                "games": [g.value for g in self.games],
                "trials": self.trials,
                "base_seed": self.base_seed,
            },
        }

    def to_toml(self):
        return tomli_w.dumps(self.to_dict())

    def campaign(self, seed=None, trials=None):
        return Campaign(
            scenario=self.scenario,
            K_list=self.K_list,
            games=tuple(replace(self.dynamics, game=g) for g in self.games),
            trials=self.trials if trials is None else trials,
            base_seed=self.base_seed if seed is None else seed,
            efficiency=self.efficiency,
        )


def _build(cls, table, section):
    try:
        return cls.from_dict(dict(table))
    except ValidationError:
        raise
    except TypeError as exc:
        raise ConfigError(str(exc), section) from None


def parse_config(text):
    """Parse TOML text into a :class:`CliConfig`.

    Raises
    ------
    ConfigError
        On TOML syntax errors (the message carries line and column) or
        invalid fields.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}", "<file>") from None
    return CliConfig.from_dict(data)


def load_config(path, overrides=()):
    """Read a config file and apply ``section.key=value`` overrides."""
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}", str(path)) from None
    for item in overrides:
        apply_override(data, item)
    return CliConfig.from_dict(data)


def apply_override(data, item):
    """Set ``data[section][key]`` from a ``section.key=value`` string.

    The value is read as a TOML value (``3``, ``1e-5``, ``[4, 8]``,
    ``"Menon"``); anything that does not parse is taken as a bare string.
    """
    path, sep, raw = item.partition("=")
    section, dot, key = path.strip().partition(".")
    if not sep or not dot or not key:
        raise ConfigError(f"expected section.key=value, got {item!r}", "--set")
    if section not in SECTIONS:
        raise ConfigError(f"unknown section [{section}]", section)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    data.setdefault(section, {})[key] = value
