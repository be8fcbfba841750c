"""Monte Carlo campaigns over random scenarios.

Every trial draws one scenario and one set of starting codes per ``K``;
all games of the campaign run on that same draw so that comparisons
between games are paired. Per-trial seeds come from :func:`trial_seed`,
a splitmix64 mix of ``(base_seed, t, K)``, so any single trial can be
replayed on its own.

Output schemas
--------------
CSV: header ``K,game,metric,mean,stderr,trials``; one row per
``(K, game, metric)`` in campaign order, ``trials`` counting the runs
that finished without error.

JSON (``mpmp.campaign/1``): the campaign definition, the aggregates, the
failure tally and one entry per (trial, K, game) run.
"""

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import DynamicsConfig, Game, run_algorithm2, run_game
from .exceptions import MpmpError, ValidationError
from .games import EfficiencyParams, all_energy_efficiencies, all_sinrs
from .model import (
    GameState,
    ScenarioConfig,
    ScenarioKind,
    generate_scenario,
    initial_codes,
    macro_only,
)

CAMPAIGN_SCHEMA = "mpmp.campaign/1"
METRICS = ("sinr_db", "sinr", "energy_efficiency", "power", "rounds", "converged")
_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One step of the splitmix64 generator, as a pure function on 64-bit ints."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def trial_seed(base_seed, t, K):
    """Seed of trial ``t`` at ``K`` users; independent of the other trials."""
    return splitmix64(splitmix64(splitmix64(base_seed & _MASK64) ^ t) ^ K)


@dataclass(frozen=True)
class Campaign:
    """A sweep over ``K_list`` with ``trials`` paired draws per ``K``.

    ``scenario`` is a template; its ``K`` (and ``B`` for peer-to-peer) and
    ``seed`` are replaced per trial. Codes start random, powers at ``P_max``.
    """

    scenario: ScenarioConfig
    K_list: tuple
    games: tuple = (DynamicsConfig(),)
    trials: int = 200
    base_seed: int = 0
    efficiency: EfficiencyParams = field(default_factory=EfficiencyParams)

    def __post_init__(self):
        object.__setattr__(self, "K_list", tuple(int(k) for k in self.K_list))
        object.__setattr__(self, "games", tuple(self.games))
        if not self.K_list:
            raise ValidationError("must not be empty", "campaign.K_list")
        if any(k < 1 for k in self.K_list):
            raise ValidationError("every K must be >= 1", "campaign.K_list")
        if not self.games:
            raise ValidationError("must not be empty", "campaign.games")
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ValidationError(f"must be an integer >= 1, got {self.trials!r}", "campaign.trials")
        if isinstance(self.base_seed, bool) or not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ValidationError(f"must be a non-negative integer, got {self.base_seed!r}",
                                  "campaign.base_seed")
        # fail early on K values the template cannot host
        for K in self.K_list:
            try:
                self.scenario.with_users(K)
            except ValidationError as exc:
                raise ValidationError(f"K={K}: {exc}", "campaign.K_list") from None

    def trial_config(self, t, K):
        return replace(self.scenario.with_users(K), seed=trial_seed(self.base_seed, t, K))

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "K_list": list(self.K_list),
            "games": [g.to_dict() for g in self.games],
            "trials": self.trials,
            "base_seed": self.base_seed,
            "efficiency": self.efficiency.to_dict(),
        }


def summarize_run(sc, record, ep):
    """Per-run metrics: user-averaged SINR, bit/Joule and power, rounds, convergence."""
    st = record.final_state
    sinr = all_sinrs(sc, st)
    return {
        "sinr": float(np.mean(sinr)),
        "energy_efficiency": float(np.mean(all_energy_efficiencies(sc, st, ep))),
        "power": float(np.mean(st.powers)),
        "rounds": float(record.rounds_used),
        "converged": float(record.converged),
    }


def _run_one(sc, st0, cfg, ep):
    try:
        record = run_game(sc, st0, cfg, ep)
        return summarize_run(sc, record, ep), None
    except (MpmpError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_trial(campaign, t, K):
    config = campaign.trial_config(t, K)
    sc = generate_scenario(config)
    st0 = GameState.initial(initial_codes(config), campaign.efficiency.P_max)
    out = []
    for cfg in campaign.games:
        metrics, error = _run_one(sc, st0, cfg, campaign.efficiency)
        out.append({"trial": t, "K": K, "seed": config.seed, "game": cfg.game.value,
                    "metrics": metrics, "error": error})
    return out


def _run_trial_args(args):
    return _run_trial(*args)


@dataclass
class AggregateResult:
    """Per-(K, game) sample arrays and their summaries.

    ``samples[(K, game)][metric]`` holds one value per trial in trial order,
    NaN where the run failed; failed runs are excluded from every mean and
    counted in ``failures``.
    """

    campaign: Campaign
    samples: dict
    failures: dict
    runs: list

    def values(self, K, game, metric):
        game = Game(game).value
        if metric == "sinr_db":
            raise ValueError("sinr_db is derived from the linear 'sinr' samples")
        return self.samples[(K, game)][metric]

    def count(self, K, game):
        return int(np.sum(~np.isnan(self.values(K, game, "sinr"))))

    def mean(self, K, game, metric):
        return self.summary(K, game, metric)[0]

    def summary(self, K, game, metric):
        """``(mean, standard error, n)`` over the successful trials.

        ``sinr_db`` is ``10 log10`` of the linear mean SINR, with the
        standard error carried through by the delta method.
        """
        if metric == "sinr_db":
            m, se, n = self.summary(K, game, "sinr")
            if not m > 0:
                return np.nan, np.nan, n
            return 10 * np.log10(m), 10 / np.log(10) * se / m, n
        x = self.values(K, game, metric)
        x = x[~np.isnan(x)]
        n = x.size
        if n == 0:
            return np.nan, np.nan, 0
        se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return float(np.mean(x)), se, n

    def paired_difference(self, K, game_a, game_b, metric):
        """Per-trial ``a - b`` over trials where both runs succeeded."""
        d = self.values(K, game_a, metric) - self.values(K, game_b, metric)
        return d[~np.isnan(d)]

    def rows(self):
        for K in self.campaign.K_list:
            for cfg in self.campaign.games:
                for metric in METRICS:
                    m, se, n = self.summary(K, cfg.game, metric)
                    yield K, cfg.game.value, metric, m, se, n

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["K", "game", "metric", "mean", "stderr", "trials"])
        for K, game, metric, m, se, n in self.rows():
            writer.writerow([K, game, metric, repr(float(m)), repr(float(se)), n])
        return buf.getvalue()

    def to_dict(self):
        return {
            "schema": CAMPAIGN_SCHEMA,
            "campaign": self.campaign.to_dict(),
            "aggregates": [
                {"K": K, "game": g, "metric": metric, "mean": _json_float(m),
                 "stderr": _json_float(se), "trials": n}
                for K, g, metric, m, se, n in self.rows()
            ],
            "failures": [{"K": K, "game": g, "count": c} for (K, g), c in self.failures.items()],
            "runs": self.runs,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def _json_float(x):
    return None if np.isnan(x) else float(x)


def run_campaign(campaign, jobs=1):
    """Run every game on every (trial, K) draw and aggregate.

    Parameters
    ----------
    campaign : Campaign
    jobs : int
        Worker processes. Trials are reduced in fixed order, so the result
        does not depend on ``jobs``.

    Returns
    -------
    AggregateResult
    """
    tasks = [(campaign, t, K) for K in campaign.K_list for t in range(campaign.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial_args, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_run_trial(*task) for task in tasks]

    samples, failures, runs = {}, {}, []
    for K in campaign.K_list:
        for cfg in campaign.games:
            key = (K, cfg.game.value)
            samples.setdefault(key, {m: np.full(campaign.trials, np.nan) for m in METRICS[1:]})
            failures.setdefault(key, 0)
    for trial_runs in results:
        for run in trial_runs:
            key = (run["K"], run["game"])
            runs.append(run)
            if run["error"] is not None:
                failures[key] += 1
                continue
            for metric, value in run["metrics"].items():
                samples[key][metric][run["trial"]] = value
    return AggregateResult(campaign, samples, failures, runs)


def table1_replica(K_list, trials, seed, N=8, ep=None, cfg=None):
    """Outer iterations of Algorithm 2 needed to reach ``E(n) < power_tol``.

    Runs on peer-to-peer scenarios. A run that hits the outer cap counts
    with ``max_outer`` iterations.

    Returns
    -------
    dict
        ``K -> {"median": float, "iterations": list, "converged": int,
        "median_E": list}`` where ``median_E[n-1]`` is the median ``E(n)``
        over the runs that reached iteration ``n``.
    """
    ep = ep or EfficiencyParams()
    cfg = cfg or DynamicsConfig(game=Game.ALGORITHM2)
    template = ScenarioConfig(kind=ScenarioKind.PEER_TO_PEER, K=1, B=1, N=N)
    out = {}
    for K in K_list:
        iterations, converged, errors = [], 0, []
        for t in range(trials):
            config = replace(template.with_users(K), seed=trial_seed(seed, t, K))
            sc = generate_scenario(config)
            st0 = GameState.initial(initial_codes(config), ep.P_max)
            record = run_algorithm2(sc, st0, ep, cfg)
            iterations.append(record.rounds_used)
            converged += record.converged
            errors.append(record.errors)
        depth = max(len(e) for e in errors)
        median_E = [float(np.median([e[n] for e in errors if len(e) > n])) for n in range(depth)]
        out[K] = {"median": float(np.median(iterations)), "iterations": iterations,
                  "converged": converged, "median_E": median_E}
    return out


def femtocell_uplift(K_list, trials, base_seed, game=Game.ALGORITHM2, N=8, B=2, n_femto=4,
                     ep=None, cfg=None):
    """Paired bit/Joule of a macro+femto network against the same draw without femtocells.

    Each trial draws a femtocell scenario, runs ``game`` on it and on
    :func:`macro_only` of it from the same starting codes.

    Returns
    -------
    dict
        ``K -> {"femto": ndarray, "macro": ndarray}`` of per-trial mean
        bit/Joule, NaN where a run failed.
    """
    ep = ep or EfficiencyParams()
    cfg = cfg or DynamicsConfig(game=Game(game))
    template = ScenarioConfig(kind=ScenarioKind.FEMTOCELL, K=1, B=B, N=N, n_femto=n_femto)
    out = {}
    for K in K_list:
        femto, macro = np.full(trials, np.nan), np.full(trials, np.nan)
        for t in range(trials):
            config = replace(template.with_users(K), seed=trial_seed(base_seed, t, K))
            sc = generate_scenario(config)
            st0 = GameState.initial(initial_codes(config), ep.P_max)
            for target, scenario in ((femto, sc), (macro, macro_only(sc))):
                metrics, _ = _run_one(scenario, st0, cfg, ep)
                if metrics is not None:
                    target[t] = metrics["energy_efficiency"]
        out[K] = {"femto": femto, "macro": macro}
    return out
