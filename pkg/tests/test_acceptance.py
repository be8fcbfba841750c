"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones. A criterion that does not hold is left
failing, with the measured numbers in its report line.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

import oracles
from mpmp import games
from mpmp.cli import main
from mpmp.dynamics import DynamicsConfig, Game, run_code_game, run_power_game
from mpmp.experiments import Campaign, femtocell_uplift, run_campaign, table1_replica
from mpmp.games import EfficiencyParams
from mpmp.model import GameState, Scenario, ScenarioConfig, generate_scenario, initial_codes, random_codes

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def scenario(kind, K, seed, N=8):
    B = K if kind == "PeerToPeer" else (2 if kind == "Femtocell" else 4)
    cfg = ScenarioConfig(kind=kind, K=K, B=B, N=N, seed=seed)
    return cfg, generate_scenario(cfg)


def oracle_args(sc, st):
    return sc.gains_sq, sc.assignment, st.codes, st.powers, sc.noise_variance


def random_states(n, rng, kinds=("PeerToPeer", "Multicell", "Femtocell"), K_max=30, per_scenario=20):
    """``n`` (scenario, state) pairs with random codes, powers in (0.05, 1] and receivers."""
    out = []
    while len(out) < n:
        cfg, sc = scenario(str(rng.choice(kinds)), int(rng.integers(2, K_max + 1)), int(rng.integers(2**32)))
        for _ in range(min(per_scenario, n - len(out))):
            st = GameState(random_codes(sc.N, sc.K, rng), rng.uniform(0.05, 1.0, sc.K),
                           rng.standard_normal((sc.N, sc.K)) * 1e3)
            out.append((sc, st))
    return out


def with_code(st, k, s, d=None):
    codes, receivers = st.codes.copy(), st.receivers.copy()
    codes[:, k] = s
    if d is not None:
        receivers[:, k] = d
    return GameState(codes, st.powers, receivers)


# ---------------------------------------------------------------------------


def test_01_orthonormal_equilibrium(report):
    # compile and load the kernels outside the timed region
    _, sc = scenario("PeerToPeer", 6, 0)
    for g in (Game.GREEDY_IA, Game.GREEDY_MMSE, Game.SINR_POTENTIAL):
        run_code_game(g, sc, GameState.initial(random_codes(8, 6, 0), 1.0))

    start = time.perf_counter()
    worst, not_converged, one_round_bad = {}, {}, 0
    for s in range(100):
        cfg, sc = scenario("PeerToPeer", 6, 10_000 + s)
        st0 = GameState.initial(initial_codes(cfg), 1.0)
        for g in (Game.GREEDY_IA, Game.GREEDY_MMSE, Game.SINR_POTENTIAL):
            rec = run_code_game(g, sc, st0, DynamicsConfig(game=g))
            err = oracles.orthonormality_error(rec.final_state.codes, sc.assignment)
            worst[g.value] = max(worst.get(g.value, 0.0), err)
            not_converged[g.value] = not_converged.get(g.value, 0) + (not rec.converged)
        one = run_code_game(Game.GREEDY_IA, sc, st0, DynamicsConfig(game=Game.GREEDY_IA, max_rounds=1))
        if oracles.orthonormality_error(one.final_state.codes, sc.assignment) > 1e-6:
            one_round_bad += 1
    elapsed = time.perf_counter() - start

    ok = (all(v <= 1e-6 for v in worst.values()) and not any(not_converged.values())
          and one_round_bad == 0 and elapsed < 10.0)
    detail = (f"max Gram error {', '.join(f'{k}={v:.1e}' for k, v in worst.items())}; "
              f"non-converged {not_converged}; GreedyIA not orthonormal after one round in "
              f"{one_round_bad}/100; {elapsed:.1f} s")
    report(1, ok, detail)


def test_02_potential_monotonicity(report):
    kinds = {Game.MENON: "NegSumInverseSinr", Game.SINR_POTENTIAL: "NegSumRho", Game.TMSE_MIN: "TotalMse"}
    sign = {Game.MENON: 1.0, Game.SINR_POTENTIAL: 1.0, Game.TMSE_MIN: -1.0}
    worst = {g.value: np.inf for g in kinds}
    steps = {g.value: 0 for g in kinds}
    converged = {g.value: 0 for g in kinds}
    for s in range(50):
        cfg, sc = scenario("PeerToPeer", 12, 20_000 + s)
        st0 = GameState.initial(initial_codes(cfg), 1.0)
        for g, kind in kinds.items():
            start = GameState(st0.codes, st0.powers, games.lmmse_receivers(sc, st0))
            prev = [sign[g] * games.potential(kind, sc, start)]

            def on_step(k, st, g=g, kind=kind, prev=prev):
                value = sign[g] * games.potential(kind, sc, st)
                worst[g.value] = min(worst[g.value], value - prev[0])
                steps[g.value] += 1
                prev[0] = value

            rec = run_code_game(g, sc, st0, DynamicsConfig(game=g, max_rounds=5000), on_step=on_step)
            converged[g.value] += rec.converged
    ok = (all(v >= -1e-10 for v in worst.values())
          and converged["SinrPotential"] == 50 and converged["Menon"] == 50)
    detail = (f"smallest step change {', '.join(f'{k}={v:.2e}' for k, v in worst.items())} "
              f"over {steps} steps; converged within 5000 rounds {converged} of 50")
    report(2, ok, detail)


def _identity_residuals(game, rng, n=1000):
    """Worst ``|du - dPot| / (1 + |dPot|)`` over ``n`` random unilateral deviations."""
    worst, weighted = 0.0, 0.0
    for sc, st in random_states(n, rng, per_scenario=10):
        k = int(rng.integers(sc.K))
        s = random_codes(sc.N, 1, rng)[:, 0]
        if game is Game.MENON:
            new = with_code(st, k, s)
            du = games.menon_utility(k, sc, new) - games.menon_utility(k, sc, st)
            dp = games.potential("NegSumInverseSinr", sc, new) - games.potential("NegSumInverseSinr", sc, st)
        elif game is Game.SINR_POTENTIAL:
            new = with_code(st, k, s)
            du = games.sinr_potential_utility(k, sc, new) - games.sinr_potential_utility(k, sc, st)
            dp = games.potential("NegSumRho", sc, new) - games.potential("NegSumRho", sc, st)
            w = st.powers[k] * sc.gains_sq[k, sc.assignment[k]]
            weighted = max(weighted, abs(w * du - dp) / abs(dp))
        else:
            new = with_code(st, k, s, rng.standard_normal(sc.N) * 1e3)
            du = games.tmse_utility(k, sc, new) - games.tmse_utility(k, sc, st)
            dp = -(games.potential("TotalMse", sc, new) - games.potential("TotalMse", sc, st))
        worst = max(worst, abs(du - dp) / (1 + abs(dp)))
    return worst, weighted


@pytest.mark.parametrize("game", [Game.MENON, Game.SINR_POTENTIAL, Game.TMSE_MIN], ids=lambda g: g.value)
def test_03_exact_potential_identity(report, game):
    rng = np.random.default_rng(30_000 + list(Game).index(game))
    worst, weighted = _identity_residuals(game, rng)
    detail = f"{game.value}: worst |du - dPot|/(1+|dPot|) = {worst:.2e} over 1000 deviations (limit 1e-8)"
    if game is Game.SINR_POTENTIAL:
        detail += (f"; the weighted identity dPot = p_k h_k^2 du holds to relative {weighted:.2e}, so this game "
                   "is a weighted rather than exact potential game")
    report(3, worst <= 1e-8, detail)


def test_04_lmmse_oracle(report):
    rng = np.random.default_rng(40_000)
    sinr_err, mse_err, oracle_mse_err = 0.0, 0.0, 0.0
    for sc, st in random_states(1000, rng, per_scenario=10):
        k = int(rng.integers(sc.K))
        d_ref = oracles.lmmse_receiver(*oracle_args(sc, st), k)
        ref = oracles.sinr(*oracle_args(sc, st), k, d_ref)
        gamma = games.lmmse_sinr(k, sc, st)
        sinr_err = max(sinr_err, abs(gamma - ref) / abs(ref))
        target = 1.0 / (1.0 + gamma)
        eps2 = games.mse(k, sc, st, receiver=games.lmmse_receiver(k, sc, st))
        mse_err = max(mse_err, abs(eps2 - target) / target)
        eps2_ref = oracles.mse(*oracle_args(sc, st), k, d_ref)
        oracle_mse_err = max(oracle_mse_err, abs(eps2_ref - 1.0 / (1.0 + ref)) * (1.0 + ref))
    ok = max(sinr_err, mse_err, oracle_mse_err) <= 1e-8
    detail = (f"max relative SINR error {sinr_err:.2e}; MSE vs 1/(1+SINR) {mse_err:.2e} "
              f"(oracle receiver {oracle_mse_err:.2e}) over 1000 states")
    report(4, ok, detail)


def test_05_gamma_bar(report):
    parts, ok = [], True
    for M in (2, 10, 100):
        x = games.gamma_bar(M)
        residual = abs(M * x * np.exp(-x) - (1.0 - np.exp(-x)))
        ref = oracles.gamma_bar(M)
        ok &= residual < 1e-10 and abs(x - ref) <= 1e-9 * ref
        parts.append(f"M={M}: {x:.10f} residual {residual:.1e} oracle diff {abs(x - ref):.1e}")
    report(5, ok, "; ".join(parts))


def test_06_power_game_equilibrium(report):
    worst, checked = 0.0, 0
    for M in (2, 10, 100):
        ep = EfficiencyParams(M=M, L=M, P_max=1e6)
        target = games.gamma_bar(M)
        for s in range(10):
            _, sc = scenario("PeerToPeer", 2, 60_000 + 10 * M + s)
            q = np.linalg.qr(np.random.default_rng(s).standard_normal((sc.N, 2)))[0]
            st0 = GameState.initial(q, ep.P_max)
            rec = run_power_game(sc, st0, ep)
            st = rec.final_state
            assert np.all(st.powers < ep.P_max), "power cap became active"
            sinr = games.all_sinrs(sc, st)
            worst = max(worst, float(np.max(np.abs(sinr - target) / target)))
            checked += 1
    report(6, worst <= 1e-6, f"max relative |SINR - gamma_bar| = {worst:.2e} over {checked} equilibria")


def test_07_outer_iteration_counts(report):
    start = time.perf_counter()
    table = table1_replica([3, 10, 25, 30], 100, 0)
    elapsed = time.perf_counter() - start
    med = [table[K]["median"] for K in (3, 10, 25, 30)]
    ok = med[0] <= 6 and med[3] <= 25 and all(a <= b for a, b in zip(med, med[1:])) and elapsed < 300
    conv = {K: table[K]["converged"] for K in table}
    report(7, ok, f"median outer iterations K=3,10,25,30: {med}; converged {conv}/100; {elapsed:.0f} s")


def test_08_code_game_sinr(report):
    p2p = ScenarioConfig(kind="PeerToPeer", K=4, B=4, N=8)
    four = tuple(DynamicsConfig(game=g) for g in
                 (Game.GREEDY_IA, Game.MENON, Game.SINR_POTENTIAL, Game.GREEDY_MMSE))
    low = run_campaign(Campaign(p2p, (4, 8), four, trials=200, base_seed=8))
    pair = (DynamicsConfig(game=Game.SINR_POTENTIAL), DynamicsConfig(game=Game.MENON))
    high = run_campaign(Campaign(p2p, (12,), pair, trials=200, base_seed=8))

    ok, parts = True, []
    for K in (4, 8):
        means = {g.game.value: low.mean(K, g.game, "sinr") for g in four}
        spread = max(means.values()) / min(means.values()) - 1.0
        ok &= spread <= 0.05 and sum(low.failures[(K, g.game.value)] for g in four) == 0
        parts.append(f"K={K} spread {100 * spread:.2f}% ({', '.join(f'{k} {v:.1f}' for k, v in means.items())})")
    sp, mn = high.mean(12, Game.SINR_POTENTIAL, "sinr"), high.mean(12, Game.MENON, "sinr")
    ok &= sp >= mn and sum(high.failures.values()) == 0
    parts.append(f"K=12 SinrPotential {sp:.2f} vs Menon {mn:.2f}")
    report(8, ok, "; ".join(parts))


def test_09_energy_efficiency_ordering(report):
    p2p = ScenarioConfig(kind="PeerToPeer", K=4, B=4, N=8)
    three = tuple(DynamicsConfig(game=g) for g in (Game.ALGORITHM2, Game.POWER_ONLY_LMMSE, Game.POWER_ONLY_MF))
    res = run_campaign(Campaign(p2p, (4, 8, 12), three, trials=200, base_seed=9))
    uplift = femtocell_uplift((4, 8, 12), 200, 9)

    ok, parts = True, []
    for K in (4, 8, 12):
        a2, lm, mf = (res.mean(K, g.game, "energy_efficiency") for g in three)
        femto, macro = uplift[K]["femto"], uplift[K]["macro"]
        failed = sum(res.failures[(K, g.game.value)] for g in three) + int(np.isnan(femto).sum()
                                                                          + np.isnan(macro).sum())
        ok &= a2 >= lm >= mf and np.mean(femto) > np.mean(macro) and failed == 0
        parts.append(f"K={K} Alg2 {a2:.4g} >= LMMSE {lm:.4g} >= MF {mf:.4g}, "
                     f"femto {np.mean(femto):.4g} vs macro {np.mean(macro):.4g}")
    report(9, ok, "; ".join(parts))


def test_10_cross_term_shrinks(report):
    rng = np.random.default_rng(100_000)

    def with_noise(sc, factor):
        return Scenario(replace(sc.config, noise_variance=sc.noise_variance * factor), sc.gains,
                        sc.assignment, sc.user_positions, sc.receiver_positions)

    def mean_ratio(scn, st):
        s_l = GameState(st.codes, st.powers, games.lmmse_receivers(scn, st))
        return float(np.mean([games.high_sinr_cross_term(k, scn, s_l) / abs(games.tmse_cost(k, scn, s_l))
                              for k in range(scn.K)]))

    worse, worse_high, tested, sinrs = 0, 0, 0, []
    for s in range(50):
        kind = ("PeerToPeer", "Multicell", "Femtocell")[s % 3]
        _, sc = scenario(kind, int(rng.integers(2, 9)), 100_000 + s)
        st = GameState.initial(random_codes(sc.N, sc.K, rng), rng.uniform(0.05, 1.0, sc.K))
        sinrs.append(np.median(games.all_sinrs(sc, GameState(st.codes, st.powers, games.lmmse_receivers(sc, st)))))
        # the criterion: system noise level against a hundredth of it
        worse += not mean_ratio(with_noise(sc, 1e-2), st) < mean_ratio(sc, st)
        # the same step taken from an already high-SINR operating point, for context
        worse_high += not mean_ratio(with_noise(sc, 1e-4), st) < mean_ratio(with_noise(sc, 1e-2), st)
        tested += 1
    report(10, worse == 0,
           f"cross-term share of |L| reduced on {tested - worse}/{tested} states at the system noise level "
           f"(median LMMSE SINR {np.median(sinrs):.2f}); starting from noise/100 it is reduced on "
           f"{tested - worse_high}/{tested}")


CLI_CONFIG = """
[scenario]
kind = "Multicell"
N = 8
noise_variance = 1e-5
K = 6
B = 4
seed = 5

[dynamics]
game = "Algorithm2"

[campaign]
K_list = [3, 6]
games = ["GreedyIA", "GreedyMMSE", "Menon", "SinrPotential", "TmseMin", "Algorithm1", "Algorithm2", "PowerOnlyMF"]
trials = 3
"""


def test_11_cli_determinism(report, tmp_path):
    config = tmp_path / "c.toml"
    config.write_text(CLI_CONFIG)
    invocations = [
        ["run", str(config), "--seed", "123"],
        ["run", str(config), "--seed", "123", "--jobs", "2"],
        ["trace", str(config), "--seed", "9"],
        ["trace", str(config), "--seed", "9", "--game", "TmseMin", "--K", "10"],
        ["gen-scenario", str(config), "--seed", "4"],
        ["table1", "--K-list", "3", "5", "--trials", "3", "--seed", "2"],
    ]
    mismatched, files = [], 0
    for i, argv in enumerate(invocations):
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{i}{rep}"
            assert main(argv + ["--out", str(out)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        files += len(outs[0])
        if outs[0] != outs[1]:
            mismatched.append(" ".join(argv[:1]))
    # serial and parallel campaigns must agree as well
    if outs and (tmp_path / "0a" / "results.csv").read_bytes() != (tmp_path / "1a" / "results.csv").read_bytes():
        mismatched.append("run --jobs")
    report(11, not mismatched, f"{files} output files compared across {len(invocations)} invocations; "
                               f"mismatches: {mismatched or 'none'}")
