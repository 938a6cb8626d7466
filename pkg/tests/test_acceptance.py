"""Acceptance suite: one test per release criterion, each printing a
PASS line with its headline numbers (run with -s or -rA to see them).

Every tolerance is pinned here; the simulation setups are deterministic
(fixed seeds), so these tests are exact gates, not flaky statistics.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest
from _oracles import (binomial_band, mc_kl_estimate, sener_reference,
                      simulate_common_factor_garch, simulate_garch,
                      write_price_csv)

from encvar import backtest as bt
from encvar import cli, market_data as md, rmt, vae
from encvar import var_models as vm


def report(criterion, detail):
    print(f"[criterion {criterion}] PASS: {detail}")


# ---------------------------------------------------------------------------
# 1. closed-form KL vs Monte-Carlo oracle


def test_criterion_01_kl_matches_monte_carlo():
    # relative error against a stochastic estimate is only meaningful when
    # the divergence itself is bounded away from zero, so near-(0, 1)
    # draws (true KL ~ 1e-3, far below the Monte-Carlo noise floor) are
    # rejected and redrawn within the same ranges
    start = time.time()
    rng = np.random.default_rng(2024)
    worst = 0.0
    pairs = 0
    k = 0
    while pairs < 50:
        q = int(rng.integers(1, 5))
        mu = rng.uniform(-2.0, 2.0, size=q)
        sigma = rng.uniform(0.5, 2.0, size=q)
        closed = vae.kl_gaussian(vae.LatentGaussian(mu, sigma))
        k += 1
        if closed < 0.05:
            continue
        mc = mc_kl_estimate(mu, sigma, n_draws=1_000_000, seed=3000 + k)
        rel = abs(closed - mc) / abs(mc)
        worst = max(worst, rel)
        assert rel < 0.01
        pairs += 1
    elapsed = time.time() - start
    assert elapsed < 30.0
    report(1, f"50 pairs, worst rel err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. analytic gradients vs central finite differences


def test_criterion_02_gradient_check():
    start = time.time()
    arch = vae.VaeArch(input_dim=4, hidden=(6,), latent_dim=2)
    h = 1e-5
    worst = 0.0
    for seed in range(20):
        params = vae.init_params(arch, seed=seed)
        rng = np.random.default_rng(500 + seed)
        batch = rng.standard_normal((8, 4))
        eps = rng.standard_normal((8, 2))
        analytic = vae.grad(params, batch, eps, 3.0).flatten()
        flat = params.flatten()
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            up = flat.copy()
            up[i] += h
            dn = flat.copy()
            dn[i] -= h
            lu, _, _ = vae.elbo_loss(params.with_flat(up), batch, eps, 3.0)
            ld, _, _ = vae.elbo_loss(params.with_flat(dn), batch, eps, 3.0)
            numeric[i] = (lu - ld) / (2.0 * h)
        rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8)
        worst = max(worst, float(rel.max()))
        assert rel.max() < 1e-4
    elapsed = time.time() - start
    assert elapsed < 10.0
    report(2, f"20 seeds, worst rel err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. generative fidelity on a known joint distribution


def test_criterion_03_generative_fidelity():
    start = time.time()
    n_assets = 5
    rho = 0.6
    cov = np.full((n_assets, n_assets), rho)
    np.fill_diagonal(cov, 1.0)
    data = np.random.default_rng(50).multivariate_normal(
        np.zeros(n_assets), cov, size=4000)

    arch = vae.VaeArch(input_dim=n_assets, hidden=(32, 32), latent_dim=4)
    params = vae.init_params(arch, seed=3)
    cfg = vae.TrainConfig(epochs=800, batch_size=32, learning_rate=3e-3,
                          optimizer="adam", recon_coefficient=30.0, seed=4)
    trained, _ = vae.train(params, data, cfg)
    sample = vae.sample_standardized(trained, 20_000, seed=5)

    corr = np.corrcoef(sample, rowvar=False)
    off = corr[np.triu_indices(n_assets, 1)]
    max_err = float(np.abs(off - rho).max())
    assert max_err < 0.1

    rep = rmt.eigh(corr)
    true_factor = np.ones(n_assets) / np.sqrt(n_assets)
    overlap = float(abs(rep.eigenvectors[:, 0] @ true_factor))
    assert overlap > 0.8
    elapsed = time.time() - start
    assert elapsed < 300.0
    report(3, f"max corr err {max_err:.3f} (tol 0.1), top-eigenvector overlap "
              f"{overlap:.3f} (floor 0.8), {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 4. Marchenko-Pastur noise recovery and planted-signal detection


def test_criterion_04_mp_recovery():
    start = time.time()
    t_obs, n = 4000, 400
    noise = np.random.default_rng(10).standard_normal((t_obs, n))
    rep = rmt.eigen_report(noise)
    fit = rmt.fit_mp_sigma2(rep.eigenvalues, t_obs=t_obs, n=n)
    assert fit.sigma2 == pytest.approx(1.0, abs=0.05)
    inside = float(np.mean((rep.eigenvalues >= fit.lambda_minus - 0.05)
                           & (rep.eigenvalues <= fit.lambda_plus + 0.05)))
    assert inside >= 0.99

    rng = np.random.default_rng(11)
    f = rng.standard_normal(t_obs)
    weight = 0.10
    planted = np.sqrt(weight) * f[:, None] \
        + np.sqrt(1.0 - weight) * rng.standard_normal((t_obs, n))
    rep_p = rmt.eigen_report(planted)
    fit_p = rmt.fit_mp_sigma2(rep_p.eigenvalues, t_obs=t_obs, n=n)
    spike_ratio = float(rep_p.eigenvalues[0] / fit_p.lambda_plus)
    assert fit_p.signal_count >= 1
    assert rep_p.eigenvalues[0] > fit_p.lambda_plus
    elapsed = time.time() - start
    assert elapsed < 60.0
    report(4, f"noise sigma2 {fit.sigma2:.3f} (1 +/- 0.05), {inside:.1%} inside "
              f"support; spike at {spike_ratio:.0f}x the bulk edge, "
              f"signal_count {fit_p.signal_count}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 5. violation-rate calibration of five models on simulated GARCH data


def test_criterion_05_coverage_calibration():
    start = time.time()
    n_assets = 4
    vbar = 0.013 ** 2
    a_g, b_g, rho = 0.03, 0.85, 0.85
    total_days = 7250
    values = simulate_common_factor_garch(vbar * (1 - a_g - b_g), a_g, b_g,
                                          total_days, n_assets, rho, seed=27)
    panel = md.ReturnPanel(dates=np.arange(total_days),
                           assets=tuple(f"A{i}" for i in range(n_assets)),
                           returns=values)
    stats = md.ewma_stats(panel, window=250, decay=0.94)
    std = md.standardize(panel, stats)
    weights = md.Weights.equal(n_assets)
    portfolio = md.portfolio_return(panel, weights)[250:]
    test_start = std.values.shape[0] - 5000

    arch = vae.VaeArch(input_dim=n_assets, hidden=(32, 32), latent_dim=3)
    stage1 = vae.TrainConfig(epochs=600, batch_size=32, learning_rate=3e-3,
                             optimizer="adam", recon_coefficient=30.0, seed=2)
    stage2 = vae.TrainConfig(epochs=300, batch_size=32, learning_rate=5e-4,
                             optimizer="adam", recon_coefficient=30.0, seed=3)
    mid, _ = vae.train(vae.init_params(arch, seed=1),
                       std.values[:test_start], stage1)
    trained, _ = vae.train(mid, std.values[:test_start], stage2)

    fc = vm.VarForecaster(portfolio, stats.dates, test_start=test_start,
                          window=500, n_paths=10_000, garch_restarts=3,
                          caviar_restarts=5, fit_seed=3, mc_seed=4,
                          vae_params=trained, stats=stats, weights=weights,
                          n_samples=10_000, sample_seed=5)
    realized = fc.test_returns
    lines = []
    for alpha in (0.05, 0.01):
        lo, hi = binomial_band(5000, alpha)
        for model in ("historical", "variance_covariance", "riskmetrics",
                      "garch", "encoded"):
            series = fc.forecast(model, alpha)
            rate = float(np.mean(realized < series.var_values))
            assert lo <= rate <= hi, (
                f"{model} at alpha={alpha}: rate {rate:.4f} outside "
                f"[{lo:.4f}, {hi:.4f}]")
            lines.append(f"{model}@{alpha:g}={rate:.4f}")
    elapsed = time.time() - start
    assert elapsed < 600.0
    report(5, f"all rates in 99% bands: {', '.join(lines)}; {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 6. GARCH parameter recovery


def test_criterion_06_garch_recovery():
    start = time.time()
    vbar = 0.013 ** 2
    omega, a_true, b_true = 0.05 * vbar, 0.10, 0.85
    errs = []
    for seed in range(10):
        r = simulate_garch(omega, a_true, b_true, 20_000, seed=seed)
        p = vm.garch_fit(r, 1, 1, restarts=5, seed=seed)
        errs.append([abs(p.omega - omega), abs(p.alpha_coefs[0] - a_true),
                     abs(p.beta_coefs[0] - b_true)])
    med = np.median(np.array(errs), axis=0)
    assert med[0] < 0.05
    assert med[1] < 0.05
    assert med[2] < 0.05
    elapsed = time.time() - start
    assert elapsed < 120.0
    report(6, f"median abs errors omega {med[0]:.2e}, alpha {med[1]:.4f}, "
              f"beta {med[2]:.4f} (tol 0.05), {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 7. CAViaR tick-loss fit quality


def test_criterion_07_caviar_tick_loss():
    start = time.time()
    vbar = 0.013 ** 2
    r = simulate_garch(0.05 * vbar, 0.08, 0.88, 5000, seed=11)
    theta = 0.05
    params = vm.caviar_fit(r, "symmetric", theta, restarts=10, seed=3)
    path = vm.caviar_recursion("symmetric", params.beta, r, params.var0)
    hit = float(np.mean(r < path))
    assert abs(hit - theta) < 0.015
    baseline = vm.tick_loss(r, np.full_like(r, np.quantile(r, theta)), theta)
    assert params.tick_loss <= baseline + 1e-15
    elapsed = time.time() - start
    assert elapsed < 300.0
    report(7, f"in-sample hit rate {hit:.4f} (target 0.05 +/- 0.015), tick "
              f"loss {params.tick_loss:.6f} <= baseline {baseline:.6f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 8. cluster penalization measure vs brute force


def test_criterion_08_sener_oracle():
    start = time.time()
    rng = np.random.default_rng(777)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 51))
        r = rng.normal(0, 0.01, n)
        v = np.quantile(r, 0.05) + rng.normal(0, 0.002, n)
        s = bt.AlignedSeries(dates=np.arange(n), returns=r, var_values=v,
                             alpha=0.05)
        got = np.array(bt.sener_pm(s))
        want = np.array(sener_reference(r, v, 0.05))
        worst = max(worst, float(np.abs(got - want).max()))
        assert np.all(np.abs(got - want) < 1e-12)
    ratios = bt.pm_ratio([0.2, 0.5, 0.3])
    assert ratios.sum() == pytest.approx(1.0, abs=1e-15)
    elapsed = time.time() - start
    assert elapsed < 10.0
    report(8, f"1000 sequences, worst abs diff {worst:.2e} (< 1e-12); "
              f"ratios sum to 1; {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 9. hand-computed single-day loss values


def test_criterion_09_loss_hand_values():
    start = time.time()

    def one_day(r, v, alpha=0.05):
        return bt.AlignedSeries(dates=[0], returns=[r], var_values=[v],
                                alpha=alpha)

    assert bt.lopez_rql(one_day(-0.05, -0.03)) == pytest.approx(1.0004)
    assert bt.linear_loss(one_day(0.01, -0.03)) == pytest.approx(0.04)
    assert bt.quadratic_loss(one_day(0.01, -0.03)) == pytest.approx(0.0016)
    assert bt.sarma_loss(one_day(-0.05, -0.03), beta=0.01) == pytest.approx(0.0004)
    assert bt.sarma_loss(one_day(0.01, -0.03), beta=0.01) == pytest.approx(0.0003)
    assert bt.angelidis_quantile_loss(one_day(-0.02, -0.04, alpha=0.25)) \
        == pytest.approx(0.0004)
    cl1, cl2, cl3 = bt.caporin_losses(one_day(-0.04, -0.02))
    assert cl2 == pytest.approx(0.02)
    assert cl3 == pytest.approx(0.02)
    assert cl1 == pytest.approx(1.0)   # |1 - |-0.04 / -0.02|| = 1
    elapsed = time.time() - start
    assert elapsed < 1.0
    report(9, f"lopez/linear/quadratic/sarma/quantile/caporin hand values "
              f"reproduced exactly, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 10. full-pipeline determinism and runtime


def test_criterion_10_pipeline_determinism(tmp_path):
    start = time.time()
    prices = tmp_path / "prices.csv"
    write_price_csv(prices, n_days=3000, n_assets=100, seed=404)

    def config_for(out_dir):
        doc = {
            "prices_csv": str(prices),
            "out_dir": str(out_dir),
            "window": 250,
            "rolling_window": 250,
            "hidden": [64],
            "latent_dim": 10,
            "epochs": 40,
            "batch_size": 64,
            "learning_rate": 3e-3,
            "optimizer": "adam",
            "alphas": [0.05, 0.01],
            "n_samples": 10_000,
            "n_paths": 10_000,
            "garch_restarts": 3,
            "caviar_restarts": 5,
        }
        path = tmp_path / f"config_{Path(out_dir).name}.json"
        path.write_text(json.dumps(doc))
        return path

    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["all", "--config", str(config_for(out_a))]) == 0
    first_run = time.time() - start
    assert first_run < 900.0, f"pipeline took {first_run:.0f}s"
    assert cli.main(["all", "--config", str(config_for(out_b))]) == 0

    n_models = len(vm.MODEL_TAGS)
    forecasts_a = sorted((out_a / "forecasts").glob("*.csv"))
    assert len(forecasts_a) == n_models * 2
    mismatches = []
    for sub in ("forecasts", "reports"):
        for pa in sorted((out_a / sub).glob("*")):
            pb = out_b / sub / pa.name
            if pa.read_bytes() != pb.read_bytes():
                mismatches.append(str(pa.name))
    assert not mismatches, f"non-identical artifacts: {mismatches}"
    elapsed = time.time() - start
    report(10, f"12 models x 2 alphas on 100 assets x 3000 days: run one "
               f"{first_run:.0f}s (< 900s), reruns byte-identical "
               f"({len(forecasts_a)} forecast files); total {elapsed:.0f}s")
