"""Command-line pipeline: prepare -> train -> forecast -> backtest -> rmt.

Every command reads a JSON config (flag-overridable), writes its
artifacts under the output directory, and drops a manifest with the
config hash and library versions so reruns are byte-identical given the
same config and seeds.  ``ENCVAR_THREADS`` caps the forecast fan-out.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

import encvar
from encvar import backtest, market_data, rmt, vae, var_models

DEFAULT_SEEDS = {"init": 1, "train": 2, "sampling": 3, "mc_gbm": 4, "fit": 5}

COMMANDS = ("prepare", "train", "forecast", "backtest", "rmt", "all")


@dataclass
class RunConfig:
    """Resolved pipeline configuration (JSON file plus CLI overrides)."""

    prices_csv: str | None = None
    out_dir: str = "encvar_out"
    split: tuple[float, float, float] = (0.75, 0.125, 0.125)
    window: int = 250
    decay: float = 0.94
    dest_window: int | None = None      # destandardization window; defaults to window
    missing_cap: float = 0.10
    rolling_window: int = 250
    weights: list[float] | None = None  # None = equal weights
    hidden: tuple[int, ...] = (64,)
    latent_dim: int = 10
    activation: str = "tanh"
    recon_coefficient: float = 100.0
    batch_size: int = 64
    epochs: int = 300
    learning_rate: float = 1e-3
    optimizer: str = "sgd"
    models: tuple[str, ...] = var_models.MODEL_TAGS
    alphas: tuple[float, ...] = (0.05, 0.01)
    n_samples: int = 10000
    n_paths: int = 10000
    garch_restarts: int = 5
    caviar_restarts: int = 10
    sarma_beta: float = backtest.DEFAULT_SARMA_BETA
    n_generated: int | None = None      # generated panel rows for rmt; None = train rows
    overlap_ranks: int = 10
    seeds: dict = field(default_factory=lambda: dict(DEFAULT_SEEDS))

    def __post_init__(self):
        self.split = tuple(float(f) for f in self.split)
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must be three numbers summing to 1")
        if any(f <= 0 for f in self.split):
            raise ValueError("split fractions must be positive")
        self.models = tuple(self.models)
        for m in self.models:
            if m not in var_models.MODEL_TAGS:
                raise ValueError(f"unknown model tag {m!r}")
        self.alphas = tuple(float(a) for a in self.alphas)
        if any(not 0.0 < a < 0.5 for a in self.alphas):
            raise ValueError("alpha levels must lie in (0, 0.5)")
        self.hidden = tuple(int(h) for h in self.hidden)
        merged = dict(DEFAULT_SEEDS)
        merged.update(self.seeds or {})
        self.seeds = merged
        if any(s < 0 for s in self.seeds.values()):
            raise ValueError("seeds must be non-negative")

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        doc = {}
        if path is not None:
            with open(path) as fh:
                doc = json.load(fh)
        doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(**doc)

    def canonical(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _dirs(config: RunConfig) -> dict[str, Path]:
    out = Path(config.out_dir)
    dirs = {"out": out, "prepared": out / "prepared", "model": out / "model",
            "forecasts": out / "forecasts", "reports": out / "reports",
            "rmt": out / "rmt"}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs


def _write_manifest(config: RunConfig, command: str) -> None:
    doc = {
        "command": command,
        "config": json.loads(config.canonical()),
        "config_sha256": config.sha256(),
        "versions": {"encvar": encvar.__version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "pandas": pd.__version__},
    }
    path = Path(config.out_dir) / f"manifest_{command}.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)


def _split_indices(n_rows: int, split) -> tuple[int, int]:
    train_end = int(np.floor(split[0] * n_rows))
    val_end = int(np.floor((split[0] + split[1]) * n_rows))
    if not 0 < train_end < val_end < n_rows:
        raise ValueError(f"split {split} degenerate for {n_rows} rows")
    return train_end, val_end


def _read_panel_csv(path) -> tuple[np.ndarray, list[str], np.ndarray]:
    df = pd.read_csv(path)
    dates = pd.to_datetime(df["date"], format="ISO8601").to_numpy(dtype="datetime64[D]")
    assets = [c for c in df.columns if c != "date"]
    return dates, assets, df[assets].to_numpy(dtype=float)


def _load_prepared(config: RunConfig):
    d = _dirs(config)["prepared"]
    with open(d / "prepare_meta.json") as fh:
        meta = json.load(fh)
    dates, assets, rets = _read_panel_csv(d / "returns.csv")
    panel = market_data.ReturnPanel(dates=dates, assets=tuple(assets), returns=rets)
    s_dates, _, s_vals = _read_panel_csv(d / "standardized.csv")
    std_panel = market_data.StandardizedPanel(dates=s_dates, assets=tuple(assets),
                                              values=s_vals)

    def read_stats(prefix):
        mu_dates, _, mu = _read_panel_csv(d / f"{prefix}_mu.csv")
        _, _, sigma = _read_panel_csv(d / f"{prefix}_sigma.csv")
        return market_data.RollingStats(dates=mu_dates, mu=mu, sigma=sigma,
                                        window=meta[f"{prefix}_window"],
                                        decay=meta["decay"])

    stats = read_stats("stats")
    dest_stats = read_stats("dest_stats") if meta["dest_stats_separate"] else stats
    return meta, panel, std_panel, stats, dest_stats


def _resolve_weights(config: RunConfig, n_assets: int) -> market_data.Weights:
    if config.weights is None:
        return market_data.Weights.equal(n_assets)
    w = np.asarray(config.weights, dtype=float)
    if w.size != n_assets:
        raise ValueError(f"config has {w.size} weights for {n_assets} assets")
    return market_data.Weights(w)


# ---------------------------------------------------------------------------
# commands


def cmd_prepare(config: RunConfig) -> None:
    """Ingest prices, compute returns, rolling stats and standardized panel."""
    if config.prices_csv is None:
        raise ValueError("config needs prices_csv for prepare")
    d = _dirs(config)["prepared"]
    prices = market_data.load_price_csv(config.prices_csv, missing_cap=config.missing_cap)
    panel = market_data.log_returns(prices)
    stats = market_data.ewma_stats(panel, window=config.window, decay=config.decay)
    std_panel = market_data.standardize(panel, stats)

    dest_window = config.dest_window or config.window
    separate = dest_window != config.window
    dest_stats = market_data.ewma_stats(panel, window=dest_window,
                                        decay=config.decay) if separate else stats

    market_data.save_panel_csv(panel, d / "returns.csv")
    market_data.save_panel_csv(std_panel, d / "standardized.csv")

    def write_stats(prefix, st):
        for name, mat in (("mu", st.mu), ("sigma", st.sigma)):
            df = pd.DataFrame(mat, columns=list(panel.assets))
            df.insert(0, "date", st.dates)
            df.to_csv(d / f"{prefix}_{name}.csv", index=False)

    write_stats("stats", stats)
    if separate:
        write_stats("dest_stats", dest_stats)

    train_end, val_end = _split_indices(len(std_panel.dates), config.split)
    meta = {
        "assets": list(panel.assets),
        "stats_window": config.window,
        "dest_stats_window": dest_window,
        "dest_stats_separate": separate,
        "decay": config.decay,
        "rows": len(std_panel.dates),
        "train_end": train_end,
        "val_end": val_end,
    }
    with open(d / "prepare_meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
    _write_manifest(config, "prepare")


def cmd_train(config: RunConfig) -> None:
    """Train the generator on the train+validation rows of the standardized panel."""
    meta, _, std_panel, _, _ = _load_prepared(config)
    d = _dirs(config)["model"]
    val_end, train_end = meta["val_end"], meta["train_end"]
    rows = std_panel.values[:val_end]
    val_fraction = (val_end - train_end) / val_end
    arch = vae.VaeArch(input_dim=rows.shape[1], hidden=config.hidden,
                       latent_dim=config.latent_dim,
                       hidden_activation=config.activation)
    params = vae.init_params(arch, seed=config.seeds["init"])
    tc = vae.TrainConfig(recon_coefficient=config.recon_coefficient,
                         batch_size=config.batch_size, epochs=config.epochs,
                         learning_rate=config.learning_rate,
                         optimizer=config.optimizer, seed=config.seeds["train"],
                         validation_fraction=val_fraction)
    trained, history = vae.train(params, rows, tc)
    vae.save_params(trained, d / "vae_params.json")
    vae.history_to_csv(history, d / "history.csv")
    _write_manifest(config, "train")


def _forecast_filename(model: str, alpha: float) -> str:
    return f"{model}_alpha{alpha:g}.csv"


def var_series_to_csv(series: var_models.VarSeries, realized: np.ndarray, path) -> None:
    """Forecast CSV: date, var, realized_return, violation_flag, model, alpha."""
    realized = np.asarray(realized, dtype=float)
    pd.DataFrame({
        "date": series.dates,
        "var": series.var_values,
        "realized_return": realized,
        "violation_flag": (realized < series.var_values).astype(int),
        "model": series.model,
        "alpha": series.alpha,
    }).to_csv(path, index=False)


def cmd_forecast(config: RunConfig) -> None:
    """One VaR series CSV per requested (model, alpha)."""
    meta, panel, _, stats, dest_stats = _load_prepared(config)
    d = _dirs(config)["forecasts"]
    weights = _resolve_weights(config, panel.n_assets)
    portfolio_full = market_data.portfolio_return(panel, weights)
    offset = panel.n_days - len(stats.dates)      # warm-up rows dropped by stats
    portfolio = portfolio_full[offset:]
    val_end = meta["val_end"]

    needs_vae = "encoded" in config.models
    vae_params = vae.load_params(Path(config.out_dir) / "model" / "vae_params.json") \
        if needs_vae else None

    forecaster = var_models.VarForecaster(
        portfolio, stats.dates, test_start=val_end,
        window=config.rolling_window, n_paths=config.n_paths,
        garch_restarts=config.garch_restarts, caviar_restarts=config.caviar_restarts,
        fit_seed=config.seeds["fit"], mc_seed=config.seeds["mc_gbm"],
        vae_params=vae_params, stats=dest_stats, weights=weights,
        n_samples=config.n_samples, sample_seed=config.seeds["sampling"])

    # shared fits happen sequentially; the per-model forecasts can fan out
    if {"garch", "fhs"} & set(config.models):
        forecaster.garch_params()
    if "egarch" in config.models:
        forecaster.egarch_params()
    for m in config.models:
        if m.startswith("caviar_"):
            for a in config.alphas:
                forecaster.caviar_params(m.removeprefix("caviar_"), a)

    realized = forecaster.test_returns
    jobs = [(m, a) for m in config.models for a in config.alphas]

    def run(job):
        model, alpha = job
        series = forecaster.forecast(model, alpha)
        var_series_to_csv(series, realized, d / _forecast_filename(model, alpha))

    threads = max(1, int(os.environ.get("ENCVAR_THREADS", "1")))
    if threads == 1:
        for job in jobs:
            run(job)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, jobs))
    _write_manifest(config, "forecast")


def cmd_backtest(config: RunConfig) -> None:
    """Score the forecast files and write one loss table per alpha."""
    d = _dirs(config)
    for alpha in config.alphas:
        aligned = {}
        for model in config.models:
            path = d["forecasts"] / _forecast_filename(model, alpha)
            if not path.exists():
                raise FileNotFoundError(f"missing forecast file {path}; run forecast first")
            df = pd.read_csv(path)
            aligned[model] = backtest.AlignedSeries(
                dates=df["date"].to_numpy(), returns=df["realized_return"].to_numpy(),
                var_values=df["var"].to_numpy(), alpha=alpha)
        report = backtest.build_report(aligned, alpha, sarma_beta=config.sarma_beta)
        report.to_csv(d["reports"] / f"backtest_alpha{alpha:g}.csv")
        report.to_json(d["reports"] / f"backtest_alpha{alpha:g}.json")
    _write_manifest(config, "backtest")


def cmd_rmt(config: RunConfig) -> None:
    """Spectra, Marchenko-Pastur fits and overlap of real vs generated panels."""
    meta, _, std_panel, _, _ = _load_prepared(config)
    d = _dirs(config)["rmt"]
    val_end = meta["val_end"]
    vae_params = vae.load_params(Path(config.out_dir) / "model" / "vae_params.json")

    real = std_panel.values[:val_end]
    n_generated = config.n_generated or real.shape[0]
    generated = vae.sample_standardized(vae_params, n_generated,
                                        seed=[config.seeds["sampling"], 1 << 20])

    outputs = {}
    for tag, matrix in (("real", real), ("generated", generated)):
        report = rmt.eigen_report(matrix)
        fit = rmt.fit_mp_sigma2(report.eigenvalues, t_obs=matrix.shape[0],
                                n=matrix.shape[1])
        report.to_json(d / f"eigen_{tag}.json")
        fit.to_json(d / f"mp_{tag}.json")
        rmt.spectrum_to_csv(report, fit, d / f"spectrum_{tag}.csv")
        outputs[tag] = report

    overlap = rmt.eigenvector_overlap(outputs["real"], outputs["generated"],
                                      n_max=config.overlap_ranks)
    pd.DataFrame({
        "rank": np.arange(1, len(overlap.overlaps) + 1),
        "overlap": overlap.overlaps,
        "threshold": overlap.threshold,
    }).to_csv(d / "overlap.csv", index=False)

    # normality of the latent representation of the held-out rows; the
    # decoder consumes reparameterized draws, so those are what get tested
    test_rows = std_panel.values[val_end:]
    eps_rng = np.random.default_rng([config.seeds["sampling"], 1 << 21])
    lat = np.array([
        vae.reparameterize(vae.encode(vae_params, row),
                           eps_rng.standard_normal(vae_params.arch.latent_dim))
        for row in test_rows])
    stat, pval = rmt.henze_zirkler(lat)
    with open(d / "henze_zirkler.json", "w") as fh:
        json.dump({"statistic": stat, "p_value": pval, "rows": len(lat)},
                  fh, sort_keys=True, indent=1)
    _write_manifest(config, "rmt")


def cmd_all(config: RunConfig) -> None:
    cmd_prepare(config)
    cmd_train(config)
    cmd_forecast(config)
    cmd_backtest(config)
    cmd_rmt(config)
    _write_manifest(config, "all")


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encvar",
        description="scenario-based VaR pipeline: prepare, train, forecast, "
                    "backtest, rmt, or all of them in order")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--out", type=str, default=None, help="output directory override")
        p.add_argument("--prices", type=str, default=None, help="prices CSV override")
        p.add_argument("--alpha", type=float, action="append", default=None,
                       help="confidence level (repeatable)")
        p.add_argument("--models", type=str, default=None,
                       help="comma-separated model tags")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed; derives all named seeds")
    return parser


def config_from_args(args) -> RunConfig:
    overrides: dict = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.prices is not None:
        overrides["prices_csv"] = args.prices
    if args.alpha:
        overrides["alphas"] = tuple(args.alpha)
    if args.models is not None:
        overrides["models"] = tuple(m.strip() for m in args.models.split(",") if m.strip())
    if args.seed is not None:
        if args.seed < 0:
            raise ValueError("--seed must be non-negative")
        overrides["seeds"] = {name: args.seed + k
                              for k, name in enumerate(sorted(DEFAULT_SEEDS))}
    return RunConfig.load(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"prepare": cmd_prepare, "train": cmd_train, "forecast": cmd_forecast,
                "backtest": cmd_backtest, "rmt": cmd_rmt, "all": cmd_all}
    try:
        config = config_from_args(args)
        handlers[args.command](config)
    except Exception as exc:  # pragma: no cover - exercised via subprocess tests
        print(f"encvar {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
