"""Price and return panels: ingestion, EWMA standardization, portfolio returns.

Conventions used throughout the package:
  * daily log return x_t = ln(P_t / P_{t-1})
  * empirical quantiles are order statistics with linear interpolation at
    h = (n - 1) * q, i.e. numpy's default ``np.quantile`` method
  * rolling statistics for day t are computed from the window
    [t - window, t - 1]; day t itself is never included
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

DEFAULT_WINDOW = 250
DEFAULT_DECAY = 0.94
DEFAULT_MISSING_CAP = 0.10
SIGMA_FLOOR = 1e-8

WEIGHT_SUM_TOL = 1e-9


class DroppedAssetsWarning(UserWarning):
    """Raised (as a warning) when the CSV loader drops assets."""


def _check_dates(dates: np.ndarray) -> np.ndarray:
    dates = np.asarray(dates)
    if dates.ndim != 1 or dates.size == 0:
        raise ValueError("dates must be a non-empty 1-D array")
    if not np.all(dates[1:] > dates[:-1]):
        raise ValueError("dates must be strictly increasing")
    return dates


@dataclass(frozen=True)
class PricePanel:
    """Date-indexed matrix of positive close prices, one column per asset."""

    dates: np.ndarray       # (T,) strictly increasing
    assets: tuple[str, ...]
    prices: np.ndarray      # (T, N) positive floats

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        prices = np.asarray(self.prices, dtype=float)
        if prices.shape != (len(self.dates), len(self.assets)):
            raise ValueError(f"prices shape {prices.shape} does not match "
                             f"{len(self.dates)} dates x {len(self.assets)} assets")
        if not np.all(np.isfinite(prices)):
            raise ValueError("prices contain non-finite entries")
        if np.any(prices <= 0.0):
            raise ValueError("prices must be strictly positive")
        object.__setattr__(self, "prices", prices)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)


@dataclass(frozen=True)
class ReturnPanel:
    """Daily log returns, same column order as the source price panel."""

    dates: np.ndarray       # (T,)
    assets: tuple[str, ...]
    returns: np.ndarray     # (T, N)

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        returns = np.asarray(self.returns, dtype=float)
        if returns.shape != (len(self.dates), len(self.assets)):
            raise ValueError("returns shape does not match dates/assets")
        if not np.all(np.isfinite(returns)):
            raise ValueError("returns contain non-finite entries")
        object.__setattr__(self, "returns", returns)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)


@dataclass(frozen=True)
class StandardizedPanel:
    """Returns standardized per asset by rolling EWMA mean/std."""

    dates: np.ndarray
    assets: tuple[str, ...]
    values: np.ndarray      # (T, N)

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.dates), len(self.assets)):
            raise ValueError("values shape does not match dates/assets")
        if not np.all(np.isfinite(values)):
            raise ValueError("standardized values contain non-finite entries")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class RollingStats:
    """Per-asset, per-day EWMA mean and standard deviation.

    Row k holds the statistics for ``dates[k]``, computed from the
    ``window`` return days strictly before it with weights proportional
    to ``decay ** age`` (age 0 = most recent day in the window).
    ``sigma`` is floored at ``sigma_floor`` so standardization never
    divides by zero on flat stretches.
    """

    dates: np.ndarray       # (K,) days the stats apply to
    mu: np.ndarray          # (K, N)
    sigma: np.ndarray       # (K, N), >= sigma_floor
    window: int
    decay: float
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "dates", _check_dates(self.dates))
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.shape != sigma.shape or mu.shape[0] != len(self.dates):
            raise ValueError("mu/sigma shapes do not match dates")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ValueError("rolling stats contain non-finite entries")
        if np.any(sigma < self.sigma_floor):
            raise ValueError("sigma below sigma_floor")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def row_for_dates(self, dates: np.ndarray) -> np.ndarray:
        """Indices of ``dates`` inside this stats block (error if missing)."""
        idx = np.searchsorted(self.dates, dates)
        bad = (idx >= len(self.dates)) | (self.dates[np.minimum(idx, len(self.dates) - 1)] != dates)
        if np.any(bad):
            missing = np.asarray(dates)[bad][:5]
            raise KeyError(f"no rolling stats for dates {missing.tolist()}")
        return idx


@dataclass(frozen=True)
class Weights:
    """Portfolio weights; must sum to one."""

    omega: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).ravel()
        if omega.size == 0 or not np.all(np.isfinite(omega)):
            raise ValueError("weights must be a non-empty finite vector")
        if abs(float(omega.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {omega.sum():.12f}, expected 1")
        object.__setattr__(self, "omega", omega)

    @classmethod
    def equal(cls, n: int) -> "Weights":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class SummaryStats:
    """Descriptive statistics of a scalar return series."""

    n: int
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    jarque_bera: float


# ---------------------------------------------------------------------------
# ingestion


def load_price_csv(path, missing_cap: float = DEFAULT_MISSING_CAP,
                   schema: dict | None = None) -> PricePanel:
    """Load a wide price CSV (``date,<ticker>,<ticker>,...``) into a PricePanel.

    Cells that are empty or non-numeric count as missing.  Assets whose
    missing fraction exceeds ``missing_cap`` are dropped with a
    DroppedAssetsWarning naming them.  Interior gaps of the surviving
    assets are forward-filled; leading days where any surviving asset has
    no price yet are discarded.

    ``schema`` may override column mapping: ``{"date": <column name>,
    "assets": [<column names to keep>]}``.  By default the first column
    is the date and every other column is an asset.
    """
    df = pd.read_csv(path)
    if df.shape[0] == 0 or df.shape[1] < 2:
        raise ValueError(f"{path}: no parseable rows/columns")
    schema = schema or {}
    date_col = schema.get("date", df.columns[0])
    asset_cols = list(schema.get("assets", [c for c in df.columns if c != date_col]))
    if not asset_cols:
        raise ValueError(f"{path}: no asset columns")

    dates = pd.to_datetime(df[date_col], format="ISO8601").to_numpy(dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    if np.any(dates[1:] == dates[:-1]):
        raise ValueError(f"{path}: duplicate dates")

    values = df[asset_cols].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)[order]
    missing_frac = np.mean(np.isnan(values), axis=0)
    keep = missing_frac <= missing_cap
    dropped = [a for a, k in zip(asset_cols, keep) if not k]
    if dropped:
        warnings.warn(f"dropped {len(dropped)} asset(s) over the "
                      f"{missing_cap:.0%} missing cap: {', '.join(dropped)}",
                      DroppedAssetsWarning, stacklevel=2)
    if not np.any(keep):
        raise ValueError(f"{path}: all assets exceed the missing cap")
    assets = [a for a, k in zip(asset_cols, keep) if k]
    values = values[:, keep]

    filled = pd.DataFrame(values).ffill().to_numpy()
    have_all = ~np.any(np.isnan(filled), axis=1)
    if not np.any(have_all):
        raise ValueError(f"{path}: no day on which every retained asset has a price")
    first = int(np.argmax(have_all))
    return PricePanel(dates=dates[first:], assets=tuple(assets), prices=filled[first:])


def save_panel_csv(panel, path) -> None:
    """Write a panel back out in the input CSV shape (date, one column per asset)."""
    matrix = panel.prices if isinstance(panel, PricePanel) else (
        panel.returns if isinstance(panel, ReturnPanel) else panel.values)
    df = pd.DataFrame(matrix, columns=list(panel.assets))
    df.insert(0, "date", panel.dates)
    df.to_csv(path, index=False)


# ---------------------------------------------------------------------------
# transforms


def log_returns(panel: PricePanel) -> ReturnPanel:
    """Daily log returns: row t is ln(P[t+1] / P[t]); one fewer row than prices."""
    if panel.n_days < 2:
        raise ValueError("need at least two price rows")
    rets = np.diff(np.log(panel.prices), axis=0)
    return ReturnPanel(dates=panel.dates[1:], assets=panel.assets, returns=rets)


def ewma_stats(panel: ReturnPanel, window: int = DEFAULT_WINDOW,
               decay: float = DEFAULT_DECAY,
               sigma_floor: float = SIGMA_FLOOR) -> RollingStats:
    """Exponentially weighted rolling mean/std for every day from ``window`` on.

    For day t the window is returns[t-window : t]; the weight of the day
    aged ``a`` (a = 0 newest) is decay**a, normalized to sum to one.  The
    weighted standard deviation is floored at ``sigma_floor``.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    if not 0.0 < decay < 1.0:
        raise ValueError("decay must lie in (0, 1)")
    t_total = panel.n_days
    if window >= t_total:
        raise ValueError(f"window {window} too large for series of length {t_total}")

    # oldest-first weights lambda^(w-1) ... lambda^0 over each window slice
    w_vec = decay ** np.arange(window - 1, -1, -1, dtype=float)
    w_vec /= w_vec.sum()
    windows = np.lib.stride_tricks.sliding_window_view(panel.returns, window, axis=0)
    windows = windows[: t_total - window]          # window k covers rows k .. k+window-1
    mu = np.einsum("knw,w->kn", windows, w_vec)
    ex2 = np.einsum("knw,knw,w->kn", windows, windows, w_vec)
    var = np.maximum(ex2 - mu * mu, 0.0)
    sigma = np.maximum(np.sqrt(var), sigma_floor)
    return RollingStats(dates=panel.dates[window:], mu=mu, sigma=sigma,
                        window=window, decay=decay, sigma_floor=sigma_floor)


def standardize(panel: ReturnPanel, stats: RollingStats) -> StandardizedPanel:
    """Per-asset z-scores (x - mu) / sigma using each day's rolling stats.

    Days before the first stats row (the warm-up window) are excluded.
    """
    if stats.mu.shape[1] != panel.n_assets:
        raise ValueError("stats asset dimension does not match panel")
    idx = np.searchsorted(panel.dates, stats.dates[0])
    sub_dates = panel.dates[idx:]
    if len(sub_dates) != len(stats.dates) or not np.array_equal(sub_dates, stats.dates):
        raise ValueError("stats dates do not align with the tail of the panel")
    values = (panel.returns[idx:] - stats.mu) / stats.sigma
    return StandardizedPanel(dates=sub_dates, assets=panel.assets, values=values)


def destandardize(panel: StandardizedPanel, stats: RollingStats) -> ReturnPanel:
    """Invert standardization: sigma * value + mu, matching stats rows by date."""
    if stats.mu.shape[1] != len(panel.assets):
        raise ValueError("stats asset dimension does not match panel")
    rows = stats.row_for_dates(panel.dates)
    rets = stats.sigma[rows] * panel.values + stats.mu[rows]
    return ReturnPanel(dates=panel.dates, assets=panel.assets, returns=rets)


def portfolio_return(panel: ReturnPanel, weights: Weights) -> np.ndarray:
    """Per-day portfolio return sum_i omega_i * x_i(t)."""
    if weights.omega.shape[0] != panel.n_assets:
        raise ValueError(f"weights length {weights.omega.shape[0]} != {panel.n_assets} assets")
    return panel.returns @ weights.omega


def describe(series: np.ndarray) -> SummaryStats:
    """Mean, std, skewness, excess kurtosis and the Jarque-Bera statistic.

    Skewness/kurtosis use population moments (the Jarque-Bera convention
    JB = n/6 * (S^2 + K_excess^2 / 4)); the reported std uses ddof=1.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 8:
        raise ValueError("series too short to describe (need >= 8 points)")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite entries")
    n = x.size
    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered ** 2))
    if np.ptp(x) == 0.0 or m2 == 0.0:
        raise ValueError("constant series: moments beyond the mean are undefined")
    skew = float(np.mean(centered ** 3) / m2 ** 1.5)
    exkurt = float(np.mean(centered ** 4) / m2 ** 2 - 3.0)
    jb = n / 6.0 * (skew ** 2 + exkurt ** 2 / 4.0)
    return SummaryStats(n=n, mean=mean, std=float(x.std(ddof=1)),
                        skewness=skew, excess_kurtosis=exkurt, jarque_bera=jb)
