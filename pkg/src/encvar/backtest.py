"""Backtest loss functions and model ranking for aligned (return, VaR) series.

A violation is a day with r_t < VaR_t (strict).  Losses are reported as
per-day means so portfolios with different test lengths stay
comparable; raw sums are kept alongside in the report.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SARMA_BETA = 0.0003

LOSS_COLUMNS = (
    "lopez", "linear", "quadratic", "sarma", "quantile",
    "caporin1", "caporin2", "caporin3", "sener_phi", "sener_psi", "sener_pm",
)


@dataclass(frozen=True)
class AlignedSeries:
    """Realized returns paired one-to-one with VaR forecasts at level alpha."""

    dates: np.ndarray
    returns: np.ndarray
    var_values: np.ndarray
    alpha: float

    def __post_init__(self):
        dates = np.asarray(self.dates)
        r = np.asarray(self.returns, dtype=float)
        v = np.asarray(self.var_values, dtype=float)
        if not (dates.shape == r.shape == v.shape) or r.ndim != 1 or r.size == 0:
            raise ValueError("dates, returns and var_values must be matching 1-D arrays")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("non-finite entries in aligned series")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "var_values", v)

    def __len__(self) -> int:
        return len(self.returns)

    @property
    def violations(self) -> np.ndarray:
        return self.returns < self.var_values


# ---------------------------------------------------------------------------
# loss functions (per-day means)


def lopez_rql(s: AlignedSeries) -> float:
    """Regulatory quadratic loss: 1 + (VaR - r)^2 on violation days, else 0."""
    hit = s.violations
    per_day = np.where(hit, 1.0 + (s.var_values - s.returns) ** 2, 0.0)
    return float(per_day.mean())


def linear_loss(s: AlignedSeries) -> float:
    """Mean absolute gap |r - VaR| over all days (firm loss)."""
    return float(np.abs(s.returns - s.var_values).mean())


def quadratic_loss(s: AlignedSeries) -> float:
    """Mean squared gap (r - VaR)^2 over all days (firm loss)."""
    return float(((s.returns - s.var_values) ** 2).mean())


def sarma_loss(s: AlignedSeries, beta: float = DEFAULT_SARMA_BETA) -> float:
    """Firm loss with opportunity cost: (VaR - r)^2 on violations,
    -beta * VaR on covered days."""
    if beta < 0.0:
        raise ValueError("opportunity cost beta must be >= 0")
    hit = s.violations
    per_day = np.where(hit, (s.var_values - s.returns) ** 2, -beta * s.var_values)
    return float(per_day.mean())


def angelidis_quantile_loss(s: AlignedSeries) -> float:
    """Quantile loss against the out-of-sample alpha-percentile as the
    proxy for the target quantile: (r - VaR)^2 on violations, else
    (percentile - VaR)^2.  The percentile is computed once on the whole
    series with the package-wide quantile convention."""
    proxy = float(np.quantile(s.returns, s.alpha))
    hit = s.violations
    per_day = np.where(hit, (s.returns - s.var_values) ** 2,
                       (proxy - s.var_values) ** 2)
    return float(per_day.mean())


def caporin_losses(s: AlignedSeries) -> tuple[float, float, float]:
    """Caporin's three magnitude losses, as per-day means.

    cl1 = |1 - |r/VaR||, cl2 = (|r| - |VaR|)^2 / |VaR|, cl3 = |r - VaR|.
    Days with VaR exactly zero are skipped for cl1/cl2 (warned with a
    count); cl3 is identical to ``linear_loss`` by construction.
    """
    r, v = s.returns, s.var_values
    ok = v != 0.0
    skipped = int((~ok).sum())
    if skipped:
        warnings.warn(f"caporin cl1/cl2 skipped {skipped} day(s) with zero VaR")
    if not np.any(ok):
        raise ValueError("all VaR values are zero; cl1/cl2 undefined")
    cl1 = float(np.abs(1.0 - np.abs(r[ok] / v[ok])).mean())
    cl2 = float(((np.abs(r[ok]) - np.abs(v[ok])) ** 2 / np.abs(v[ok])).mean())
    cl3 = float(np.abs(r - v).mean())
    return cl1, cl2, cl3


# ---------------------------------------------------------------------------
# violation-cluster ranking


def _violation_clusters(hit: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of consecutive violations as (start, end) inclusive."""
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    return [(int(idx[a]), int(idx[b])) for a, b in zip(starts, ends)]


def sener_pm(s: AlignedSeries) -> tuple[float, float, float]:
    """Cluster-interaction penalization measure (phi, psi, pm).

    Violation space: each maximal run of consecutive violations i gets
    the compounded excess P_i = prod(1 + eps_t) over its days, with
    eps_t = VaR_t - r_t > 0.  Every ordered cluster pair (i, j)
    contributes (P_i * P_j - 1) / k_ij, where k_ij counts the days
    strictly between the last violation of i and the first of j (>= 1
    for separated clusters).  phi is the sum over pairs.

    Safe space: psi sums r_t - VaR_t over non-violation days with a
    negative return (the formula is applied literally, so psi is
    positive under the negative-VaR convention).

    pm = ((1 - theta) * phi + theta * psi) / T with theta = s.alpha and
    T the series length.
    """
    hit = s.violations
    eps = s.var_values - s.returns
    clusters = _violation_clusters(hit)
    prods = np.array([np.prod(1.0 + eps[a:b + 1]) for a, b in clusters])

    phi = 0.0
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            k_ij = clusters[j][0] - clusters[i][1] - 1
            phi += (prods[i] * prods[j] - 1.0) / k_ij

    safe_negative = (~hit) & (s.returns < 0.0)
    psi = float(np.sum(s.returns[safe_negative] - s.var_values[safe_negative]))

    theta = s.alpha
    pm = ((1.0 - theta) * phi + theta * psi) / len(s)
    return float(phi), psi, float(pm)


def pm_ratio(pms) -> np.ndarray:
    """Each model's share of the summed penalization measures (lowest ranks first)."""
    values = np.asarray(pms, dtype=float)
    if values.size < 2:
        raise ValueError("need at least two PM values to form ratios")
    total = float(values.sum())
    if total == 0.0:
        raise ZeroDivisionError("PM values sum to zero")
    return values / total


def violation_stats(s: AlignedSeries) -> tuple[int, float]:
    """(number of violations, violation rate)."""
    count = int(s.violations.sum())
    return count, count / len(s)


# ---------------------------------------------------------------------------
# report assembly


@dataclass
class BacktestReport:
    """Loss table for a set of models scored on the same test window."""

    alpha: float
    models: list[str]
    losses: dict[str, dict[str, float]]        # model -> loss name -> mean
    sums: dict[str, dict[str, float]]          # model -> loss name -> raw sum
    violations: dict[str, int]
    violation_rates: dict[str, float]
    pm_ratios: dict[str, float] = field(default_factory=dict)

    def to_json(self, path) -> None:
        doc = {
            "alpha": self.alpha,
            "models": self.models,
            "losses": self.losses,
            "sums": self.sums,
            "violations": self.violations,
            "violation_rates": self.violation_rates,
            "pm_ratios": self.pm_ratios,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)

    def to_csv(self, path) -> None:
        """Rows = models, columns = losses plus violation counts and PM ratio."""
        import pandas as pd

        cols = list(LOSS_COLUMNS) + ["violations", "violation_rate", "pm_ratio"]
        rows = []
        for m in self.models:
            row = {"model": m}
            row.update({c: self.losses[m][c] for c in LOSS_COLUMNS})
            row["violations"] = self.violations[m]
            row["violation_rate"] = self.violation_rates[m]
            row["pm_ratio"] = self.pm_ratios.get(m, float("nan"))
            rows.append(row)
        pd.DataFrame(rows, columns=["model"] + cols).to_csv(path, index=False)


def score_model(s: AlignedSeries, sarma_beta: float = DEFAULT_SARMA_BETA) -> dict[str, float]:
    """All loss means for one aligned series."""
    cl1, cl2, cl3 = caporin_losses(s)
    phi, psi, pm = sener_pm(s)
    return {
        "lopez": lopez_rql(s),
        "linear": linear_loss(s),
        "quadratic": quadratic_loss(s),
        "sarma": sarma_loss(s, sarma_beta),
        "quantile": angelidis_quantile_loss(s),
        "caporin1": cl1,
        "caporin2": cl2,
        "caporin3": cl3,
        "sener_phi": phi,
        "sener_psi": psi,
        "sener_pm": pm,
    }


def build_report(aligned_by_model: dict[str, AlignedSeries], alpha: float,
                 sarma_beta: float = DEFAULT_SARMA_BETA) -> BacktestReport:
    """Score every model and attach PM ratios (when there are >= 2 models)."""
    models = list(aligned_by_model)
    losses, sums, viols, rates = {}, {}, {}, {}
    for m in models:
        s = aligned_by_model[m]
        if abs(s.alpha - alpha) > 1e-12:
            raise ValueError(f"model {m} scored at alpha {s.alpha}, expected {alpha}")
        means = score_model(s, sarma_beta)
        losses[m] = means
        sums[m] = {k: v * len(s) for k, v in means.items()}
        viols[m], rates[m] = violation_stats(s)
    report = BacktestReport(alpha=alpha, models=models, losses=losses, sums=sums,
                            violations=viols, violation_rates=rates)
    if len(models) >= 2:
        pm_values = [losses[m]["sener_pm"] for m in models]
        try:
            ratios = pm_ratio(pm_values)
            report.pm_ratios = {m: float(x) for m, x in zip(models, ratios)}
        except ZeroDivisionError:
            warnings.warn("PM values sum to zero; ratios omitted")
    elif len(models) == 1:
        report.pm_ratios = {models[0]: 1.0}
    return report
