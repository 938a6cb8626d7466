"""Per-day VaR forecast series: Encoded VaR and eleven benchmark models.

Sign convention everywhere: VaR is the signed alpha-quantile of the
return distribution (negative in practice), and a violation is a day
with realized return strictly below the VaR value.

All fitting routines are deterministic given their seed: random
restarts come from ``np.random.default_rng`` and the simplex searches
use scipy's Nelder-Mead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.stats import norm

from encvar import vae as vae_mod
from encvar.market_data import RollingStats, Weights

MODEL_TAGS = (
    "historical", "mc_gbm", "variance_covariance", "garch", "egarch",
    "riskmetrics", "fhs", "caviar_symmetric", "caviar_garch",
    "caviar_adaptive", "caviar_asymmetric", "encoded",
)

CAVIAR_VARIANTS = ("symmetric", "garch", "adaptive", "asymmetric")

RISKMETRICS_DECAY = 0.94
RISKMETRICS_INIT_DAYS = 50
CAVIAR_INIT_DAYS = 300

_BIG = 1e10


@dataclass(frozen=True)
class VarSeries:
    """Per-day VaR forecasts at one confidence level."""

    dates: np.ndarray
    var_values: np.ndarray
    alpha: float
    model: str

    def __post_init__(self):
        dates = np.asarray(self.dates)
        values = np.asarray(self.var_values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise ValueError("dates and var_values must be matching 1-D arrays")
        if not np.all(np.isfinite(values)):
            raise ValueError("VaR values contain non-finite entries")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "var_values", values)

    def __len__(self) -> int:
        return len(self.dates)

    def tail(self, n: int) -> "VarSeries":
        return VarSeries(self.dates[-n:], self.var_values[-n:], self.alpha, self.model)


@dataclass(frozen=True)
class GarchParams:
    """GARCH(p, q) coefficients; stationary unless ``integrated`` is set."""

    omega: float
    alpha_coefs: tuple[float, ...]
    beta_coefs: tuple[float, ...]
    integrated: bool = False
    loglik: float = float("nan")
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha_coefs", tuple(float(a) for a in self.alpha_coefs))
        object.__setattr__(self, "beta_coefs", tuple(float(b) for b in self.beta_coefs))
        if not self.omega > 0.0:
            raise ValueError("omega must be > 0")
        if any(a < 0.0 for a in self.alpha_coefs) or any(b < 0.0 for b in self.beta_coefs):
            raise ValueError("alpha/beta coefficients must be >= 0")
        persistence = sum(self.alpha_coefs) + sum(self.beta_coefs)
        limit = 1.0 + 1e-12 if self.integrated else 1.0
        if persistence >= limit:
            raise ValueError(f"persistence {persistence:.6f} violates stationarity")

    @property
    def p(self) -> int:
        return len(self.beta_coefs)

    @property
    def q(self) -> int:
        return len(self.alpha_coefs)


@dataclass(frozen=True)
class EgarchParams:
    """EGARCH coefficients: log-variance AR terms ``alpha_coefs`` and
    news-impact terms ``beta_coefs`` applied to
    g(Z) = theta * Z + lam * (|Z| - E|Z|), E|Z| = sqrt(2/pi)."""

    omega: float
    beta_coefs: tuple[float, ...]
    alpha_coefs: tuple[float, ...]
    theta: float
    lam: float
    loglik: float = float("nan")
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alpha_coefs", tuple(float(a) for a in self.alpha_coefs))
        object.__setattr__(self, "beta_coefs", tuple(float(b) for b in self.beta_coefs))
        vals = (self.omega, self.theta, self.lam, *self.alpha_coefs, *self.beta_coefs)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("non-finite EGARCH parameters")
        if abs(sum(self.alpha_coefs)) >= 1.0:
            raise ValueError("log-variance persistence must satisfy |sum alpha| < 1")


@dataclass(frozen=True)
class CaviarParams:
    """Fitted coefficients of one CAViaR recursion variant."""

    variant: str
    beta: tuple[float, ...]
    var0: float = float("nan")
    tick_loss: float = float("nan")

    def __post_init__(self):
        if self.variant not in CAVIAR_VARIANTS:
            raise ValueError(f"unknown CAViaR variant {self.variant!r}")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if not all(np.isfinite(b) for b in self.beta):
            raise ValueError("non-finite CAViaR coefficients")
        expected = {"symmetric": 3, "garch": 3, "adaptive": 3, "asymmetric": 4}
        if len(self.beta) != expected[self.variant]:
            raise ValueError(f"{self.variant} CAViaR needs {expected[self.variant]} coefficients")


# ---------------------------------------------------------------------------
# single-day estimators


def historical_var(window, alpha: float) -> float:
    """Empirical alpha-quantile of the window (linear interpolation).

    Windows shorter than 20 observations are allowed (alpha = 0 then
    simply returns the minimum) but draw a warning: the tail estimate
    is meaningless on a handful of points.
    """
    w = np.asarray(window, dtype=float).ravel()
    if w.size == 0:
        raise ValueError("empty estimation window")
    if w.size < 20:
        warnings.warn(f"historical VaR from only {w.size} observations")
    if not 0.0 <= alpha < 0.5:
        raise ValueError("alpha must lie in [0, 0.5)")
    return float(np.quantile(w, alpha))


def mc_gbm_var(window, alpha: float, n_paths: int = 10000, seed=0) -> float:
    """Monte-Carlo VaR under a geometric Brownian motion for the price.

    The window's sample mean m and std s identify the diffusion: the
    drift is m + s^2/2, so simulated one-day log returns are m + s * Z.
    Returns the empirical alpha-quantile of the simulated paths.
    """
    w = np.asarray(window, dtype=float).ravel()
    if w.size < 20:
        raise ValueError("estimation window must hold at least 20 returns")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    if n_paths < 1:
        raise ValueError("need at least one path")
    m = float(w.mean())
    s = float(w.std(ddof=1))
    sims = m + s * np.random.default_rng(seed).standard_normal(n_paths)
    return float(np.quantile(sims, alpha))


def variance_covariance_var(sigma_t: float, alpha: float) -> float:
    """Gaussian VaR: inverse-normal quantile times the volatility."""
    if not sigma_t > 0.0:
        raise ValueError("sigma_t must be > 0")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return float(norm.ppf(alpha) * sigma_t)


# ---------------------------------------------------------------------------
# GARCH


def garch_variance_series(params: GarchParams, series, sigma2_0: float | None = None) -> np.ndarray:
    """One-step-ahead conditional variances along ``series``.

    sigma2[t] uses returns through t-1; the first max(p, q) entries are
    pinned at ``sigma2_0`` (sample variance of the series by default).
    """
    r = np.asarray(series, dtype=float).ravel()
    if sigma2_0 is None:
        sigma2_0 = float(r.var(ddof=1))
    if not sigma2_0 > 0.0:
        raise ValueError("initial variance must be > 0")
    p, q = params.p, params.q
    t_len = len(r)
    m = max(p, q)
    if p == 1 and q == 1 and t_len > 1:
        a1, b1 = params.alpha_coefs[0], params.beta_coefs[0]
        drive = params.omega + a1 * r[:-1] ** 2
        out, _ = lfilter([1.0], [1.0, -b1], drive, zi=np.array([b1 * sigma2_0]))
        return np.concatenate(([sigma2_0], out))
    sig2 = np.full(t_len, sigma2_0)
    for t in range(m, t_len):
        acc = params.omega
        for i, a in enumerate(params.alpha_coefs, start=1):
            acc += a * r[t - i] ** 2
        for j, b in enumerate(params.beta_coefs, start=1):
            acc += b * sig2[t - j]
        sig2[t] = acc
    return sig2


def garch_loglik(params: GarchParams, series, sigma2_0: float | None = None) -> float:
    """Gaussian quasi log-likelihood under the variance recursion."""
    r = np.asarray(series, dtype=float).ravel()
    sig2 = garch_variance_series(params, r, sigma2_0)
    m = max(params.p, params.q)
    rr, ss = r[m:], sig2[m:]
    return float(np.sum(-0.5 * (np.log(2.0 * np.pi) + np.log(ss) + rr ** 2 / ss)))


def _garch_from_theta(theta: np.ndarray, p: int, q: int) -> GarchParams | None:
    """Map the unconstrained simplex point to valid GARCH coefficients."""
    with np.errstate(over="ignore"):
        omega = float(np.exp(theta[0]))
        rho = 1.0 / (1.0 + np.exp(-theta[1]))
        logits = np.concatenate([theta[2:], [0.0]])
        logits = logits - logits.max()
        shares = np.exp(logits)
        shares /= shares.sum()
    if not np.isfinite(omega) or omega <= 0.0:
        return None
    alphas = tuple(rho * shares[:q])
    betas = tuple(rho * shares[q:])
    try:
        return GarchParams(omega=omega, alpha_coefs=alphas, beta_coefs=betas)
    except ValueError:
        return None


GARCH_LL_TIE_TOL = 2.0


def garch_fit(series, p: int = 1, q: int = 1, restarts: int = 5, seed=0) -> GarchParams:
    """Quasi-maximum-likelihood GARCH(p, q) fit via multi-start Nelder-Mead.

    The search runs in a transformed space that enforces omega > 0,
    non-negative coefficients and persistence < 1.  On data with no
    conditional heteroskedasticity the likelihood has an exact ridge
    (alpha = 0 leaves beta unidentified), so a constant-variance
    candidate enters the comparison and candidates within an AIC-style
    margin of the best likelihood are tie-broken toward the lowest
    persistence.  Non-convergence is reported with a warning and the
    best point found is returned.
    """
    r = np.asarray(series, dtype=float).ravel()
    if len(r) < 500:
        raise ValueError("GARCH estimation needs at least 500 observations")
    if p < 1 or q < 1:
        raise ValueError("p and q must be >= 1")
    v_bar = float(r.var(ddof=1))
    if not v_bar > 0.0:
        raise ValueError("series has zero variance")

    def objective(theta):
        cand = _garch_from_theta(theta, p, q)
        if cand is None:
            return _BIG
        ll = garch_loglik(cand, r, sigma2_0=v_bar)
        return -ll if np.isfinite(ll) else _BIG

    def start_point(rho):
        theta = np.zeros(2 + p + q - 1)
        theta[0] = np.log((1.0 - rho) * v_bar)
        theta[1] = np.log(rho / (1.0 - rho))
        theta[2:] = np.log((0.05 / q) / (0.90 / p))
        return theta

    rng = np.random.default_rng(seed)
    starts = [start_point(0.95), start_point(0.10)]
    while len(starts) < max(2, restarts):
        starts.append(starts[0] + rng.normal(0.0, 0.8, size=starts[0].shape))

    results, any_ok = [], False
    for start in starts:
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 4000})
        any_ok = any_ok or bool(res.success)
        cand = _garch_from_theta(res.x, p, q)
        if cand is not None and res.fun < _BIG:
            results.append((float(res.fun), cand))
    if not results:
        raise RuntimeError("GARCH optimization failed to find a feasible point")
    # constant-variance candidate at its own likelihood maximum
    flat = GarchParams(omega=float(np.mean(r[max(p, q):] ** 2)),
                       alpha_coefs=(0.0,) * q, beta_coefs=(0.0,) * p)
    results.append((-garch_loglik(flat, r, sigma2_0=v_bar), flat))
    best_val = min(v for v, _ in results)
    tied = [(v, c) for v, c in results if v <= best_val + GARCH_LL_TIE_TOL]
    chosen_val, params = min(
        tied, key=lambda vc: sum(vc[1].alpha_coefs) + sum(vc[1].beta_coefs))
    if not any_ok:
        warnings.warn("GARCH optimizer did not converge; returning best point found")
    return GarchParams(omega=params.omega, alpha_coefs=params.alpha_coefs,
                       beta_coefs=params.beta_coefs, loglik=-chosen_val,
                       converged=any_ok)


def garch_var(params: GarchParams, series, alpha: float,
              sigma2_0: float | None = None, dates=None) -> VarSeries:
    """Roll the variance recursion along ``series``; VaR_t = ppf(alpha) * sigma_t."""
    r = np.asarray(series, dtype=float).ravel()
    sig2 = garch_variance_series(params, r, sigma2_0)
    values = norm.ppf(alpha) * np.sqrt(sig2)
    dates = np.arange(len(r)) if dates is None else np.asarray(dates)
    return VarSeries(dates=dates, var_values=values, alpha=alpha, model="garch")


# ---------------------------------------------------------------------------
# EGARCH


_LOGVAR_BOUND = 100.0  # |log sigma^2| beyond this marks a diverged recursion


def egarch_logvar_series(params: EgarchParams, series, logvar0: float | None = None) -> np.ndarray:
    """log sigma^2 recursion driven by standardized innovations.

    Diverging paths (|log sigma^2| beyond a wide bound) are returned
    with NaN tails so the likelihood can reject the parameter point.
    """
    r = np.asarray(series, dtype=float).ravel()
    if logvar0 is None:
        v = float(r.var(ddof=1))
        if not v > 0.0:
            raise ValueError("series has zero variance")
        logvar0 = float(np.log(v))
    p, q = len(params.alpha_coefs), len(params.beta_coefs)
    e_abs = math.sqrt(2.0 / math.pi)
    n = len(r)
    if p == 1 and q == 1:
        om, a1, b1 = params.omega, params.alpha_coefs[0], params.beta_coefs[0]
        th, lam = params.theta, params.lam
        rl = r.tolist()
        h = [logvar0] * n
        hp = logvar0
        for t in range(1, n):
            z = rl[t - 1] * math.exp(-0.5 * hp)
            hp = om + a1 * hp + b1 * (th * z + lam * (abs(z) - e_abs))
            if not -_LOGVAR_BOUND < hp < _LOGVAR_BOUND:
                h[t:] = [math.nan] * (n - t)
                return np.asarray(h)
            h[t] = hp
        return np.asarray(h)
    m = max(p, q)
    h = np.full(n, logvar0)
    th, lam = params.theta, params.lam
    for t in range(m, n):
        acc = params.omega
        for k, b in enumerate(params.beta_coefs, start=1):
            z = r[t - k] * math.exp(-0.5 * h[t - k])
            acc += b * (th * z + lam * (abs(z) - e_abs))
        for k, a in enumerate(params.alpha_coefs, start=1):
            acc += a * h[t - k]
        if not -_LOGVAR_BOUND < acc < _LOGVAR_BOUND:
            h[t:] = np.nan
            return h
        h[t] = acc
    return h


def egarch_loglik(params: EgarchParams, series, logvar0: float | None = None) -> float:
    r = np.asarray(series, dtype=float).ravel()
    h = egarch_logvar_series(params, r, logvar0)
    m = max(len(params.alpha_coefs), len(params.beta_coefs))
    rr, hh = r[m:], h[m:]
    if not np.all(np.isfinite(hh)):
        return -np.inf
    return float(np.sum(-0.5 * (np.log(2.0 * np.pi) + hh + rr ** 2 * np.exp(-hh))))


def egarch_fit(series, restarts: int = 5, seed=0) -> EgarchParams:
    """Gaussian QMLE for EGARCH(1, 1) via multi-start Nelder-Mead.

    The news scale is normalized to beta = 1 (the magnitude of the news
    impact lives in theta and lam; leaving all three free would make
    them identified only up to a common rescaling).  The log-variance
    AR coefficient is parameterized as tanh(.) to keep the recursion
    stationary.
    """
    r = np.asarray(series, dtype=float).ravel()
    if len(r) < 500:
        raise ValueError("EGARCH estimation needs at least 500 observations")
    v_bar = float(r.var(ddof=1))
    if not v_bar > 0.0:
        raise ValueError("series has zero variance")
    logv = float(np.log(v_bar))

    def from_theta(theta):
        a = float(np.tanh(theta[1]))
        return EgarchParams(omega=float(theta[0]), alpha_coefs=(a,),
                            beta_coefs=(1.0,),
                            theta=float(theta[2]), lam=float(theta[3]))

    def objective(theta):
        if not np.all(np.isfinite(theta)):
            return _BIG
        ll = egarch_loglik(from_theta(theta), r, logvar0=logv)
        return -ll if np.isfinite(ll) else _BIG

    a0 = 0.95
    base = np.array([(1.0 - a0) * logv, np.arctanh(a0), -0.02, 0.1])
    rng = np.random.default_rng(seed)
    best_theta, best_val, any_ok = None, np.inf, False
    for k in range(max(1, restarts)):
        start = base if k == 0 else base + rng.normal(0.0, 0.3, size=base.shape)
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-8, "maxiter": 4000})
        any_ok = any_ok or bool(res.success)
        if res.fun < best_val:
            best_val, best_theta = res.fun, res.x
    if best_theta is None or best_val >= _BIG:
        raise RuntimeError("EGARCH optimization failed to find a feasible point")
    if not any_ok:
        warnings.warn("EGARCH optimizer did not converge; returning best point found")
    fitted = from_theta(best_theta)
    return EgarchParams(omega=fitted.omega, alpha_coefs=fitted.alpha_coefs,
                        beta_coefs=fitted.beta_coefs, theta=fitted.theta,
                        lam=fitted.lam, loglik=-best_val, converged=any_ok)


def egarch_var(params: EgarchParams, series, alpha: float,
               logvar0: float | None = None, dates=None) -> VarSeries:
    r = np.asarray(series, dtype=float).ravel()
    h = egarch_logvar_series(params, r, logvar0)
    values = norm.ppf(alpha) * np.exp(0.5 * h)
    dates = np.arange(len(r)) if dates is None else np.asarray(dates)
    return VarSeries(dates=dates, var_values=values, alpha=alpha, model="egarch")


# ---------------------------------------------------------------------------
# RiskMetrics and filtered historical simulation


def riskmetrics_variance_series(series, lambda_: float = RISKMETRICS_DECAY,
                                init_days: int = RISKMETRICS_INIT_DAYS) -> np.ndarray:
    """IGARCH(1,1) recursion sigma2_t = lambda*sigma2_{t-1} + (1-lambda)*r_{t-1}^2."""
    r = np.asarray(series, dtype=float).ravel()
    if len(r) < init_days:
        raise ValueError(f"need at least {init_days} observations")
    s0 = float(r[:init_days].var(ddof=1))
    s0 = max(s0, 1e-16)
    drive = (1.0 - lambda_) * r[:-1] ** 2
    out, _ = lfilter([1.0], [1.0, -lambda_], drive, zi=np.array([lambda_ * s0]))
    return np.concatenate(([s0], out))


def riskmetrics_var(series, alpha: float, dates=None) -> VarSeries:
    """RiskMetrics VaR: EWMA variance with decay 0.94, Gaussian quantile."""
    sig2 = riskmetrics_variance_series(series)
    values = norm.ppf(alpha) * np.sqrt(sig2)
    dates = np.arange(len(sig2)) if dates is None else np.asarray(dates)
    return VarSeries(dates=dates, var_values=values, alpha=alpha, model="riskmetrics")


def fhs_var(series, garch: GarchParams, window: int, alpha: float,
            sigma2_0: float | None = None, dates=None) -> VarSeries:
    """Filtered historical simulation.

    Standardized residuals z_t = r_t / sigma_t come from the GARCH
    filter; for each day t >= window the VaR is the forecast sigma_t
    times the empirical alpha-quantile of the trailing ``window``
    residuals.  The output covers days window .. len(series)-1.
    """
    r = np.asarray(series, dtype=float).ravel()
    if window < 100:
        raise ValueError("FHS residual window must be >= 100")
    if len(r) <= window:
        raise ValueError("series shorter than the residual window")
    sig = np.sqrt(garch_variance_series(garch, r, sigma2_0))
    z = r / sig
    values = np.empty(len(r) - window)
    for k, t in enumerate(range(window, len(r))):
        values[k] = sig[t] * np.quantile(z[t - window:t], alpha)
    dates = np.arange(window, len(r)) if dates is None else np.asarray(dates)
    return VarSeries(dates=dates, var_values=values, alpha=alpha, model="fhs")


# ---------------------------------------------------------------------------
# CAViaR


def caviar_recursion(variant: str, beta, series, var0: float) -> np.ndarray:
    """Roll a CAViaR recursion along ``series`` starting from var0.

    Returns the per-day quantile path, or None-like (NaN) entries are
    never produced: explosive or infeasible coefficient sets raise.
    """
    x = np.asarray(series, dtype=float).ravel()
    b = np.asarray(beta, dtype=float)
    n = len(x)
    if n == 0:
        return np.empty(0)
    if variant in ("symmetric", "adaptive"):
        b1, b2, b3 = b
        drive = b1 + b3 * np.abs(x[:-1])
    elif variant == "asymmetric":
        b1, b2, b3, b4 = b
        drive = b1 + b3 * np.maximum(x[:-1], 0.0) + b4 * np.maximum(-x[:-1], 0.0)
    elif variant == "garch":
        b1, b2, b3 = b
        drive = b1 + b3 * x[:-1] ** 2
    else:
        raise ValueError(f"unknown CAViaR variant {variant!r}")
    if abs(b2) >= 1.0 + 1e-12:
        raise FloatingPointError("explosive CAViaR recursion (|beta2| >= 1)")
    if variant == "garch":
        u0 = var0 * var0
        out, _ = lfilter([1.0], [1.0, -b2], drive, zi=np.array([b2 * u0]))
        u = np.concatenate(([u0], out))
        if np.any(u < 0.0) or not np.all(np.isfinite(u)):
            raise FloatingPointError("CAViaR-GARCH recursion left the feasible region")
        return -np.sqrt(u)
    out, _ = lfilter([1.0], [1.0, -b2], drive, zi=np.array([b2 * var0]))
    q = np.concatenate(([var0], out))
    if not np.all(np.isfinite(q)):
        raise FloatingPointError("CAViaR recursion diverged")
    return q


def tick_loss(returns, quantiles, theta: float) -> float:
    """Quantile (pinball) loss averaged over days."""
    x = np.asarray(returns, dtype=float)
    q = np.asarray(quantiles, dtype=float)
    return float(np.mean((theta - (x < q)) * (x - q)))


def _caviar_objective(variant, beta, x, var0, theta):
    try:
        q = caviar_recursion(variant, beta, x, var0)
    except FloatingPointError:
        return _BIG
    return tick_loss(x, q, theta)


def caviar_fit(series, variant: str, alpha: float, restarts: int = 10, seed=0) -> CaviarParams:
    """Minimize the tick loss of the variant recursion by multi-start simplex.

    The recursion is initialized at the empirical alpha-quantile of the
    first 300 observations.  Random candidate coefficient vectors are
    screened on the loss, the best ones are polished with Nelder-Mead,
    and the best point ever evaluated is returned, so the fit never
    loses to its own starting candidates.
    """
    x = np.asarray(series, dtype=float).ravel()
    if len(x) < 1000:
        raise ValueError("CAViaR estimation needs at least 1000 observations")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    if variant not in CAVIAR_VARIANTS:
        raise ValueError(f"unknown CAViaR variant {variant!r}")
    var0 = float(np.quantile(x[:CAVIAR_INIT_DAYS], alpha))
    q_full = float(np.quantile(x, alpha))
    n_coef = 4 if variant == "asymmetric" else 3
    rng = np.random.default_rng(seed)

    if variant == "garch":
        baseline = np.array([q_full * q_full, 0.0, 0.0])
        heuristic = np.array([0.1 * q_full * q_full, 0.85, 0.3])
        pool = np.column_stack([
            rng.uniform(0.0, 4.0 * q_full * q_full, 20 * restarts),
            rng.uniform(0.0, 1.0, 20 * restarts),
            rng.uniform(0.0, 1.0, 20 * restarts),
        ])
    else:
        scale = max(abs(q_full), 1e-4)
        baseline = np.zeros(n_coef)
        baseline[0] = q_full
        heuristic = np.zeros(n_coef)
        heuristic[0], heuristic[1] = 0.1 * q_full, 0.9
        heuristic[2:] = -0.2
        pool = np.column_stack(
            [rng.normal(0.0, scale, 20 * restarts),
             rng.uniform(0.0, 1.0, 20 * restarts)]
            + [rng.normal(0.0, 0.5, 20 * restarts) for _ in range(n_coef - 2)])
    candidates = np.vstack([baseline, heuristic, pool])

    scores = np.array([_caviar_objective(variant, c, x, var0, alpha) for c in candidates])
    order = np.argsort(scores, kind="stable")
    best_beta = candidates[order[0]]
    best_val = scores[order[0]]
    improved = False
    for idx in order[:max(1, restarts)]:
        if scores[idx] >= _BIG:
            continue
        res = minimize(lambda b: _caviar_objective(variant, b, x, var0, alpha),
                       candidates[idx], method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-10, "maxiter": 3000})
        if res.fun < best_val:
            best_val, best_beta, improved = res.fun, res.x, True
    if best_val >= _BIG:
        raise RuntimeError("no feasible CAViaR coefficients found")
    if not improved:
        warnings.warn("CAViaR polish did not improve on the initial candidates")
    return CaviarParams(variant=variant, beta=tuple(best_beta),
                        var0=var0, tick_loss=float(best_val))


def caviar_var(params: CaviarParams, series, var0: float | None = None,
               alpha: float = 0.05, dates=None) -> VarSeries:
    """Roll the fitted recursion through ``series`` with realized returns."""
    x = np.asarray(series, dtype=float).ravel()
    if var0 is None:
        var0 = params.var0 if np.isfinite(params.var0) else float(
            np.quantile(x[:min(CAVIAR_INIT_DAYS, len(x))], alpha))
    values = caviar_recursion(params.variant, params.beta, x, var0)
    dates = np.arange(len(x)) if dates is None else np.asarray(dates)
    return VarSeries(dates=dates, var_values=values, alpha=alpha,
                     model=f"caviar_{params.variant}")


# ---------------------------------------------------------------------------
# Encoded VaR


def encoded_var(vae_params, stats: RollingStats, weights: Weights, test_dates,
                alpha: float, n_samples: int = 10000, seed=0) -> VarSeries:
    """Scenario-based VaR from the trained generator.

    For every test day: draw ``n_samples`` standardized return vectors
    from the decoder, rescale them with that day's rolling mean/std,
    aggregate into portfolio returns and take the empirical
    alpha-quantile.  Day i uses the child seed [seed, i].
    """
    test_dates = np.asarray(test_dates)
    if n_samples < 1:
        raise ValueError("need at least one scenario per day")
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    rows = stats.row_for_dates(test_dates)
    values = np.empty(len(test_dates))
    for i, row in enumerate(rows):
        scen = vae_mod.sample_standardized(vae_params, n_samples, [seed, i])
        rets = stats.sigma[row] * scen + stats.mu[row]
        values[i] = np.quantile(rets @ weights.omega, alpha)
    return VarSeries(dates=test_dates, var_values=values, alpha=alpha, model="encoded")


# ---------------------------------------------------------------------------
# rolling forecast orchestration


class VarForecaster:
    """Fit every model once on the training split and roll forecasts
    through the test split.

    Builds one VarSeries per (model tag, alpha) over the days
    ``dates[test_start:]``.  Fits are cached, so repeated calls at
    different alpha levels reuse the GARCH/EGARCH estimates (CAViaR is
    refit per alpha because its objective depends on the level).
    """

    def __init__(self, portfolio, dates, test_start: int, *, window: int = 250,
                 n_paths: int = 10000, garch_restarts: int = 5,
                 caviar_restarts: int = 10, fit_seed=0, mc_seed=0,
                 vae_params=None, stats: RollingStats | None = None,
                 weights: Weights | None = None, n_samples: int = 10000,
                 sample_seed=0):
        self.r = np.asarray(portfolio, dtype=float).ravel()
        self.dates = np.asarray(dates)
        if self.dates.shape != self.r.shape:
            raise ValueError("dates and portfolio series must align")
        if not 0 < test_start < len(self.r):
            raise ValueError("test_start out of range")
        if window > test_start:
            raise ValueError("rolling window longer than the pre-test history")
        self.test_start = test_start
        self.window = window
        self.n_paths = n_paths
        self.garch_restarts = garch_restarts
        self.caviar_restarts = caviar_restarts
        self.fit_seed = fit_seed
        self.mc_seed = mc_seed
        self.vae_params = vae_params
        self.stats = stats
        self.weights = weights
        self.n_samples = n_samples
        self.sample_seed = sample_seed
        self._fits: dict = {}

    @property
    def test_dates(self) -> np.ndarray:
        return self.dates[self.test_start:]

    @property
    def test_returns(self) -> np.ndarray:
        return self.r[self.test_start:]

    def _train(self) -> np.ndarray:
        return self.r[: self.test_start]

    def garch_params(self) -> GarchParams:
        if "garch" not in self._fits:
            self._fits["garch"] = garch_fit(self._train(), 1, 1,
                                            restarts=self.garch_restarts,
                                            seed=self.fit_seed)
        return self._fits["garch"]

    def egarch_params(self) -> EgarchParams:
        if "egarch" not in self._fits:
            self._fits["egarch"] = egarch_fit(self._train(),
                                              restarts=self.garch_restarts,
                                              seed=self.fit_seed)
        return self._fits["egarch"]

    def caviar_params(self, variant: str, alpha: float) -> CaviarParams:
        key = ("caviar", variant, alpha)
        if key not in self._fits:
            self._fits[key] = caviar_fit(self._train(), variant, alpha,
                                         restarts=self.caviar_restarts,
                                         seed=self.fit_seed)
        return self._fits[key]

    def forecast(self, model: str, alpha: float) -> VarSeries:
        if model not in MODEL_TAGS:
            raise ValueError(f"unknown model tag {model!r}")
        n_test = len(self.r) - self.test_start
        ts, w = self.test_start, self.window
        if model == "historical":
            values = np.array([historical_var(self.r[t - w:t], alpha)
                               for t in range(ts, len(self.r))])
            return VarSeries(self.test_dates, values, alpha, model)
        if model == "mc_gbm":
            values = np.array([
                mc_gbm_var(self.r[t - w:t], alpha, self.n_paths, seed=[self.mc_seed, t])
                for t in range(ts, len(self.r))])
            return VarSeries(self.test_dates, values, alpha, model)
        if model == "variance_covariance":
            wins = np.lib.stride_tricks.sliding_window_view(self.r, w)
            sig = wins[ts - w: len(self.r) - w].std(ddof=1, axis=1)
            return VarSeries(self.test_dates, norm.ppf(alpha) * sig, alpha, model)
        if model == "garch":
            vs = garch_var(self.garch_params(), self.r, alpha,
                           sigma2_0=float(self._train().var(ddof=1)), dates=self.dates)
            return vs.tail(n_test)
        if model == "egarch":
            vs = egarch_var(self.egarch_params(), self.r, alpha,
                            logvar0=float(np.log(self._train().var(ddof=1))),
                            dates=self.dates)
            return vs.tail(n_test)
        if model == "riskmetrics":
            return riskmetrics_var(self.r, alpha, dates=self.dates).tail(n_test)
        if model == "fhs":
            vs = fhs_var(self.r, self.garch_params(), self.window, alpha,
                         sigma2_0=float(self._train().var(ddof=1)),
                         dates=self.dates[self.window:])
            return vs.tail(n_test)
        if model.startswith("caviar_"):
            variant = model.removeprefix("caviar_")
            params = self.caviar_params(variant, alpha)
            vs = caviar_var(params, self.r, var0=params.var0, alpha=alpha,
                            dates=self.dates)
            return vs.tail(n_test)
        # encoded
        if self.vae_params is None or self.stats is None or self.weights is None:
            raise ValueError("encoded VaR needs vae_params, stats and weights")
        return encoded_var(self.vae_params, self.stats, self.weights,
                           self.test_dates, alpha, self.n_samples, self.sample_seed)
