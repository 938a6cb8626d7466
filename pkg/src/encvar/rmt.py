"""Random-matrix diagnostics for return panels.

Compares the eigenvalue spectrum of an empirical correlation matrix
against the Marchenko-Pastur law for pure noise, fits the noise
variance as an adjustable parameter, and measures how much of a panel's
variance lives on a given set of eigenvectors.  Includes a multivariate
normality check for latent samples.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import golden
from scipy.stats import gaussian_kde, lognorm

JACOBI_TOL_FACTOR = 1e-12
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-10

MP_GRID = (0.05, 1.0, 0.01)
MP_CURVE_POINTS = 512


@dataclass(frozen=True)
class EigenReport:
    """Full spectrum of a symmetric matrix, eigenvalues descending."""

    eigenvalues: np.ndarray    # (N,) descending
    eigenvectors: np.ndarray   # (N, N), column k pairs with eigenvalues[k]
    n_assets: int
    n_obs: int | None = None

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=float)
        v = np.asarray(self.eigenvectors, dtype=float)
        if w.ndim != 1 or v.shape != (w.size, w.size):
            raise ValueError("eigenvalues/eigenvectors shapes are inconsistent")
        if np.any(np.diff(w) > 0.0):
            raise ValueError("eigenvalues must be sorted in descending order")
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    def to_json(self, path) -> None:
        doc = {
            "n_assets": self.n_assets,
            "n_obs": self.n_obs,
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)


@dataclass(frozen=True)
class MpFit:
    """Fitted Marchenko-Pastur bulk: noise variance and support edges."""

    sigma2: float
    lambda_minus: float
    lambda_plus: float
    q: float                   # T / N
    signal_count: int

    def __post_init__(self):
        if not 0.0 < self.sigma2 <= 1.0:
            raise ValueError("sigma2 must lie in (0, 1]")
        if not self.lambda_minus <= self.lambda_plus:
            raise ValueError("support edges out of order")

    def to_json(self, path) -> None:
        doc = {
            "sigma2": self.sigma2,
            "lambda_minus": self.lambda_minus,
            "lambda_plus": self.lambda_plus,
            "q": self.q,
            "signal_count": self.signal_count,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)


@dataclass(frozen=True)
class EigenvectorOverlap:
    """Absolute same-rank dot products plus the 1/sqrt(N) noise baseline."""

    overlaps: np.ndarray
    threshold: float


# ---------------------------------------------------------------------------
# spectra


def correlation_matrix(panel) -> np.ndarray:
    """Pearson correlation of the panel columns (exact unit diagonal)."""
    x = np.asarray(getattr(panel, "returns", panel), dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("panel must be a (T, N) matrix with T >= 2")
    t_obs, n = x.shape
    if t_obs <= n:
        warnings.warn(f"correlation matrix from T={t_obs} <= N={n} observations "
                      "is rank deficient")
    if np.any(x.std(axis=0) == 0.0):
        raise ValueError("zero-variance column; correlation undefined")
    c = np.corrcoef(x, rowvar=False)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


def _offdiag_sq_norm(a: np.ndarray) -> float:
    b = a.copy()
    np.fill_diagonal(b, 0.0)
    return float(np.sum(b * b))


def eigh(matrix, n_obs: int | None = None) -> EigenReport:
    """Full spectral decomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Row-cyclic pivoting with a per-sweep threshold; stops when the
    off-diagonal Frobenius norm drops below 1e-12 * ||A|| or after 100
    sweeps.  Eigenvalues come back sorted descending with matching
    orthonormal eigenvector columns.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    asym = float(np.max(np.abs(a - a.T))) if n else 0.0
    if asym > SYMMETRY_TOL:
        raise ValueError(f"matrix asymmetric beyond tolerance ({asym:.2e})")
    a = 0.5 * (a + a.T)

    vt = np.eye(n)              # rows accumulate rotations; eigenvectors = vt.T
    tol2 = (JACOBI_TOL_FACTOR * np.linalg.norm(a)) ** 2
    for _ in range(JACOBI_MAX_SWEEPS):
        off2 = _offdiag_sq_norm(a)
        if off2 <= tol2:
            break
        skip = math.sqrt(off2) / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                app, aqq = a[p, p], a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rp = a[p].copy()
                rq = a[q].copy()
                np.multiply(rp, c, out=a[p])
                a[p] -= s * rq
                np.multiply(rp, s, out=a[q])
                a[q] += c * rq
                a[:, p] = a[p]
                a[:, q] = a[q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                rp = vt[p].copy()
                vt[p] *= c
                vt[p] -= s * vt[q]
                vt[q] *= c
                vt[q] += s * rp

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return EigenReport(eigenvalues=w[order], eigenvectors=vt.T[:, order],
                       n_assets=n, n_obs=n_obs)


def eigen_report(panel) -> EigenReport:
    """Spectrum of a panel's correlation matrix."""
    x = np.asarray(getattr(panel, "returns", panel), dtype=float)
    return eigh(correlation_matrix(x), n_obs=x.shape[0])


# ---------------------------------------------------------------------------
# Marchenko-Pastur


def mp_support(sigma2: float, t_obs: int, n: int) -> tuple[float, float]:
    ratio = math.sqrt(n / t_obs)
    return sigma2 * (1.0 - ratio) ** 2, sigma2 * (1.0 + ratio) ** 2


def mp_pdf(lam, sigma2: float, t_obs: int, n: int) -> np.ndarray:
    """Marchenko-Pastur eigenvalue density; zero outside the support."""
    if t_obs <= n:
        raise ValueError("need T > N for the Marchenko-Pastur density")
    if not sigma2 > 0.0:
        raise ValueError("sigma2 must be > 0")
    lam = np.asarray(lam, dtype=float)
    lo, hi = mp_support(sigma2, t_obs, n)
    inside = (lam >= lo) & (lam <= hi)
    out = np.zeros_like(lam, dtype=float)
    lam_in = lam[inside]
    out[inside] = (t_obs / n) * np.sqrt(np.maximum((hi - lam_in) * (lam_in - lo), 0.0)) \
        / (2.0 * np.pi * lam_in * sigma2)
    return out if out.ndim else float(out)


def _mp_fit_error(sigma2: float, kde, t_obs: int, n: int) -> float:
    lo, hi = mp_support(sigma2, t_obs, n)
    grid = np.linspace(lo, hi, MP_CURVE_POINTS)
    theory = mp_pdf(grid, sigma2, t_obs, n)
    empirical = kde(grid)
    return float(np.sum((theory - empirical) ** 2))


def fit_mp_sigma2(eigenvalues, t_obs: int, n: int,
                  grid: tuple[float, float, float] = MP_GRID) -> MpFit:
    """Fit the bulk noise variance against a kernel density of the spectrum.

    A Gaussian KDE (Silverman bandwidth) of the eigenvalues is compared
    with the theoretical density on its own support; the squared error
    is minimized over a sigma^2 grid and refined by golden-section
    search.  Eigenvalues above the fitted upper edge count as signal.
    """
    w = np.asarray(eigenvalues, dtype=float).ravel()
    if w.size < 20:
        raise ValueError("need at least 20 eigenvalues to fit the bulk")
    if t_obs <= n:
        raise ValueError("need T > N")
    if np.ptp(w) <= 0.0:
        raise ValueError("degenerate spectrum: all eigenvalues equal")
    kde = gaussian_kde(w, bw_method="silverman")

    lo, hi, step = grid
    sig_grid = np.arange(lo, hi + 0.5 * step, step)
    errors = np.array([_mp_fit_error(s, kde, t_obs, n) for s in sig_grid])
    best = int(np.argmin(errors))

    # golden-section polish when the best grid point brackets a minimum;
    # at a grid edge the grid value itself is kept
    interior = 0 < best < len(sig_grid) - 1
    if interior and errors[best] < errors[best - 1] and errors[best] < errors[best + 1]:
        sigma2 = float(golden(lambda s: _mp_fit_error(float(s), kde, t_obs, n),
                              brack=(sig_grid[best - 1], sig_grid[best],
                                     sig_grid[best + 1]), tol=1e-6))
        sigma2 = float(np.clip(sigma2, sig_grid[best - 1], sig_grid[best + 1]))
    else:
        sigma2 = float(sig_grid[best])
    sigma2 = float(np.clip(sigma2, step * 0.1, 1.0))

    lam_minus, lam_plus = mp_support(sigma2, t_obs, n)
    signal = int(np.sum(w > lam_plus))
    return MpFit(sigma2=sigma2, lambda_minus=lam_minus, lambda_plus=lam_plus,
                 q=t_obs / n, signal_count=signal)


# ---------------------------------------------------------------------------
# signal content and overlaps


def signal_variance_share(panel, signal_vectors) -> float:
    """Fraction of the standardized panel's variance carried by the given
    orthonormal eigenvector set (quadratic forms against the correlation
    matrix, normalized by its trace)."""
    x = np.asarray(getattr(panel, "returns", panel), dtype=float)
    vecs = np.asarray(signal_vectors, dtype=float)
    if vecs.size == 0:
        return 0.0
    if vecs.ndim != 2 or vecs.shape[0] != x.shape[1]:
        raise ValueError("signal_vectors must be (N, k) columns matching the panel")
    gram = vecs.T @ vecs
    if np.max(np.abs(gram - np.eye(vecs.shape[1]))) > 1e-8:
        raise ValueError("signal vectors are not orthonormal")
    c = correlation_matrix(x)
    explained = float(np.einsum("ij,jk,ik->", vecs.T, c, vecs.T))
    return explained / float(np.trace(c))


def eigenvector_overlap(report_a: EigenReport, report_b: EigenReport,
                        n_max: int) -> EigenvectorOverlap:
    """|v_n(A) . v_n(B)| for ranks 1..n_max, plus the 1/sqrt(N) baseline."""
    if report_a.n_assets != report_b.n_assets:
        raise ValueError("eigen reports have different dimensions")
    n_max = min(n_max, report_a.n_assets)
    va = report_a.eigenvectors[:, :n_max]
    vb = report_b.eigenvectors[:, :n_max]
    overlaps = np.abs(np.sum(va * vb, axis=0))
    return EigenvectorOverlap(overlaps=overlaps,
                              threshold=1.0 / math.sqrt(report_a.n_assets))


# ---------------------------------------------------------------------------
# multivariate normality


def henze_zirkler(panel, chunk: int = 512) -> tuple[float, float]:
    """Henze-Zirkler multivariate normality statistic and lognormal p-value.

    Uses the canonical smoothing parameter
    beta = ((2p + 1) T / 4)^(1/(p+4)) / sqrt(2) and the lognormal
    approximation of the null distribution.  Pairwise Mahalanobis
    distances are accumulated in row blocks so large samples stay
    within memory.
    """
    x = np.asarray(getattr(panel, "values", panel), dtype=float)
    if x.ndim != 2:
        raise ValueError("panel must be a (T, N) matrix")
    t_obs, p = x.shape
    if t_obs <= p:
        raise ValueError("need more observations than dimensions")
    cov = np.cov(x, rowvar=False, bias=True)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise ValueError("singular sample covariance")
    cov_inv = np.linalg.inv(cov)

    centered = x - x.mean(axis=0)
    y = x @ cov_inv            # so that D_jk = ||x_j - x_k||^2_{S^-1} via dot products
    sq = np.sum(y * x, axis=1)
    d_center = np.sum((centered @ cov_inv) * centered, axis=1)

    b = ((2.0 * p + 1.0) * t_obs / 4.0) ** (1.0 / (p + 4.0)) / math.sqrt(2.0)
    b2 = b * b

    # sum exp(-b^2/2 * D_jk) over ordered pairs: T on the diagonal plus
    # twice the strictly-upper triangle, accumulated in row blocks
    upper_sum = 0.0
    for start in range(0, t_obs, chunk):
        stop = min(start + chunk, t_obs)
        d_block = (sq[start:stop, None] + sq[None, start:]
                   - 2.0 * (y[start:stop] @ x[start:].T))
        block = np.exp(-0.5 * b2 * np.maximum(d_block, 0.0))
        upper_sum += float(np.sum(np.triu(block, k=1)))
    pair_sum = t_obs + 2.0 * upper_sum
    term1 = pair_sum / (t_obs * t_obs)
    term2 = 2.0 * (1.0 + b2) ** (-p / 2.0) / t_obs \
        * float(np.sum(np.exp(-0.5 * b2 / (1.0 + b2) * d_center)))
    term3 = (1.0 + 2.0 * b2) ** (-p / 2.0)
    hz = t_obs * (term1 - term2 + term3)

    # lognormal null approximation
    a = 1.0 + 2.0 * b2
    wb = (1.0 + b2) * (1.0 + 3.0 * b2)
    mu = 1.0 - a ** (-p / 2.0) * (1.0 + p * b2 / a + p * (p + 2.0) * b2 ** 2 / (2.0 * a * a))
    si2 = (2.0 * (1.0 + 4.0 * b2) ** (-p / 2.0)
           + 2.0 * a ** (-p) * (1.0 + 2.0 * p * b2 ** 2 / a ** 2
                                + 3.0 * p * (p + 2.0) * b2 ** 4 / (4.0 * a ** 4))
           - 4.0 * wb ** (-p / 2.0) * (1.0 + 3.0 * p * b2 ** 2 / (2.0 * wb)
                                       + p * (p + 2.0) * b2 ** 4 / (2.0 * wb ** 2)))
    log_mu = math.log(math.sqrt(mu ** 4 / (si2 + mu ** 2)))
    log_sd = math.sqrt(math.log1p(si2 / mu ** 2))
    p_value = float(lognorm.sf(hz, log_sd, scale=math.exp(log_mu)))
    return float(hz), p_value


# ---------------------------------------------------------------------------
# plot-data export


def spectrum_to_csv(report: EigenReport, fit: MpFit, path, bins: int = 100) -> None:
    """Histogram of eigenvalues plus the fitted density curve, as tidy CSV."""
    import pandas as pd

    w = report.eigenvalues
    lo = min(float(w.min()), fit.lambda_minus)
    hi = max(float(w.max()), fit.lambda_plus)
    counts, edges = np.histogram(w, bins=bins, range=(lo, hi), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    curve = mp_pdf(centers, fit.sigma2, report.n_obs or 0, report.n_assets) \
        if report.n_obs else np.zeros_like(centers)
    pd.DataFrame({"eigenvalue": centers, "histogram_density": counts,
                  "mp_density": curve}).to_csv(path, index=False)
