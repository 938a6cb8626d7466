"""Independent reference implementations and simulators used by the tests.

Everything here is deliberately written straight-line (explicit loops,
no shared code with the package) so the tests check the library against
a genuinely independent computation.
"""

import math

import numpy as np


def simulate_garch(omega, alpha, beta, n, seed, burn=500):
    """GARCH(1,1) path with standard-normal innovations."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn)
    sig2 = omega / (1.0 - alpha - beta)
    out = np.empty(n + burn)
    for t in range(n + burn):
        eps = math.sqrt(sig2) * z[t]
        out[t] = eps
        sig2 = omega + alpha * eps * eps + beta * sig2
    return out[burn:]


def simulate_egarch(omega, ar, news, theta, lam, n, seed, burn=500):
    """EGARCH(1,1) path: log sig2_t = omega + ar*log sig2_{t-1} + news*g(z_{t-1})."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn)
    m = math.sqrt(2.0 / math.pi)
    h = omega / (1.0 - ar)
    out = np.empty(n + burn)
    for t in range(n + burn):
        out[t] = math.exp(0.5 * h) * z[t]
        g = theta * z[t] + lam * (abs(z[t]) - m)
        h = omega + ar * h + news * g
    return out[burn:]


def simulate_common_factor_garch(omega, alpha, beta, n, n_assets, rho, seed, burn=500):
    """Panel whose assets share one GARCH(1,1) volatility and correlate via
    a common shock: z_i = sqrt(rho)*f + sqrt(1-rho)*e_i."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(n + burn)
    e = rng.standard_normal((n + burn, n_assets))
    z = math.sqrt(rho) * f[:, None] + math.sqrt(1.0 - rho) * e
    sig2 = omega / (1.0 - alpha - beta)
    panel = np.empty((n + burn, n_assets))
    for t in range(n + burn):
        sig = math.sqrt(sig2)
        panel[t] = sig * z[t]
        # the common-factor shock drives the variance recursion
        eps = sig * f[t]
        sig2 = omega + alpha * eps * eps + beta * sig2
    return panel[burn:]


def mc_kl_estimate(mu, sigma, n_draws, seed):
    """Monte-Carlo E_q[ln q(z) - ln p(z)] for diagonal Gaussians vs N(0, I)."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    rng = np.random.default_rng(seed)
    z = mu + sigma * rng.standard_normal((n_draws, mu.size))
    ln_q = (-0.5 * np.sum(((z - mu) / sigma) ** 2, axis=1)
            - np.sum(np.log(sigma)) - 0.5 * mu.size * np.log(2.0 * np.pi))
    ln_p = -0.5 * np.sum(z ** 2, axis=1) - 0.5 * mu.size * np.log(2.0 * np.pi)
    return float(np.mean(ln_q - ln_p))


def sener_reference(returns, var_values, theta):
    """Naive re-derivation of the cluster penalization measure.

    Scans the series day by day, collects violation clusters as plain
    lists, and accumulates the pair interactions with nested loops.
    """
    returns = list(map(float, returns))
    var_values = list(map(float, var_values))
    n = len(returns)

    clusters = []      # list of (first_day, last_day, [eps values])
    current = None
    for t in range(n):
        if returns[t] < var_values[t]:
            eps = var_values[t] - returns[t]
            if current is None:
                current = [t, t, [eps]]
            else:
                current[1] = t
                current[2].append(eps)
        else:
            if current is not None:
                clusters.append(current)
                current = None
    if current is not None:
        clusters.append(current)

    prods = []
    for _, _, eps_list in clusters:
        prod = 1.0
        for e in eps_list:
            prod *= 1.0 + e
        prods.append(prod)

    phi = 0.0
    for i in range(len(clusters)):
        for j in range(i + 1, len(clusters)):
            gap = clusters[j][0] - clusters[i][1] - 1
            phi += (prods[i] * prods[j] - 1.0) / gap

    psi = 0.0
    for t in range(n):
        if returns[t] >= var_values[t] and returns[t] < 0.0:
            psi += returns[t] - var_values[t]

    pm = ((1.0 - theta) * phi + theta * psi) / n
    return phi, psi, pm


def ewma_reference(values, window, decay):
    """Per-day weighted mean/std with explicit loops (oldest weight decay^(w-1))."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    mus, sds = [], []
    for t in range(window, n):
        num_mu = den = 0.0
        for age in range(window):
            wgt = decay ** age
            num_mu += wgt * values[t - 1 - age]
            den += wgt
        mu = num_mu / den
        num_var = 0.0
        for age in range(window):
            wgt = decay ** age
            num_var += wgt * (values[t - 1 - age] - mu) ** 2
        mus.append(mu)
        sds.append(math.sqrt(num_var / den))
    return np.array(mus), np.array(sds)


def binomial_band(n, p, z=2.5758293035489004):
    """Two-sided 99% normal-approximation band for a binomial rate."""
    half = z * math.sqrt(p * (1.0 - p) / n)
    return p - half, p + half


def write_price_csv(path, n_days, n_assets, seed, vol=0.013, rho=0.4,
                    garch_alpha=0.05, garch_beta=0.90):
    """Synthetic price panel: correlated returns with common GARCH volatility."""
    vbar = vol * vol
    omega = vbar * (1.0 - garch_alpha - garch_beta)
    panel = simulate_common_factor_garch(omega, garch_alpha, garch_beta,
                                         n_days, n_assets, rho, seed)
    prices = 100.0 * np.exp(np.cumsum(panel, axis=0))
    dates = np.datetime64("2000-01-03") + np.arange(n_days)
    with open(path, "w") as fh:
        fh.write("date," + ",".join(f"S{i:03d}" for i in range(n_assets)) + "\n")
        for d, row in zip(dates, prices):
            fh.write(str(d) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    return panel
