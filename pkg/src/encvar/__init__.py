"""encvar: scenario-based market risk engine.

Learns the joint distribution of cross-sectional stock returns with a
dense variational auto-encoder, generates return scenarios to forecast
portfolio Value-at-Risk, and scores the forecasts against classical VaR
models with a battery of backtest loss functions and random-matrix
diagnostics.

Subpackage map:
    market_data  panels, EWMA standardization, portfolio returns
    vae          auto-encoder forward/backward, training, sampling
    var_models   Encoded VaR plus eleven benchmark VaR forecasters
    backtest     loss functions, violation clustering, model ranking
    rmt          eigenvalue spectra, Marchenko-Pastur fits, normality
    cli          command-line pipeline (prepare/train/forecast/backtest/rmt)
"""

from encvar import backtest, cli, market_data, rmt, vae, var_models

__version__ = "0.1.0"

__all__ = ["market_data", "vae", "var_models", "backtest", "rmt", "cli", "__version__"]
