"""Cluster-robust sandwich covariance."""

from __future__ import annotations

import numpy as np


class SingleClusterError(ValueError):
    """Clustered covariance needs at least two clusters."""


def small_sample_factor(n_clusters: int, n_obs: int, n_params: int) -> float:
    """``G/(G-1) * (N-1)/(N-K)``."""
    if n_obs <= n_params:
        raise ValueError(f"need more observations ({n_obs}) than parameters ({n_params})")
    return n_clusters / (n_clusters - 1) * (n_obs - 1) / (n_obs - n_params)


def cluster_vcov(X, residuals, weights, cluster_codes):
    """Sandwich ``B^-1 M B^-1`` with ``B = X'WX`` and ``M = sum_g s_g s_g'``.

    Parameters
    ----------
    X : ndarray, shape (n, k)
        FE-absorbed design.
    residuals : ndarray, shape (n,)
        Score residuals: ``y - yhat`` for OLS, ``y - mu`` for PPML.
    weights : ndarray or None
        Working weights in the bread; ``None`` means unit weights.
    cluster_codes : ndarray or None
        Integer cluster per row; ``None`` puts every row in its own cluster.

    Returns
    -------
    (vcov, n_clusters, factor)
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if k == 0:
        return np.zeros((0, 0)), 0, 1.0
    u = np.asarray(residuals, dtype=float)
    if cluster_codes is None:
        codes = np.arange(n)
    else:
        _, codes = np.unique(np.asarray(cluster_codes), return_inverse=True)
        codes = codes.ravel()
    G = int(codes.max()) + 1
    if G < 2:
        raise SingleClusterError("clustered covariance needs at least two clusters, got 1")

    Xw = X if weights is None else X * np.asarray(weights, dtype=float)[:, None]
    bread = np.linalg.inv(X.T @ Xw)
    scores = np.zeros((G, k))
    np.add.at(scores, codes, X * u[:, None])
    meat = scores.T @ scores
    factor = small_sample_factor(G, n, k)
    V = factor * bread @ meat @ bread
    return 0.5 * (V + V.T), G, factor
