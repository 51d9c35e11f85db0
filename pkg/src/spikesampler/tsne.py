"""Student-t stochastic neighbor embedding (O(n^2), desk scale).

High-dimensional affinities use per-point Gaussian kernels whose widths are
solved by binary search so each point's neighborhood entropy matches the
requested perplexity; low-dimensional affinities use the heavy-tailed
t-kernel with one degree of freedom.  The map minimizes KL(P || Q) by
gradient descent with momentum (0.5 until iteration 250, then 0.8) and a 4x
early exaggeration of P for the first 100 iterations.
"""

from dataclasses import dataclass

import numpy as np

_EPS = 1e-12
_MAX_POINTS = 2000


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    n_iterations: int = 500
    learning_rate: float = 100.0
    output_dim: int = 2
    seed: int | None = None

    def __post_init__(self):
        if self.perplexity <= 1.0:
            raise ValueError("perplexity must exceed 1")
        if self.n_iterations < 1 or self.learning_rate <= 0.0:
            raise ValueError("need positive iterations and learning rate")


def _squared_distances(x):
    s = np.sum(x * x, axis=1)
    d2 = s[:, None] + s[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_probs_entropy(d_row, beta):
    """Normalized kernel row and its entropy exponential exp(H) for one point.

    Entries at +inf (the point itself) get probability zero.
    """
    finite = np.isfinite(d_row)
    shifted = d_row[finite] - d_row[finite].min()
    p = np.zeros_like(d_row)
    p[finite] = np.exp(-shifted * beta)
    total = p.sum()
    p /= total
    h = np.log(total) + beta * float(shifted @ p[finite])
    return p, np.exp(h)


def joint_affinities(samples, perplexity, tol=1e-4, max_iter=100):
    """Symmetrized affinity matrix P with per-point widths matched to the
    perplexity (entropy exponential within tol)."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[0]
    d2 = _squared_distances(x)
    off_diag = d2[~np.eye(n, dtype=bool)]
    if np.all(off_diag == 0.0):
        raise ValueError("all input samples are identical; embedding is undefined")

    cond = np.zeros((n, n))
    for i in range(n):
        row = d2[i].copy()
        row[i] = np.inf  # excludes the point itself from its own kernel
        beta, lo, hi = 1.0, 0.0, np.inf
        p = None
        for _ in range(max_iter):
            p, perp = _row_probs_entropy(row, beta)
            if abs(perp - perplexity) <= tol:
                break
            if perp > perplexity:  # kernel too wide: raise precision
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        cond[i] = p
    p_joint = (cond + cond.T) / (2.0 * n)
    return np.maximum(p_joint, _EPS)


def _q_matrix(y):
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    return np.maximum(q, _EPS), num


def kl_cost(p, y) -> float:
    q, _ = _q_matrix(np.asarray(y, dtype=np.float64))
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def kl_gradient(p, y) -> np.ndarray:
    """dC/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j)/(1 + |y_i - y_j|^2)."""
    y = np.asarray(y, dtype=np.float64)
    q, num = _q_matrix(y)
    pq = (p - q) * num
    return 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)


def tsne_embed(samples, cfg: TsneConfig = TsneConfig(), rng=None):
    """Embed samples into cfg.output_dim dimensions; returns (points, cost)."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[0]
    if n > _MAX_POINTS:
        raise ValueError(f"embedder is capped at {_MAX_POINTS} points")
    if n < 3 * cfg.perplexity:
        raise ValueError("need at least 3x perplexity samples")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    p = joint_affinities(x, cfg.perplexity)
    y = rng.normal(0.0, 1e-4, size=(n, cfg.output_dim))
    velocity = np.zeros_like(y)
    for it in range(cfg.n_iterations):
        p_eff = p * 4.0 if it < 100 else p
        grad = kl_gradient(p_eff, y)
        momentum = 0.5 if it < 250 else 0.8
        velocity = momentum * velocity - cfg.learning_rate * grad
        y = y + velocity
        y = y - y.mean(axis=0)
    return y, kl_cost(p, y)
