"""Exact reference machinery for binary energy-based models.

Binary states are plain numpy vectors with entries in {0, 1}.  A state maps
to an integer index little-endian style: bit i of the index is the value of
unit i.  All probability arithmetic runs in log space so that trained-model
energy spreads of hundreds of nats stay representable.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

# Exact enumeration is capped at 2^20 states (~1M); beyond that the oracle
# stops being a desk-scale tool.
ENUMERATION_LIMIT = 20

_ENERGY_CHUNK = 1 << 16


class EnumerationTooLargeError(ValueError):
    """Raised when exact enumeration is requested for more than 20 units."""


@dataclass(frozen=True)
class BoltzmannMachine:
    """Symmetric pairwise binary model: E(z) = -z'Wz/2 - z'b.

    weights must be symmetric with a zero diagonal; the partition function is
    never stored, it is recomputed on demand by exact_distribution.
    """

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weights must be square, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(
                f"biases shape {b.shape} does not match {w.shape[0]} units"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("weights and biases must be finite")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("weights must have a zero diagonal")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def n_units(self) -> int:
        return self.biases.shape[0]

    @classmethod
    def random(cls, n_units, weight_scale=0.6, bias_scale=0.6, rng=None):
        """Random machine with weights, biases ~ U(-scale, scale)."""
        rng = np.random.default_rng(rng)
        w = rng.uniform(-weight_scale, weight_scale, size=(n_units, n_units))
        w = np.triu(w, 1)
        w = w + w.T
        b = rng.uniform(-bias_scale, bias_scale, size=n_units)
        return cls(w, b)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability vector over all 2^n binary states (little-endian index)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        n = p.shape[0]
        if p.ndim != 1 or n < 1 or (n & (n - 1)) != 0:
            raise ValueError("probs must be a 1-d vector of length 2^n")
        if np.any(p < 0.0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def n_units(self) -> int:
        return int(self.probs.shape[0]).bit_length() - 1

    def __len__(self) -> int:
        return self.probs.shape[0]


def _check_state(machine, state):
    z = np.asarray(state)
    if z.shape != (machine.n_units,):
        raise ValueError(
            f"state shape {z.shape} does not match {machine.n_units} units"
        )
    return z.astype(np.float64)


def state_to_index(states):
    """Integer index of binary states; bit i of the index is unit i."""
    z = np.atleast_2d(np.asarray(states))
    n = z.shape[1]
    if n > 63:
        raise ValueError("indexing supports at most 63 units")
    powers = (1 << np.arange(n, dtype=np.int64))
    idx = (z.astype(np.int64) @ powers)
    return idx if np.asarray(states).ndim > 1 else int(idx[0])


def index_to_state(index, n_units):
    idx = np.atleast_1d(np.asarray(index, dtype=np.int64))
    bits = ((idx[:, None] >> np.arange(n_units, dtype=np.int64)) & 1).astype(np.uint8)
    return bits if np.asarray(index).ndim > 0 else bits[0]


def energy(machine: BoltzmannMachine, state) -> float:
    """E(z) = -z'Wz/2 - z'b."""
    z = _check_state(machine, state)
    return float(-0.5 * z @ machine.weights @ z - machine.biases @ z)


def all_state_energies(machine: BoltzmannMachine) -> np.ndarray:
    """Energies of all 2^n states, chunked to bound peak memory."""
    n = machine.n_units
    if n > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"exact enumeration limited to {ENUMERATION_LIMIT} units, got {n}"
        )
    total = 1 << n
    out = np.empty(total, dtype=np.float64)
    for start in range(0, total, _ENERGY_CHUNK):
        idx = np.arange(start, min(start + _ENERGY_CHUNK, total), dtype=np.int64)
        z = ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.float64)
        out[start : start + idx.shape[0]] = (
            -0.5 * np.einsum("si,si->s", z @ machine.weights, z) - z @ machine.biases
        )
    return out


def exact_distribution(machine: BoltzmannMachine, inv_temperature=1.0) -> DiscreteDistribution:
    """Exact Boltzmann distribution p(z) ~ exp(-beta*E(z)) by enumeration."""
    if inv_temperature <= 0.0:
        raise ValueError("inv_temperature must be positive")
    log_p = -inv_temperature * all_state_energies(machine)
    log_p -= logsumexp(log_p)
    p = np.exp(log_p)
    return DiscreteDistribution(p / p.sum())


def conditional_on(machine: BoltzmannMachine, state, k, inv_temperature=1.0) -> float:
    """p(z_k = 1 | all other units) at the given inverse temperature."""
    z = _check_state(machine, state)
    if not 0 <= k < machine.n_units:
        raise IndexError(f"unit index {k} out of range for {machine.n_units} units")
    u = machine.weights[k] @ z + machine.biases[k]  # w_kk = 0, so z_k drops out
    return float(1.0 / (1.0 + np.exp(-inv_temperature * u)))


def kl_divergence(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Kullback-Leibler divergence sum p log(p/q); +inf if q misses p's support."""
    pp, qq = p.probs, q.probs
    if pp.shape != qq.shape:
        raise ValueError("distributions must have the same length")
    mask = pp > 0.0
    if np.any(qq[mask] == 0.0):
        return float("inf")
    return float(np.sum(pp[mask] * (np.log(pp[mask]) - np.log(qq[mask]))))


def empirical_distribution(states, n_units) -> DiscreteDistribution:
    """Normalized histogram of sampled states over all 2^n state indices.

    Accepts an (n_samples, n_units) array or anything with a .states array
    (e.g. a SampleTrace).
    """
    if hasattr(states, "states"):
        states = states.states
    z = np.asarray(states)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("need a nonempty (n_samples, n_units) state array")
    if z.shape[1] != n_units:
        raise ValueError(f"states have {z.shape[1]} units, expected {n_units}")
    if n_units > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"histograms limited to {ENUMERATION_LIMIT} units"
        )
    idx = state_to_index(z)
    counts = np.bincount(idx, minlength=1 << n_units).astype(np.float64)
    return DiscreteDistribution(counts / counts.sum())


def marginal_over(dist: DiscreteDistribution, unit_subset) -> DiscreteDistribution:
    """Marginal distribution over the given units (complement summed out).

    Bit j of the result's index is unit unit_subset[j].
    """
    subset = list(unit_subset)
    n = dist.n_units
    if len(subset) == 0 or len(set(subset)) != len(subset):
        raise ValueError("unit_subset must be nonempty without duplicates")
    if any(not 0 <= u < n for u in subset):
        raise ValueError(f"unit_subset {subset} invalid for {n} units")
    idx = np.arange(1 << n, dtype=np.int64)
    sub_idx = np.zeros_like(idx)
    for j, u in enumerate(subset):
        sub_idx |= ((idx >> u) & 1) << j
    out = np.bincount(sub_idx, weights=dist.probs, minlength=1 << len(subset))
    return DiscreteDistribution(out / out.sum())
