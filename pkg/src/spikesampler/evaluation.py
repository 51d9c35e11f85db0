"""Quality metrics for generated samples and trained machines.

The nonparametric likelihood treats each generated sample as a factorized
kernel around itself: a test vector scores beta per matching bit and
(1 - beta) per mismatch, averaged over the generated set.  Everything is
computed from bit-match counts in log space, since 784-dimensional products
underflow double precision.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .boltzmann import BoltzmannMachine
from .samplers import RbmLayout, SampleTrace, _RbmBlocks


@dataclass(frozen=True)
class IslConfig:
    """Match/mismatch gain of the likelihood kernel."""

    beta: float = 0.95

    def __post_init__(self):
        if not 0.5 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0.5, 1], got {self.beta}")


def _as_bits(x, name):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty (n, d) array")
    return a


def _match_counts(test, generated):
    """m[t, g] = number of agreeing bits between test t and generated g."""
    d = test.shape[1]
    dots = test @ generated.T
    ones_t = test.sum(axis=1, keepdims=True)
    ones_g = generated.sum(axis=1, keepdims=True).T
    return d - (ones_t + ones_g - 2.0 * dots)


def isl_log_likelihood(test_set, generated, cfg: IslConfig = IslConfig()) -> float:
    """Mean log-likelihood of the test set under the generated-sample kernel."""
    y = _as_bits(test_set, "test_set")
    x = _as_bits(generated, "generated")
    if y.shape[1] != x.shape[1]:
        raise ValueError("test and generated dimensions differ")
    return float(np.mean(_isl_per_test(y, x, cfg)))


def _isl_per_test(y, x, cfg):
    d = y.shape[1]
    m = _match_counts(y, x)
    if cfg.beta == 1.0:
        terms = np.where(m == d, 0.0, -np.inf)
    else:
        terms = m * np.log(cfg.beta) + (d - m) * np.log1p(-cfg.beta)
    return logsumexp(terms, axis=1) - np.log(x.shape[0])


def isl_curve(test_set, generated, checkpoints, cfg: IslConfig = IslConfig()):
    """Mean log-likelihood against growing prefixes of the generated stream."""
    y = _as_bits(test_set, "test_set")
    x = _as_bits(generated, "generated")
    pts = sorted(int(c) for c in checkpoints)
    if pts[0] < 1 or pts[-1] > x.shape[0]:
        raise ValueError("checkpoints must lie in [1, n_generated]")
    d = y.shape[1]
    m = _match_counts(y, x)
    if cfg.beta == 1.0:
        terms = np.where(m == d, 0.0, -np.inf)
    else:
        terms = m * np.log(cfg.beta) + (d - m) * np.log1p(-cfg.beta)
    out = []
    for n in pts:
        ll = logsumexp(terms[:, :n], axis=1) - np.log(n)
        out.append((n, float(np.mean(ll))))
    return out


def pom_baseline(training_set, n_samples, rng) -> np.ndarray:
    """Independent per-pixel Bernoulli draws from the training marginals."""
    x = _as_bits(training_set, "training_set")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    marginals = x.mean(axis=0)
    return (rng.random((int(n_samples), x.shape[1])) < marginals).astype(np.uint8)


def opt_baseline(base_set, n_samples, rng) -> np.ndarray:
    """I.i.d. draws with replacement from a well-mixed base set."""
    x = np.asarray(base_set)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("base_set must be a nonempty (n, d) array")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    return x[rng.integers(0, x.shape[0], size=int(n_samples))].astype(np.uint8)


# ---------------------------------------------------------------------------
# Mode statistics


@dataclass
class ModeTrace:
    times: np.ndarray
    modes: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.modes = np.asarray(self.modes, dtype=np.int64)
        if self.times.shape != self.modes.shape:
            raise ValueError("times and modes must have equal length")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("timestamps must be nondecreasing")

    def __len__(self):
        return self.modes.shape[0]


def _windowed_mean(values, window):
    if window <= 1:
        return values.astype(np.float64)
    kernel = np.ones(window) / window
    padded = np.vstack([np.repeat(values[:1], window - 1, axis=0), values])
    out = np.empty_like(values, dtype=np.float64)
    for j in range(values.shape[1]):
        out[:, j] = np.convolve(padded[:, j], kernel, mode="valid")
    return out


def modes_from_labels(trace: SampleTrace, layout: RbmLayout, window=1) -> ModeTrace:
    """Mode = label unit with the highest mean activity over a trailing
    window (in samples); ties resolve to the lowest index."""
    if layout.n_label == 0:
        raise ValueError("layout has no label units")
    labels = trace.states[:, layout.label].astype(np.float64)
    act = _windowed_mean(labels, int(window))
    return ModeTrace(trace.times, np.argmax(act, axis=1))


def modes_from_templates(trace: SampleTrace, templates, n_visible=None) -> ModeTrace:
    """Mode = class template with the largest normalized overlap with the
    visible part of each state (for networks without a label layer)."""
    t = np.asarray(templates, dtype=np.float64)
    nv = t.shape[1] if n_visible is None else int(n_visible)
    v = trace.states[:, :nv].astype(np.float64)
    scores = v @ t.T / np.maximum(t.sum(axis=1), 1.0)
    return ModeTrace(trace.times, np.argmax(scores, axis=1))


@dataclass
class DwellStats:
    """Run-length encoding of a mode sequence."""

    run_modes: np.ndarray
    run_lengths: np.ndarray     # in samples
    run_durations: np.ndarray   # in the trace's time unit

    @property
    def n_switches(self) -> int:
        return max(0, self.run_modes.shape[0] - 1)

    def histogram(self):
        """(dwell length in samples, count) table."""
        lengths, counts = np.unique(self.run_lengths, return_counts=True)
        return lengths, counts

    def occupancy(self, n_modes) -> np.ndarray:
        """Fraction of samples spent in each mode."""
        total = self.run_lengths.sum()
        occ = np.zeros(n_modes)
        for m, ln in zip(self.run_modes, self.run_lengths):
            occ[m] += ln
        return occ / total


def mode_dwell_histogram(mode_trace: ModeTrace) -> DwellStats:
    m = mode_trace.modes
    if m.shape[0] == 0:
        raise ValueError("empty mode trace")
    edges = np.flatnonzero(np.diff(m)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [m.shape[0]]])
    lengths = ends - starts
    if mode_trace.times.shape[0] > 1:
        dt = np.median(np.diff(mode_trace.times))
    else:
        dt = 1.0
    return DwellStats(m[starts], lengths, lengths * dt)


# ---------------------------------------------------------------------------
# Discriminative use and interaction structure


def classify(machine: BoltzmannMachine, layout: RbmLayout, image, rng,
             n_sweeps=60, burn_in=None) -> int:
    """Clamp the visible layer to the image and sample hidden+label units;
    the label with the highest mean activity wins (ties to the lowest index).
    """
    if layout.n_label == 0:
        raise ValueError("layout has no label units")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    v = np.asarray(image, dtype=np.float64).reshape(-1)
    if v.shape[0] != layout.n_visible:
        raise ValueError("image size does not match the visible layer")
    blocks = _RbmBlocks.from_machine(machine, layout)
    burn_in = n_sweeps // 2 if burn_in is None else burn_in
    h = (rng.random(layout.n_hidden) < 0.5).astype(np.float64)
    l = (rng.random(layout.n_label) < 0.5).astype(np.float64)
    acc = np.zeros(layout.n_label)
    for sweep in range(n_sweeps):
        h = (rng.random(layout.n_hidden)
             < expit(v @ blocks.w_vh + l @ blocks.w_lh + blocks.b_h)).astype(np.float64)
        l = (rng.random(layout.n_label)
             < expit(blocks.w_lh @ h + blocks.b_l)).astype(np.float64)
        if sweep >= burn_in:
            acc += l
    return int(np.argmax(acc))


def mean_activity_vectors(traces) -> np.ndarray:
    """Per-pattern mean network activity, one row per trace."""
    return np.stack([np.asarray(t.states, dtype=np.float64).mean(axis=0) for t in traces])


def mean_interaction_strength(machine: BoltzmannMachine, traces_or_means) -> np.ndarray:
    """Bilinear interaction m_i' W m_j between per-pattern mean activities."""
    m = np.asarray(traces_or_means, dtype=np.float64) if not hasattr(
        traces_or_means[0], "states"
    ) else mean_activity_vectors(traces_or_means)
    if m.ndim != 2 or m.shape[1] != machine.n_units:
        raise ValueError("activity vectors must match the machine size")
    return m @ machine.weights @ m.T
