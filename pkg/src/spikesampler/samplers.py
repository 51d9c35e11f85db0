"""Classical reference samplers and the tempered RBM trainer.

Gibbs sweeps use a fixed ascending-index scan.  For machines with a
visible/hidden/label block structure (units ordered [visible | hidden |
label], no within-layer weights) the same scan factorizes into three block
updates; the vectorized path below draws its uniforms in the identical order
as the sequential kernel, so both produce bit-identical chains from the same
seed.

The tempering chain random-walks an inverse-temperature ladder while
multiplicatively adapting one weight per ladder level; the weights are kept
in log space because they grow without bound under the 1/t adaptation
schedule.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _kernels
from .boltzmann import BoltzmannMachine


@dataclass
class SampleTrace:
    """Time-ordered binary network states with per-sample validity flags.

    times carry the sweep index for classical samplers and milliseconds of
    biological time for spiking runs.
    """

    states: np.ndarray  # (n_samples, n_units) uint8
    valid: np.ndarray   # (n_samples,) bool
    times: np.ndarray   # (n_samples,) float

    def __post_init__(self):
        self.states = np.ascontiguousarray(self.states, dtype=np.uint8)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.times = np.asarray(self.times, dtype=np.float64)
        if not (self.states.shape[0] == self.valid.shape[0] == self.times.shape[0]):
            raise ValueError("states, valid and times must have equal length")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("timestamps must be nondecreasing")

    def __len__(self):
        return self.states.shape[0]

    @property
    def n_units(self):
        return self.states.shape[1]

    def valid_states(self):
        return self.states[self.valid]


@dataclass(frozen=True)
class TemperatureLadder:
    """Strictly monotone inverse temperatures in (0, 1] with a beta = 1 endpoint."""

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.shape[0] < 1:
            raise ValueError("betas must be a nonempty vector")
        if np.any(b <= 0.0) or np.any(b > 1.0):
            raise ValueError("betas must lie in (0, 1]")
        d = np.diff(b)
        if b.shape[0] > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("betas must be strictly monotone")
        if b[0] != 1.0 and b[-1] != 1.0:
            raise ValueError("the ladder must contain beta = 1 as an endpoint")
        object.__setattr__(self, "betas", b)

    @classmethod
    def equidistant(cls, count=20, beta_min=0.9):
        return cls(np.linspace(beta_min, 1.0, count))

    def __len__(self):
        return self.betas.shape[0]

    @property
    def target_level(self) -> int:
        """Ladder index of beta = 1, where samples count as valid."""
        return int(np.argmax(self.betas))


@dataclass
class AstState:
    """Ladder position, adaptation step count and log adaptive weights.

    The adaptive weights are stored as logs: the 1/t adaptation multiplies
    one weight per step, so the raw values grow like t^gamma_num and would
    overflow float64 within a few thousand steps.  gamma_t follows
    gamma_num / (gamma_off + t).
    """

    ladder: TemperatureLadder
    log_weights: np.ndarray
    level: int
    step_count: int = 0
    gamma_num: float = 90.0
    gamma_off: float = 150.0

    def __post_init__(self):
        self.log_weights = np.asarray(self.log_weights, dtype=np.float64)
        if self.log_weights.shape != (len(self.ladder),):
            raise ValueError("log_weights length must match the ladder")
        if not 0 <= self.level < len(self.ladder):
            raise ValueError("ladder level out of range")

    @classmethod
    def fresh(cls, ladder: TemperatureLadder, gamma=(90.0, 150.0)):
        return cls(ladder, np.zeros(len(ladder)), ladder.target_level, 0, *gamma)

    @property
    def weights(self):
        """Adaptive weights normalized so the largest equals 1 (always positive)."""
        return np.exp(self.log_weights - self.log_weights.max())


@dataclass(frozen=True)
class RbmLayout:
    """Block structure of a machine ordered [visible | hidden | label]."""

    n_visible: int
    n_hidden: int
    n_label: int = 0

    def __post_init__(self):
        if self.n_visible < 0 or self.n_hidden < 0 or self.n_label < 0:
            raise ValueError("layer sizes must be nonnegative")

    @property
    def n_units(self):
        return self.n_visible + self.n_hidden + self.n_label

    @property
    def visible(self):
        return slice(0, self.n_visible)

    @property
    def hidden(self):
        return slice(self.n_visible, self.n_visible + self.n_hidden)

    @property
    def label(self):
        return slice(self.n_visible + self.n_hidden, self.n_units)

    def check(self, machine: BoltzmannMachine):
        if machine.n_units != self.n_units:
            raise ValueError(
                f"layout covers {self.n_units} units, machine has {machine.n_units}"
            )
        w = machine.weights
        for s in (self.visible, self.hidden, self.label):
            if np.any(w[s, s] != 0.0):
                raise ValueError("within-layer weights must be zero")
        if np.any(w[self.visible, self.label] != 0.0):
            raise ValueError("visible-label weights must be zero")


@dataclass(frozen=True)
class TrainingSchedule:
    """Hyperparameters for tempered persistent-chain training.

    Learning rate and adaptation follow a/(b + t); eta and gamma hold the
    (numerator, offset) pairs.
    """

    updates: int
    batch_size: int
    eta: tuple = (10.0, 2000.0)
    gamma: tuple = (90.0, 150.0)
    ladder_size: int = 20
    beta_min: float = 0.9
    seed: int | None = None

    def __post_init__(self):
        if self.updates <= 0 or self.batch_size <= 0:
            raise ValueError("updates and batch_size must be positive")
        if self.eta[0] <= 0 or self.eta[1] <= 0:
            raise ValueError("eta numerator and offset must be positive")

    def learning_rate(self, t):
        return self.eta[0] / (self.eta[1] + t)

    def ladder(self):
        return TemperatureLadder.equidistant(self.ladder_size, self.beta_min)


# ---------------------------------------------------------------------------
# Gibbs sampling


def _as_float_state(machine, state, rng):
    if state is None:
        return (rng.random(machine.n_units) < 0.5).astype(np.float64)
    z = np.asarray(state, dtype=np.float64).copy()
    if z.shape != (machine.n_units,):
        raise ValueError(f"state shape {z.shape} does not match machine")
    return z


def gibbs_sweep(machine: BoltzmannMachine, state, inv_temperature=1.0, rng=None):
    """One ascending-index Gibbs sweep; returns the new binary state."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    z = _as_float_state(machine, state, rng)
    out = np.empty((1, machine.n_units), dtype=np.uint8)
    _kernels.gibbs_chain_kernel(
        machine.weights, machine.biases, z, float(inv_temperature), 1, 1, out, rng
    )
    return out[0].copy()


def gibbs_chain(
    machine: BoltzmannMachine,
    n_sweeps,
    rng,
    inv_temperature=1.0,
    init=None,
    record_every=1,
    layout: RbmLayout | None = None,
):
    """Run a Gibbs chain and record every record_every-th sweep.

    With a layout, the sweep is computed with vectorized block updates; the
    chain is bit-identical to the sequential scan.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    z = _as_float_state(machine, init, rng)
    n_rec = n_sweeps // record_every
    out = np.empty((n_rec, machine.n_units), dtype=np.uint8)
    if layout is None:
        rec = _kernels.gibbs_chain_kernel(
            machine.weights, machine.biases, z, float(inv_temperature),
            int(n_sweeps), int(record_every), out, rng,
        )
    else:
        blocks = _RbmBlocks.from_machine(machine, layout)
        rec = 0
        for sweep in range(n_sweeps):
            blocks.ascending_sweep(z, inv_temperature, rng)
            if (sweep + 1) % record_every == 0:
                out[rec] = z.astype(np.uint8)
                rec += 1
    times = (np.arange(rec, dtype=np.float64) + 1.0) * record_every
    return SampleTrace(out[:rec], np.ones(rec, dtype=bool), times)


class _RbmBlocks:
    """Weight blocks of a [visible | hidden | label] machine."""

    def __init__(self, w_vh, w_lh, b_v, b_h, b_l, layout):
        self.w_vh = w_vh
        self.w_lh = w_lh
        self.b_v = b_v
        self.b_h = b_h
        self.b_l = b_l
        self.layout = layout

    @classmethod
    def from_machine(cls, machine, layout):
        layout.check(machine)
        w, b = machine.weights, machine.biases
        return cls(
            w[layout.visible, layout.hidden].copy(),
            w[layout.label, layout.hidden].copy(),
            b[layout.visible].copy(),
            b[layout.hidden].copy(),
            b[layout.label].copy(),
            layout,
        )

    def ascending_sweep(self, z, beta, rng):
        """Visible, hidden, label blocks in order == sequential ascending scan."""
        lo = self.layout
        v, h, l = z[lo.visible], z[lo.hidden], z[lo.label]
        v[:] = rng.random(lo.n_visible) < expit(beta * (self.w_vh @ h + self.b_v))
        h[:] = rng.random(lo.n_hidden) < expit(
            beta * (v @ self.w_vh + l @ self.w_lh + self.b_h)
        )
        l[:] = rng.random(lo.n_label) < expit(beta * (self.w_lh @ h + self.b_l))

    def energy(self, z):
        lo = self.layout
        v, h, l = z[lo.visible], z[lo.hidden], z[lo.label]
        return float(
            -(v @ self.w_vh) @ h
            - (l @ self.w_lh) @ h
            - self.b_v @ v
            - self.b_h @ h
            - self.b_l @ l
        )


def block_gibbs_sweep(machine: BoltzmannMachine, layout: RbmLayout, state, rng, inv_temperature=1.0):
    """Hidden block given visible+label, then visible and label given hidden."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    blocks = _RbmBlocks.from_machine(machine, layout)
    z = _as_float_state(machine, state, rng)
    _block_sweep(blocks, z, inv_temperature, rng)
    return z.astype(np.uint8)


def _block_sweep(blocks, z, beta, rng):
    lo = blocks.layout
    v, h, l = z[lo.visible], z[lo.hidden], z[lo.label]
    h[:] = rng.random(lo.n_hidden) < expit(
        beta * (v @ blocks.w_vh + l @ blocks.w_lh + blocks.b_h)
    )
    v[:] = rng.random(lo.n_visible) < expit(beta * (blocks.w_vh @ h + blocks.b_v))
    l[:] = rng.random(lo.n_label) < expit(beta * (blocks.w_lh @ h + blocks.b_l))


# ---------------------------------------------------------------------------
# Adaptive simulated tempering


def ast_step(machine: BoltzmannMachine, state, ast: AstState, rng):
    """One tempered sweep plus ladder move; returns (new state, new AstState)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    z = _as_float_state(machine, state, rng)
    log_g = ast.log_weights.copy()
    out = np.empty((1, machine.n_units), dtype=np.uint8)
    levels = np.empty(1, dtype=np.int64)
    valid = np.empty(1, dtype=np.uint8)
    level, t = _kernels.ast_chain_kernel(
        machine.weights, machine.biases, z,
        ast.ladder.betas, log_g, ast.level, ast.step_count,
        ast.gamma_num, ast.gamma_off,
        ast.ladder.target_level, 1, out, levels, valid, rng,
    )
    new = AstState(ast.ladder, log_g, int(level), int(t), ast.gamma_num, ast.gamma_off)
    return out[0].copy(), new


def ast_chain(
    machine: BoltzmannMachine,
    n_steps,
    rng,
    ladder: TemperatureLadder | None = None,
    gamma=(90.0, 150.0),
    init=None,
    ast: AstState | None = None,
):
    """Run a tempering chain; returns (trace, level history, final AstState).

    The trace records every step; validity flags mark steps swept at beta = 1.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if ast is None:
        ast = AstState.fresh(ladder or TemperatureLadder.equidistant(), gamma)
    z = _as_float_state(machine, init, rng)
    log_g = ast.log_weights.copy()
    out = np.empty((n_steps, machine.n_units), dtype=np.uint8)
    levels = np.empty(n_steps, dtype=np.int64)
    valid = np.empty(n_steps, dtype=np.uint8)
    level, t = _kernels.ast_chain_kernel(
        machine.weights, machine.biases, z,
        ast.ladder.betas, log_g, ast.level, ast.step_count,
        ast.gamma_num, ast.gamma_off,
        ast.ladder.target_level, int(n_steps), out, levels, valid, rng,
    )
    trace = SampleTrace(out, valid.astype(bool), np.arange(1.0, n_steps + 1.0))
    final = AstState(ast.ladder, log_g, int(level), int(t), ast.gamma_num, ast.gamma_off)
    return trace, levels, final


def ast_effective_rate(trace: SampleTrace) -> float:
    """Fraction of recorded steps that are valid (swept at beta = 1)."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    return float(trace.valid.mean())


# ---------------------------------------------------------------------------
# Tempered persistent-chain training


class _RbmAstChain:
    """Tempering chain over a block-structured machine, vectorized sweeps.

    Consumes the identical uniform stream as the sequential kernel: one draw
    per unit in ascending order, one proposal draw, one acceptance draw for
    in-range proposals.
    """

    def __init__(self, blocks, ladder, gamma, z, rng):
        self.blocks = blocks
        self.betas = ladder.betas
        self.target = ladder.target_level
        self.gamma_num, self.gamma_off = gamma
        self.log_g = np.zeros(len(ladder))
        self.level = ladder.target_level
        self.t = 0
        self.z = z
        self.rng = rng

    def step(self):
        beta = self.betas[self.level]
        self.blocks.ascending_sweep(self.z, beta, self.rng)
        e = self.blocks.energy(self.z)
        prop = self.level - 1 if self.rng.random() < 0.5 else self.level + 1
        if 0 <= prop < self.betas.shape[0]:
            log_ratio = (
                (self.betas[self.level] - self.betas[prop]) * e
                + self.log_g[self.level]
                - self.log_g[prop]
            )
            if np.log(1.0 - self.rng.random()) < log_ratio:
                self.level = prop
        self.t += 1
        self.log_g[self.level] += np.log1p(self.gamma_num / (self.gamma_off + self.t))


def cast_train(
    layout: RbmLayout,
    data,
    schedule: TrainingSchedule,
    rng,
    init_sigma=0.01,
    callback=None,
) -> BoltzmannMachine:
    """Train a block-structured machine with coupled tempered chains.

    The negative phase runs two persistent particles: one sampled at beta = 1
    with block sweeps, the other driven by the tempering chain.  Whenever the
    tempering particle sits at beta = 1 after its move, the two particles'
    configurations are exchanged (the symmetric Metropolis exchange rule
    accepts with probability 1 when both chains are at the same temperature).
    Gradients: eta(t) * (<v h>_data - <v h>_model) with exact hidden means in
    the data phase; the model phase uses the beta = 1 particle's visible and
    label states with exact hidden means given them.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    data = np.asarray(data, dtype=np.float64)
    nv, nh, nl = layout.n_visible, layout.n_hidden, layout.n_label
    if data.ndim != 2 or data.shape[1] != nv + nl:
        raise ValueError(
            f"training rows must have n_visible + n_label = {nv + nl} entries"
        )
    if not np.all((data == 0.0) | (data == 1.0)):
        raise ValueError("training data must be binary")

    w_vh = rng.normal(0.0, init_sigma, size=(nv, nh))
    w_lh = rng.normal(0.0, init_sigma, size=(nl, nh))
    b_v = np.zeros(nv)
    b_h = np.zeros(nh)
    b_l = np.zeros(nl)
    blocks = _RbmBlocks(w_vh, w_lh, b_v, b_h, b_l, layout)

    z_a = (rng.random(layout.n_units) < 0.5).astype(np.float64)
    z_b = (rng.random(layout.n_units) < 0.5).astype(np.float64)
    tempering = _RbmAstChain(blocks, schedule.ladder(), schedule.gamma, z_b, rng)

    n_items = data.shape[0]
    vis, hid, lab = layout.visible, layout.hidden, layout.label
    for t in range(1, schedule.updates + 1):
        idx = rng.integers(0, n_items, size=schedule.batch_size)
        v_d = data[idx, :nv]
        l_d = data[idx, nv:]
        h_mean = expit(v_d @ w_vh + l_d @ w_lh + b_h)

        _block_sweep(blocks, z_a, 1.0, rng)
        tempering.step()
        if tempering.level == tempering.target:
            z_a, z_b = z_b, z_a
            tempering.z = z_b

        v_m, l_m = z_a[vis], z_a[lab]
        hm_m = expit(v_m @ w_vh + l_m @ w_lh + b_h)

        eta = schedule.learning_rate(t)
        k = schedule.batch_size
        w_vh += eta * (v_d.T @ h_mean / k - np.outer(v_m, hm_m))
        w_lh += eta * (l_d.T @ h_mean / k - np.outer(l_m, hm_m))
        b_v += eta * (v_d.mean(axis=0) - v_m)
        b_l += eta * (l_d.mean(axis=0) - l_m)
        b_h += eta * (h_mean.mean(axis=0) - hm_m)

        if callback is not None:
            callback(t, blocks)

    n = layout.n_units
    w = np.zeros((n, n))
    w[vis, hid] = w_vh
    w[hid, vis] = w_vh.T
    w[lab, hid] = w_lh
    w[hid, lab] = w_lh.T
    b = np.concatenate([b_v, b_h, b_l])
    return BoltzmannMachine(w, b)
