"""Clock-driven LIF sampling networks.

A neuron is "on" (z = 1) from each spike until the end of its refractory
period.  Strong balanced Poisson background noise makes the stationary
activation of a free neuron approximately logistic in its leak potential;
calibrating that logistic (slope alpha, midpoint) lets Boltzmann parameters
(w, b) be translated into synaptic amplitudes and per-neuron leak shifts.

The translation matches the mean postsynaptic potential over one presynaptic
refractory period to the target interaction w/alpha.  The current-based
(CUBA) parameter set from the effective fast-membrane model is the default;
the conductance-based (COBA) variant sits behind ``model_kind``.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import expit

from . import _kernels
from .boltzmann import BoltzmannMachine
from .samplers import SampleTrace
from .stp import StpParams


class CalibrationError(RuntimeError):
    """Raised when the logistic fit of the activation function is too poor."""


@dataclass(frozen=True)
class LifParams:
    """Single-neuron parameters (nF, ms, mV)."""

    c_m: float
    tau_m: float
    tau_ref: float
    tau_syn: float
    v_thresh: float
    v_reset: float
    e_leak: float
    model_kind: str = "cuba"
    e_rev_exc: float = 0.0
    e_rev_inh: float = -100.0

    def __post_init__(self):
        if min(self.c_m, self.tau_m, self.tau_ref, self.tau_syn) <= 0.0:
            raise ValueError("capacitance and time constants must be positive")
        if self.v_reset > self.v_thresh:
            raise ValueError("v_reset must not exceed v_thresh")
        if self.model_kind not in ("cuba", "coba"):
            raise ValueError(f"unknown model_kind {self.model_kind!r}")

    @property
    def g_leak(self):
        return self.c_m / self.tau_m

    @classmethod
    def cuba_defaults(cls):
        return cls(c_m=0.2, tau_m=0.1, tau_ref=10.0, tau_syn=10.0,
                   v_thresh=-50.0, v_reset=-50.01, e_leak=-50.0, model_kind="cuba")

    @classmethod
    def coba_defaults(cls):
        # the published table lists the inhibitory reversal potential as
        # +100 mV; that is treated as a sign typo and -100 mV is used
        return cls(c_m=0.1, tau_m=20.0, tau_ref=10.0, tau_syn=10.0,
                   v_thresh=-50.0, v_reset=-53.0, e_leak=-50.0, model_kind="coba",
                   e_rev_exc=0.0, e_rev_inh=-100.0)


@dataclass(frozen=True)
class NoiseConfig:
    """Background Poisson input: rates in kHz, weights in nA (CUBA, signed)
    or uS (COBA, magnitudes routed to the exc/inh conductance channels)."""

    rate_exc: float
    rate_inh: float
    weight_exc: float
    weight_inh: float

    def __post_init__(self):
        if self.rate_exc < 0.0 or self.rate_inh < 0.0:
            raise ValueError("noise rates must be nonnegative")

    @classmethod
    def cuba_defaults(cls):
        return cls(rate_exc=0.4, rate_inh=0.4, weight_exc=0.3, weight_inh=-0.3)

    @classmethod
    def coba_defaults(cls):
        return cls(rate_exc=5.0, rate_inh=5.0, weight_exc=0.0012, weight_inh=0.0012)


@dataclass(frozen=True)
class Calibration:
    """Logistic fit p(z=1) = sigma(alpha * e_leak - beta_shift).

    alpha is the slope in 1/mV, beta_shift = alpha * midpoint is the
    dimensionless offset, residual_rms the fit quality.
    """

    alpha: float
    beta_shift: float
    residual_rms: float
    e_values: np.ndarray | None = None
    p_values: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")

    @property
    def midpoint(self) -> float:
        """Leak potential at which the isolated neuron is on half the time."""
        return self.beta_shift / self.alpha

    def activation(self, e_leak):
        return expit(self.alpha * np.asarray(e_leak) - self.beta_shift)


@dataclass(frozen=True)
class LifNetworkConfig:
    """Complete description of one sampling network.

    weights[post, pre] are biological amplitudes (nA for CUBA, uS for COBA
    with negative entries marking the inhibitory channel) and already include
    the 1/u0 normalization that pins the first released fraction to the
    nominal amplitude.  Resource dynamics are stored per presynaptic neuron:
    the pool lives in the presynaptic terminal, so all outgoing synapses of a
    neuron share it.
    """

    params: LifParams
    weights: np.ndarray
    e_leak: np.ndarray
    noise: NoiseConfig
    stp_u0: np.ndarray
    stp_tau_rec: np.ndarray
    stp_tau_fac: np.ndarray
    use_stp: bool = True
    clamp_current: np.ndarray | None = None
    calibration: Calibration | None = None
    dt: float = 0.1

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        n = w.shape[0]
        if w.ndim != 2 or w.shape != (n, n):
            raise ValueError("weights must be square")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("self-synapses must be zero")
        e = np.ascontiguousarray(self.e_leak, dtype=np.float64)
        if e.shape != (n,):
            raise ValueError("e_leak must have one entry per neuron")
        cl = self.clamp_current
        cl = np.zeros(n) if cl is None else np.ascontiguousarray(cl, dtype=np.float64)
        if cl.shape != (n,):
            raise ValueError("clamp_current must have one entry per neuron")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.dt > self.params.tau_syn / 10.0:
            warnings.warn(
                f"dt = {self.dt} ms exceeds tau_syn/10; integration may be unstable",
                stacklevel=2,
            )
        for name in ("stp_u0", "stp_tau_rec", "stp_tau_fac"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have one entry per neuron")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "e_leak", e)
        object.__setattr__(self, "clamp_current", cl)

    @property
    def n_neurons(self):
        return self.e_leak.shape[0]

    @classmethod
    def single_neuron(cls, params, noise, e_leak, dt=0.1):
        """Free neuron without recurrent synapses (calibration workhorse)."""
        return cls(
            params=params,
            weights=np.zeros((1, 1)),
            e_leak=np.array([float(e_leak)]),
            noise=noise,
            stp_u0=np.ones(1),
            stp_tau_rec=np.zeros(1),
            stp_tau_fac=np.zeros(1),
            use_stp=False,
            dt=dt,
        )


def simulate(config: LifNetworkConfig, duration, rng, sample_interval=1.0,
             record_spikes=True):
    """Integrate the network for ``duration`` ms.

    Returns (spike_trains, trace): per-neuron sorted spike-time arrays (or
    None when recording is off) and a SampleTrace of binary states read every
    sample_interval ms, where z = 1 means the neuron is refractory.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    p = config.params
    dt = config.dt
    n = config.n_neurons
    n_steps = int(round(duration / dt))
    stride = max(1, int(round(sample_interval / dt)))
    n_samples = n_steps // stride
    n_ref_steps = int(round(p.tau_ref / dt))

    if record_spikes:
        # minimum inter-spike interval is tau_ref, so this bound is strict
        cap = n * (int(duration / p.tau_ref) + 2)
        spike_ids = np.empty(cap, dtype=np.int64)
        spike_times = np.empty(cap, dtype=np.float64)
    else:
        spike_ids = np.empty(0, dtype=np.int64)
        spike_times = np.empty(0, dtype=np.float64)
    out = np.zeros((n_samples, n), dtype=np.uint8)

    coba = p.model_kind == "coba"
    noise = config.noise
    w_inh = abs(noise.weight_inh) if coba else noise.weight_inh
    n_spk = _kernels.lif_chain_kernel(
        config.weights, config.e_leak, config.clamp_current,
        coba, p.e_rev_exc, p.e_rev_inh,
        p.c_m, p.tau_m, p.tau_syn, p.v_thresh, p.v_reset, n_ref_steps,
        config.stp_u0, config.stp_tau_rec, config.stp_tau_fac, config.use_stp,
        noise.rate_exc, noise.rate_inh, noise.weight_exc, w_inh,
        dt, n_steps, stride, record_spikes, spike_ids, spike_times, out, rng,
    )

    times = (np.arange(n_samples, dtype=np.float64) + 1.0) * stride * dt
    trace = SampleTrace(out, np.ones(n_samples, dtype=bool), times)
    if not record_spikes:
        return None, trace
    ids = spike_ids[:n_spk]
    ts = spike_times[:n_spk]
    trains = [np.sort(ts[ids == i]) for i in range(n)]
    return trains, trace


def extract_states(spike_trains, tau_ref, sample_times) -> SampleTrace:
    """Binary states from spike trains: z_k(t) = 1 iff t is within tau_ref
    after (and including) one of neuron k's spikes."""
    times = np.asarray(sample_times, dtype=np.float64)
    if np.any(np.diff(times) < 0):
        raise ValueError("sample_times must be sorted")
    n = len(spike_trains)
    out = np.zeros((times.shape[0], n), dtype=np.uint8)
    for k, train in enumerate(spike_trains):
        tr = np.asarray(train, dtype=np.float64)
        if tr.shape[0] == 0:
            continue
        pos = np.searchsorted(tr, times, side="right") - 1
        hit = pos >= 0
        hit[hit] &= (times[hit] - tr[pos[hit]]) < tau_ref
        out[:, k] = hit
    return SampleTrace(out, np.ones(times.shape[0], dtype=bool), times)


# ---------------------------------------------------------------------------
# Calibration


def noise_voltage_std(params: LifParams, noise: NoiseConfig) -> float:
    """Campbell estimate of the free-membrane-potential std (CUBA)."""
    var_i = (noise.rate_exc * noise.weight_exc ** 2
             + noise.rate_inh * noise.weight_inh ** 2) * params.tau_syn / 2.0
    return math.sqrt(var_i) / params.g_leak


def _activation_probe(params, noise, e_leak, duration, rng, dt):
    cfg = LifNetworkConfig.single_neuron(params, noise, e_leak, dt=dt)
    _, trace = simulate(cfg, duration, rng, sample_interval=dt, record_spikes=False)
    return float(trace.states.mean())


def calibrate(params: LifParams, noise: NoiseConfig, rng, n_points=17,
              t_point=50_000.0, t_probe=5_000.0, dt=0.1,
              max_residual=0.02) -> Calibration:
    """Measure the activation function of a free neuron and fit a logistic.

    Bisects for the midpoint leak potential, spans the ~1%..99% activation
    range with n_points leak values, measures each as (time refractory)/
    (total time), then least-squares fits sigma(alpha*(E - E0)).  Raises
    CalibrationError if the fit RMS exceeds max_residual (a sign of a bad
    noise regime).
    """
    if noise.rate_exc <= 0.0 or noise.rate_inh <= 0.0:
        raise ValueError("calibration needs background noise on both channels")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    probe = lambda e, t=t_probe: _activation_probe(params, noise, e, t, rng, dt)  # noqa: E731

    # bracket the midpoint: activation is monotone in the leak potential
    lo, hi = params.v_thresh - 100.0, params.v_thresh + 100.0
    while probe(lo) > 0.4:
        lo -= 100.0
    while probe(hi) < 0.6:
        hi += 100.0
    for _ in range(24):
        mid = 0.5 * (lo + hi)
        if hi - lo < 0.01:
            break
        if probe(mid) < 0.5:
            lo = mid
        else:
            hi = mid
    e_mid = 0.5 * (lo + hi)

    # slope scale: walk outward until activation leaves [0.05, 0.95]
    step = max(noise_voltage_std(params, noise), 1e-3) if params.model_kind == "cuba" else 1.0
    span = step
    while probe(e_mid + span) < 0.95 and span < 1e4:
        span *= 1.6
    span *= 1.25  # stretch to reach ~0.99 at the grid edge

    e_grid = np.linspace(e_mid - span, e_mid + span, n_points)
    p_meas = np.array([probe(e, t_point) for e in e_grid])

    def logistic(e, alpha, e0):
        return expit(alpha * (e - e0))

    popt, _ = curve_fit(
        logistic, e_grid, p_meas,
        p0=(2.2 / span, e_mid),
        bounds=((1e-6, e_mid - 2 * span), (np.inf, e_mid + 2 * span)),
        maxfev=10_000,
    )
    alpha, e0 = float(popt[0]), float(popt[1])
    residual = float(np.sqrt(np.mean((logistic(e_grid, alpha, e0) - p_meas) ** 2)))
    if residual > max_residual:
        raise CalibrationError(
            f"activation fit RMS {residual:.4f} exceeds {max_residual}; "
            "noise regime unsuitable for sampling"
        )
    return Calibration(alpha, alpha * e0, residual, e_grid, p_meas)


# ---------------------------------------------------------------------------
# Boltzmann -> biological translation


def _psp_mean_over_refractory(tau_syn, tau_eff, tau_ref):
    """Mean of (exp(-t/tau_syn) - exp(-t/tau_eff)) / (1/tau_eff - 1/tau_syn)
    over [0, tau_ref]; the equal-time-constant limit is the alpha kernel."""
    if abs(tau_syn - tau_eff) < 1e-9 * tau_syn:
        tau = tau_syn
        integral = tau * tau - math.exp(-tau_ref / tau) * tau * (tau_ref + tau)
        return integral / tau_ref
    d = 1.0 / tau_eff - 1.0 / tau_syn
    bracket = (tau_syn * (1.0 - math.exp(-tau_ref / tau_syn))
               - tau_eff * (1.0 - math.exp(-tau_ref / tau_eff)))
    return bracket / (d * tau_ref)


def synapse_amplitude_per_weight(params: LifParams, noise: NoiseConfig,
                                 calibration: Calibration) -> float:
    """Drive amplitude (nA of peak current) per unit Boltzmann weight.

    Matches the mean postsynaptic potential over the presynaptic refractory
    period to w/alpha: J = (w/alpha) * C_m / mean_psp_per_unit_drive.
    """
    if params.model_kind == "cuba":
        tau_eff = params.tau_m
    else:
        g_tot = (params.g_leak
                 + noise.rate_exc * abs(noise.weight_exc) * params.tau_syn
                 + noise.rate_inh * abs(noise.weight_inh) * params.tau_syn)
        tau_eff = params.c_m / g_tot
    mean_psp = _psp_mean_over_refractory(params.tau_syn, tau_eff, params.tau_ref)
    return params.c_m / (calibration.alpha * mean_psp)


def translate(machine: BoltzmannMachine, calibration: Calibration,
              params: LifParams, noise: NoiseConfig | None = None,
              stp: StpParams | None = None, dt=0.1) -> LifNetworkConfig:
    """Build the sampling network for a Boltzmann machine.

    Biases become per-neuron leak shifts E_k = midpoint + b_k/alpha; weights
    become synaptic amplitudes via the mean-PSP match, divided by the
    presynaptic u0 so the first spike after rest delivers the nominal
    amplitude (the resource dynamics then modulate around it).  For COBA the
    drive is converted to a conductance with the reversal-potential distance
    at the mean free potential, excitatory or inhibitory by weight sign.
    """
    if noise is None:
        noise = NoiseConfig.cuba_defaults() if params.model_kind == "cuba" \
            else NoiseConfig.coba_defaults()
    if stp is None:
        stp = StpParams.renewing(params.tau_syn)
    if stp.u0 <= 0.0:
        raise ValueError("translation requires u0 > 0")

    n = machine.n_units
    j_per_w = synapse_amplitude_per_weight(params, noise, calibration)
    drive = machine.weights * j_per_w
    if params.model_kind == "coba":
        mu = calibration.midpoint
        w_bio = np.zeros_like(drive)
        pos = drive > 0.0
        neg = drive < 0.0
        w_bio[pos] = drive[pos] / (params.e_rev_exc - mu)
        # store inhibitory conductances as negative entries
        w_bio[neg] = -(drive[neg] / (params.e_rev_inh - mu))
        if np.any(w_bio[pos] <= 0.0) or np.any(w_bio[neg] >= 0.0):
            raise ValueError("reversal potentials must bracket the mean potential")
    else:
        w_bio = drive
    w_bio = w_bio / stp.u0

    e_leak = calibration.midpoint + machine.biases / calibration.alpha
    return LifNetworkConfig(
        params=params,
        weights=w_bio,
        e_leak=e_leak,
        noise=noise,
        stp_u0=np.full(n, stp.u0),
        stp_tau_rec=np.full(n, stp.tau_rec),
        stp_tau_fac=np.full(n, stp.tau_fac),
        use_stp=True,
        calibration=calibration,
        dt=dt,
    )


def clamp(config: LifNetworkConfig, mask, drive_mv=25.0) -> LifNetworkConfig:
    """Pin neurons by strong constant current injection.

    mask entries: 1 forces continuous refractory-paced firing, 0 silences,
    None (or -1) leaves the neuron free.  The drive shifts the equilibrium
    potential by +-drive_mv, far beyond the background fluctuations.
    """
    values = np.array([-1 if m is None else int(m) for m in mask], dtype=np.int64)
    if values.shape != (config.n_neurons,):
        raise ValueError(
            f"mask length {values.shape[0]} does not match {config.n_neurons} neurons"
        )
    if np.any((values < -1) | (values > 1)):
        raise ValueError("mask entries must be 0, 1 or None")
    p = config.params
    if p.model_kind == "cuba":
        unit = p.g_leak
    else:
        unit = (p.g_leak
                + config.noise.rate_exc * abs(config.noise.weight_exc) * p.tau_syn
                + config.noise.rate_inh * abs(config.noise.weight_inh) * p.tau_syn)
    current = config.clamp_current.copy()
    current[values == 1] = drive_mv * unit
    current[values == 0] = -drive_mv * unit
    return replace(config, clamp_current=current)
