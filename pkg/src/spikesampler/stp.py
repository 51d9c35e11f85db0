"""Tsodyks-Markram synaptic resource dynamics.

A synapse carries a pool of resources R in [0, 1] and a utilization U in
[0, 1].  Between spikes R recovers toward 1 with tau_rec and U decays toward
0 with tau_fac; a presynaptic spike first raises U by u0*(1 - U), then
releases U*R of the pool.  The released fraction scales the postsynaptic
amplitude.  (u0, tau_rec, tau_fac) = (1, 0, 0) is a static synapse;
(1, tau_syn, 0) renews the postsynaptic current instead of letting it pile up.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class StpParams:
    u0: float
    tau_rec: float  # ms
    tau_fac: float  # ms

    def __post_init__(self):
        if not 0.0 <= self.u0 <= 1.0:
            raise ValueError(f"u0 must be in [0, 1], got {self.u0}")
        if self.tau_rec < 0.0 or self.tau_fac < 0.0:
            raise ValueError("time constants must be nonnegative")

    @classmethod
    def static(cls):
        return cls(1.0, 0.0, 0.0)

    @classmethod
    def renewing(cls, tau_syn=10.0):
        return cls(1.0, tau_syn, 0.0)


@dataclass(frozen=True)
class SynapseState:
    resources: float = 1.0    # R
    utilization: float = 0.0  # U
    last_update: float = 0.0  # ms

    def __post_init__(self):
        if not (0.0 <= self.resources <= 1.0 and 0.0 <= self.utilization <= 1.0):
            raise ValueError("R and U must stay in [0, 1]")


def stp_advance(state: SynapseState, params: StpParams, dt_elapsed) -> SynapseState:
    """Relax R and U over a spike-free interval (closed form).

    tau_rec = 0 pins R back to 1 instantly; tau_fac = 0 drops U to 0 (it is
    re-raised by the next spike).
    """
    if dt_elapsed < 0.0:
        raise ValueError("dt_elapsed must be nonnegative")
    if dt_elapsed == 0.0:
        return state
    if params.tau_rec > 0.0:
        r = 1.0 - (1.0 - state.resources) * math.exp(-dt_elapsed / params.tau_rec)
    else:
        r = 1.0
    if params.tau_fac > 0.0:
        u = state.utilization * math.exp(-dt_elapsed / params.tau_fac)
    else:
        u = 0.0
    return SynapseState(r, u, state.last_update + dt_elapsed)


def stp_on_spike(state: SynapseState, params: StpParams):
    """Apply a spike to an already-advanced synapse.

    Utilization jumps before the release, so facilitation boosts the spike
    that caused it.  Returns the new state and the released fraction U+ * R.
    """
    u_plus = state.utilization + params.u0 * (1.0 - state.utilization)
    efficacy = u_plus * state.resources
    r_after = state.resources * (1.0 - u_plus)
    return SynapseState(r_after, u_plus, state.last_update), efficacy


def spike_train_efficacies(spike_times, params: StpParams):
    """Released fraction for each spike of a presynaptic train (times in ms)."""
    state = SynapseState(1.0, 0.0, float(spike_times[0]) if len(spike_times) else 0.0)
    out = []
    prev = state.last_update
    for t in spike_times:
        state = stp_advance(state, params, float(t) - prev)
        state, eff = stp_on_spike(state, params)
        out.append(eff)
        prev = float(t)
    return out
