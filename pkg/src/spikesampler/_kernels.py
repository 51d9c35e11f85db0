"""Numba kernels for the hot simulation loops.

Every kernel draws randomness exclusively through Generator.random(), one
scalar at a time, so traces are bit-reproducible from the seed and the
Python-level reference implementations can consume the identical stream.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def gibbs_chain_kernel(weights, biases, state, beta, n_sweeps, record_every, out_states, rng):
    """Sequential-scan Gibbs sampling; one Bernoulli draw per unit per sweep.

    Units are updated in ascending index order against the partially updated
    state.  Records into out_states after every record_every-th sweep and
    returns the number of recorded rows.
    """
    n = biases.shape[0]
    rec = 0
    for sweep in range(n_sweeps):
        for k in range(n):
            u = biases[k]
            for i in range(n):
                u += weights[k, i] * state[i]
            p = 1.0 / (1.0 + math.exp(-beta * u))
            state[k] = 1.0 if rng.random() < p else 0.0
        if (sweep + 1) % record_every == 0:
            for i in range(n):
                out_states[rec, i] = np.uint8(state[i])
            rec += 1
    return rec


@njit(cache=True)
def ast_chain_kernel(
    weights,
    biases,
    state,
    betas,
    log_g,
    level0,
    t0,
    gamma_num,
    gamma_off,
    target_level,
    n_steps,
    out_states,
    out_levels,
    out_valid,
    rng,
):
    """Adaptive simulated tempering chain.

    Per step: full Gibbs sweep at the current ladder temperature, a +-1
    random-walk proposal on the ladder (off-ladder proposals rejected, which
    keeps the proposal ratio at 1), Metropolis acceptance with unnormalized
    state probabilities and the adaptive weights, then the multiplicative
    weight update g_i *= (1 + gamma_t) on the visited level.  log_g is
    updated in place; returns (level, step_count) after the last step.
    """
    n = biases.shape[0]
    n_levels = betas.shape[0]
    level = level0
    t = t0
    for step in range(n_steps):
        beta = betas[level]
        for k in range(n):
            u = biases[k]
            for i in range(n):
                u += weights[k, i] * state[i]
            p = 1.0 / (1.0 + math.exp(-beta * u))
            state[k] = 1.0 if rng.random() < p else 0.0
        out_valid[step] = np.uint8(1) if level == target_level else np.uint8(0)
        for i in range(n):
            out_states[step, i] = np.uint8(state[i])

        e = 0.0
        for k in range(n):
            if state[k] != 0.0:
                row = 0.0
                for i in range(n):
                    row += weights[k, i] * state[i]
                e -= 0.5 * row + biases[k]

        prop = level - 1 if rng.random() < 0.5 else level + 1
        if 0 <= prop < n_levels:
            log_ratio = (betas[level] - betas[prop]) * e + log_g[level] - log_g[prop]
            # 1 - U is uniform on (0, 1], so the log never hits -inf
            if math.log(1.0 - rng.random()) < log_ratio:
                level = prop

        t += 1
        gamma = gamma_num / (gamma_off + t)
        log_g[level] += math.log1p(gamma)
        out_levels[step] = level
    return level, t


@njit(cache=True)
def lif_chain_kernel(
    weights,
    e_leak,
    clamp_current,
    coba,
    e_rev_exc,
    e_rev_inh,
    c_m,
    tau_m,
    tau_syn,
    v_thresh,
    v_reset,
    n_ref_steps,
    stp_u0,
    stp_tau_rec,
    stp_tau_fac,
    use_stp,
    rate_exc,
    rate_inh,
    w_noise_exc,
    w_noise_inh,
    dt,
    n_steps,
    sample_stride,
    record_spikes,
    spike_ids,
    spike_times,
    out_states,
    rng,
):
    """Clock-driven LIF network with presynaptic resource dynamics.

    Exponential-Euler membrane integration with synaptic inputs held constant
    over each step.  Spikes are stamped at the end of the step in which the
    threshold is crossed; the membrane is clamped at v_reset for exactly
    n_ref_steps further steps, during which the binary state reads 1.
    Synaptic state: one exponentially decaying current per neuron (CUBA,
    signed) or excitatory/inhibitory conductances (COBA, split by weight
    sign).  Background noise is event-driven with exponential inter-arrival
    times.  Resource variables live on the presynaptic neuron and scale all
    of its outgoing synapses identically.
    """
    n = e_leak.shape[0]
    g_l = c_m / tau_m
    decay_m = math.exp(-dt / tau_m)
    decay_syn = math.exp(-dt / tau_syn)

    u = e_leak.copy()
    syn_a = np.zeros(n)  # CUBA: total current; COBA: excitatory conductance
    syn_b = np.zeros(n)  # COBA only: inhibitory conductance (magnitudes)
    refrac = np.zeros(n, dtype=np.int64)
    spike_buf = np.empty(n, dtype=np.int64)

    stp_r = np.ones(n)
    stp_u = np.zeros(n)
    last_spike = np.full(n, -1.0e300)

    big = 1.0e300
    next_exc = np.empty(n)
    next_inh = np.empty(n)
    for i in range(n):
        next_exc[i] = -math.log(1.0 - rng.random()) / rate_exc if rate_exc > 0.0 else big
        next_inh[i] = -math.log(1.0 - rng.random()) / rate_inh if rate_inh > 0.0 else big

    n_spk = 0
    rec = 0
    for step in range(n_steps):
        t_end = (step + 1) * dt
        n_buf = 0
        for i in range(n):
            if refrac[i] > 0:
                refrac[i] -= 1
                u[i] = v_reset
            else:
                if coba:
                    g_tot = g_l + syn_a[i] + syn_b[i]
                    u_inf = (
                        g_l * e_leak[i]
                        + syn_a[i] * e_rev_exc
                        + syn_b[i] * e_rev_inh
                        + clamp_current[i]
                    ) / g_tot
                    dec = math.exp(-dt * g_tot / c_m)
                else:
                    u_inf = e_leak[i] + (syn_a[i] + clamp_current[i]) / g_l
                    dec = decay_m
                u[i] = u_inf + (u[i] - u_inf) * dec
                if u[i] >= v_thresh:
                    u[i] = v_reset
                    refrac[i] = n_ref_steps
                    spike_buf[n_buf] = i
                    n_buf += 1
                    if record_spikes and n_spk < spike_ids.shape[0]:
                        spike_ids[n_spk] = i
                        spike_times[n_spk] = t_end
                    n_spk += 1

        for i in range(n):
            syn_a[i] *= decay_syn
            if coba:
                syn_b[i] *= decay_syn

        for s in range(n_buf):
            j = spike_buf[s]
            eff = 1.0
            if use_stp:
                gap = t_end - last_spike[j]
                if stp_tau_rec[j] > 0.0:
                    r = 1.0 - (1.0 - stp_r[j]) * math.exp(-gap / stp_tau_rec[j])
                else:
                    r = 1.0
                if stp_tau_fac[j] > 0.0:
                    uu = stp_u[j] * math.exp(-gap / stp_tau_fac[j])
                else:
                    uu = 0.0
                u_plus = uu + stp_u0[j] * (1.0 - uu)
                eff = u_plus * r
                stp_r[j] = r * (1.0 - u_plus)
                stp_u[j] = u_plus
                last_spike[j] = t_end
            for m in range(n):
                w = weights[m, j]
                if w != 0.0:
                    if coba:
                        if w > 0.0:
                            syn_a[m] += w * eff
                        else:
                            syn_b[m] += (-w) * eff
                    else:
                        syn_a[m] += w * eff

        for i in range(n):
            while next_exc[i] <= t_end:
                syn_a[i] += w_noise_exc
                next_exc[i] += -math.log(1.0 - rng.random()) / rate_exc
            while next_inh[i] <= t_end:
                if coba:
                    syn_b[i] += w_noise_inh
                else:
                    syn_a[i] += w_noise_inh
                next_inh[i] += -math.log(1.0 - rng.random()) / rate_inh

        if (step + 1) % sample_stride == 0 and rec < out_states.shape[0]:
            for i in range(n):
                out_states[rec, i] = np.uint8(1) if refrac[i] > 0 else np.uint8(0)
            rec += 1

    return n_spk
