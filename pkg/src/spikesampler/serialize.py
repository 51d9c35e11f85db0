"""File formats.

Machines and network configs are JSON documents; floats are rendered with
repr (shortest form that round-trips exactly, at most 17 significant
digits), so save/load is bit-exact.  Sample traces and spike trains are
plain text, one record per line.  Image datasets pack their pixel bits into
base64 blocks.
"""

import base64
import csv
import json

import numpy as np

from .boltzmann import BoltzmannMachine
from .datasets import ImageDataset
from .lif import Calibration, LifNetworkConfig, LifParams, NoiseConfig
from .samplers import SampleTrace


def _floats(array):
    return [float(x) for x in np.asarray(array).reshape(-1)]


def machine_to_dict(machine: BoltzmannMachine) -> dict:
    return {
        "n_units": machine.n_units,
        "weights": _floats(machine.weights),  # row-major dense
        "biases": _floats(machine.biases),
    }


def machine_from_dict(doc: dict) -> BoltzmannMachine:
    n = int(doc["n_units"])
    w = np.asarray(doc["weights"], dtype=np.float64).reshape(n, n)
    b = np.asarray(doc["biases"], dtype=np.float64)
    return BoltzmannMachine(w, b)


def save_machine(machine: BoltzmannMachine, path):
    with open(path, "w") as f:
        json.dump(machine_to_dict(machine), f)


def load_machine(path) -> BoltzmannMachine:
    with open(path) as f:
        return machine_from_dict(json.load(f))


# ---------------------------------------------------------------------------
# LIF network configs


def lif_config_to_dict(config: LifNetworkConfig) -> dict:
    p = config.params
    doc = {
        "n_neurons": config.n_neurons,
        "params": {
            "c_m": p.c_m, "tau_m": p.tau_m, "tau_ref": p.tau_ref,
            "tau_syn": p.tau_syn, "v_thresh": p.v_thresh, "v_reset": p.v_reset,
            "e_leak": p.e_leak, "model_kind": p.model_kind,
            "e_rev_exc": p.e_rev_exc, "e_rev_inh": p.e_rev_inh,
        },
        "weights": _floats(config.weights),
        "e_leak": _floats(config.e_leak),
        "noise": {
            "rate_exc": config.noise.rate_exc, "rate_inh": config.noise.rate_inh,
            "weight_exc": config.noise.weight_exc, "weight_inh": config.noise.weight_inh,
        },
        "stp": {
            "u0": _floats(config.stp_u0),
            "tau_rec": _floats(config.stp_tau_rec),
            "tau_fac": _floats(config.stp_tau_fac),
            "enabled": bool(config.use_stp),
        },
        "clamp_current": _floats(config.clamp_current),
        "dt": config.dt,
    }
    if config.calibration is not None:
        c = config.calibration
        doc["calibration"] = {
            "alpha": c.alpha, "beta_shift": c.beta_shift,
            "residual_rms": c.residual_rms,
        }
    return doc


def lif_config_from_dict(doc: dict) -> LifNetworkConfig:
    n = int(doc["n_neurons"])
    cal = None
    if "calibration" in doc:
        c = doc["calibration"]
        cal = Calibration(c["alpha"], c["beta_shift"], c["residual_rms"])
    return LifNetworkConfig(
        params=LifParams(**doc["params"]),
        weights=np.asarray(doc["weights"], dtype=np.float64).reshape(n, n),
        e_leak=np.asarray(doc["e_leak"], dtype=np.float64),
        noise=NoiseConfig(**doc["noise"]),
        stp_u0=np.asarray(doc["stp"]["u0"], dtype=np.float64),
        stp_tau_rec=np.asarray(doc["stp"]["tau_rec"], dtype=np.float64),
        stp_tau_fac=np.asarray(doc["stp"]["tau_fac"], dtype=np.float64),
        use_stp=bool(doc["stp"]["enabled"]),
        clamp_current=np.asarray(doc["clamp_current"], dtype=np.float64),
        calibration=cal,
        dt=float(doc["dt"]),
    )


def save_lif_config(config: LifNetworkConfig, path):
    with open(path, "w") as f:
        json.dump(lif_config_to_dict(config), f)


def load_lif_config(path) -> LifNetworkConfig:
    with open(path) as f:
        return lif_config_from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Traces and spike trains


def save_trace(trace: SampleTrace, path):
    """One line per sample: time, validity flag, bitstring."""
    with open(path, "w") as f:
        for t, v, row in zip(trace.times, trace.valid, trace.states):
            bits = "".join("1" if b else "0" for b in row)
            f.write(f"{t!r} {int(v)} {bits}\n")


def load_trace(path) -> SampleTrace:
    times, valid, states = [], [], []
    with open(path) as f:
        for line in f:
            t, v, bits = line.split()
            times.append(float(t))
            valid.append(bool(int(v)))
            states.append([int(c) for c in bits])
    return SampleTrace(np.asarray(states, dtype=np.uint8),
                       np.asarray(valid), np.asarray(times))


def save_spike_trains(spike_trains, path):
    """One line per spike: neuron_id time_ms, in time order per neuron."""
    with open(path, "w") as f:
        for i, train in enumerate(spike_trains):
            for t in train:
                f.write(f"{i} {float(t)!r}\n")


def load_spike_trains(path, n_neurons) -> list:
    trains = [[] for _ in range(n_neurons)]
    with open(path) as f:
        for line in f:
            i, t = line.split()
            trains[int(i)].append(float(t))
    return [np.asarray(t, dtype=np.float64) for t in trains]


# ---------------------------------------------------------------------------
# Datasets


def dataset_to_dict(dataset: ImageDataset) -> dict:
    packed = np.packbits(dataset.pixels, axis=1)
    doc = {
        "width": dataset.width,
        "height": dataset.height,
        "n_items": len(dataset),
        "pixels_b64": base64.b64encode(packed.tobytes()).decode("ascii"),
    }
    if dataset.labels is not None:
        doc["labels"] = [int(x) for x in dataset.labels]
    return doc


def dataset_from_dict(doc: dict) -> ImageDataset:
    n = int(doc["n_items"])
    d = int(doc["width"]) * int(doc["height"])
    raw = base64.b64decode(doc["pixels_b64"])
    packed = np.frombuffer(raw, dtype=np.uint8).reshape(n, -1)
    pixels = np.unpackbits(packed, axis=1)[:, :d]
    labels = np.asarray(doc["labels"], dtype=np.int64) if "labels" in doc else None
    return ImageDataset(int(doc["width"]), int(doc["height"]), pixels, labels)


def save_dataset(dataset: ImageDataset, path):
    with open(path, "w") as f:
        json.dump(dataset_to_dict(dataset), f)


def load_dataset(path) -> ImageDataset:
    with open(path) as f:
        return dataset_from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Metric tables


def write_metric_csv(path, header, rows):
    """Comma-separated table with a header row; floats rendered via repr."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
