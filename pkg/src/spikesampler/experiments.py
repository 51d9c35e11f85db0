"""Batch experiment driver: config ingestion, seeded runs, persistence.

Run configs are YAML documents (comment-friendly); every run is fully
determined by the config plus a seed, and metric files contain no
wall-clock data, so re-running a config reproduces them byte for byte.
Seeds (and sweep grid points) can execute in parallel worker processes.
"""

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, serialize
from .boltzmann import (
    BoltzmannMachine,
    empirical_distribution,
    exact_distribution,
    kl_divergence,
)
from .datasets import (
    digit_corpus,
    generate_bars,
    bar_templates,
    half_clamp_mask,
    load_mnist_idx,
    make_imbalanced,
    to_training_vectors,
    train_test_split,
)
from .evaluation import (
    IslConfig,
    classify,
    isl_curve,
    mode_dwell_histogram,
    modes_from_labels,
    modes_from_templates,
)
from .lif import (
    LifParams,
    NoiseConfig,
    calibrate,
    clamp,
    simulate,
    translate,
)
from .samplers import (
    RbmLayout,
    TemperatureLadder,
    TrainingSchedule,
    ast_chain,
    cast_train,
    gibbs_chain,
)
from .stp import StpParams

EXPERIMENT_KINDS = (
    "sample-target",
    "train",
    "generate",
    "classify",
    "sweep-stp",
    "pattern-complete",
    "calibrate",
    "compare",
)

WORKERS_ENV = "SPIKESAMPLER_WORKERS"

# one classical sweep corresponds to one state-refresh time of the spiking
# network, i.e. the refractory period (10 ms)
MS_PER_SWEEP = 10.0


class ConfigError(ValueError):
    def __init__(self, fieldname, message):
        super().__init__(f"config field '{fieldname}': {message}")
        self.fieldname = fieldname


class RunError(RuntimeError):
    pass


@dataclass
class RunConfig:
    experiment: str
    seeds: list
    out_dir: str
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config document must be a mapping")
        kind = doc.get("experiment")
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                "experiment", f"must be one of {', '.join(EXPERIMENT_KINDS)}; got {kind!r}"
            )
        seeds = doc.get("seeds", [0])
        if isinstance(seeds, int):
            seeds = [seeds]
        if not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds", "must be a nonempty list of integers")
        out_dir = doc.get("out_dir")
        if not out_dir:
            raise ConfigError("out_dir", "is required")
        for key in ("machine", "dataset"):
            section = doc.get(key)
            if isinstance(section, dict) and "path" in section:
                if not os.path.exists(section["path"]):
                    raise ConfigError(f"{key}.path", f"{section['path']} does not exist")
        return cls(kind, list(seeds), str(out_dir), dict(doc))

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        with open(path) as f:
            doc = yaml.safe_load(f)
        return cls.from_dict(doc)

    def canonical_hash(self) -> str:
        """Stable under key reordering: hash of sorted-key JSON."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str
    outputs: dict          # seed -> list of file names
    timings: dict          # seed -> wall seconds
    failures: dict = field(default_factory=dict)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(
                {
                    "config_hash": self.config_hash,
                    "version": self.version,
                    "outputs": {str(k): v for k, v in self.outputs.items()},
                    "timings": {str(k): v for k, v in self.timings.items()},
                    "failures": {str(k): v for k, v in self.failures.items()},
                },
                f,
                indent=2,
            )


# ---------------------------------------------------------------------------
# Config section builders


def _build_machine(section, rng) -> BoltzmannMachine:
    if section is None:
        raise ConfigError("machine", "is required for this experiment")
    if "path" in section:
        return serialize.load_machine(section["path"])
    spec = section.get("random")
    if spec is None:
        raise ConfigError("machine", "needs 'path' or 'random'")
    return BoltzmannMachine.random(
        int(spec["n_units"]),
        float(spec.get("weight_scale", 0.6)),
        float(spec.get("bias_scale", 0.6)),
        rng=rng,
    )


def _build_dataset(section, rng):
    if section is None:
        raise ConfigError("dataset", "is required for this experiment")
    if "path" in section:
        return serialize.load_dataset(section["path"])
    kind = section.get("kind")
    if kind == "bars":
        return generate_bars(
            int(section.get("side", 10)),
            section.get("mode", "hard"),
            int(section.get("n_per_class", 40)),
            rng,
        )
    if kind == "digits":
        ds = digit_corpus(section.get("classes", [0, 1, 2]), rng,
                          section.get("mnist_dir"))
        counts = section.get("class_counts")
        if counts:
            ds = make_imbalanced(ds, {int(k): int(v) for k, v in counts.items()}, rng)
        return ds
    if kind == "mnist-idx":
        return load_mnist_idx(section["images"], section["labels"])
    raise ConfigError("dataset.kind", f"unknown kind {kind!r}")


def _build_layout(section) -> RbmLayout:
    if section is None:
        raise ConfigError("layout", "is required for this experiment")
    return RbmLayout(
        int(section["n_visible"]), int(section["n_hidden"]),
        int(section.get("n_label", 0)),
    )


def _build_schedule(section) -> TrainingSchedule:
    if section is None:
        raise ConfigError("schedule", "is required for training")
    return TrainingSchedule(
        updates=int(section["updates"]),
        batch_size=int(section["batch"]),
        eta=tuple(section.get("eta", (10.0, 2000.0))),
        gamma=tuple(section.get("gamma", (90.0, 150.0))),
        ladder_size=int(section.get("ladder", {}).get("count", 20)),
        beta_min=float(section.get("ladder", {}).get("beta_min", 0.9)),
    )


def _lif_params(section) -> LifParams:
    model = (section or {}).get("model", "cuba")
    if model == "cuba":
        return LifParams.cuba_defaults()
    if model == "coba":
        return LifParams.coba_defaults()
    raise ConfigError("lif.model", f"unknown model {model!r}")


def _noise_config(section, params) -> NoiseConfig:
    noise = (section or {}).get("noise")
    if noise:
        return NoiseConfig(**noise)
    return (NoiseConfig.cuba_defaults() if params.model_kind == "cuba"
            else NoiseConfig.coba_defaults())


def _stp_from(section) -> StpParams:
    if section is None:
        return StpParams.renewing(10.0)
    return StpParams(
        float(section.get("u0", 1.0)),
        float(section.get("tau_rec", 10.0)),
        float(section.get("tau_fac", 0.0)),
    )


def _sampler_trace(sampler, machine, rng, layout=None, n_valid=None, lif_ctx=None):
    """Run the configured sampler and return a trace of valid samples."""
    kind = sampler.get("kind")
    if kind == "gibbs":
        sweeps = int(n_valid if n_valid is not None else sampler.get("sweeps", 10_000))
        return gibbs_chain(machine, sweeps, rng, layout=layout)
    if kind == "ast":
        ladder = TemperatureLadder.equidistant(
            int(sampler.get("ladder", {}).get("count", 20)),
            float(sampler.get("ladder", {}).get("beta_min", 0.9)),
        )
        if n_valid is None:
            trace, _, _ = ast_chain(machine, int(sampler.get("steps", 10_000)), rng,
                                    ladder=ladder)
            return trace
        # run in blocks until the requested number of valid samples is in
        chunks = []
        got = 0
        ast = None
        while got < n_valid:
            trace, _, ast = ast_chain(machine, 4096, rng, ladder=ladder, ast=ast)
            chunks.append(trace)
            got += int(trace.valid.sum())
        states = np.concatenate([t.valid_states() for t in chunks])[:n_valid]
        times = np.arange(1.0, n_valid + 1.0)
        from .samplers import SampleTrace

        return SampleTrace(states, np.ones(n_valid, dtype=bool), times)
    if kind == "lif":
        if lif_ctx is None:
            raise ConfigError("sampler", "lif sampler needs calibration context")
        params, noise, cal = lif_ctx
        stp = _stp_from(sampler.get("stp"))
        config = translate(machine, cal, params, noise, stp=stp)
        if not sampler.get("stp_enabled", True):
            from dataclasses import replace

            config = replace(config, use_stp=False)
        n = int(n_valid if n_valid is not None else sampler.get("samples", 1000))
        duration = n * float(sampler.get("ms_per_sample", MS_PER_SWEEP))
        _, trace = simulate(config, duration, rng,
                            sample_interval=float(sampler.get("ms_per_sample", MS_PER_SWEEP)),
                            record_spikes=False)
        return trace
    raise ConfigError("sampler.kind", f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Per-experiment bodies (each returns a list of written file names)


def _exp_calibrate(config, seed_dir, rng, doc):
    params = _lif_params(doc.get("lif"))
    noise = _noise_config(doc.get("lif"), params)
    cal = calibrate(params, noise, rng)
    out = seed_dir / "calibration.json"
    with open(out, "w") as f:
        json.dump(
            {"alpha": cal.alpha, "beta_shift": cal.beta_shift,
             "midpoint": cal.midpoint, "residual_rms": cal.residual_rms},
            f,
        )
    serialize.write_metric_csv(
        seed_dir / "activation.csv",
        ("e_leak", "p_on"),
        list(zip(cal.e_values.tolist(), cal.p_values.tolist())),
    )
    return ["calibration.json", "activation.csv"]


def _exp_train(config, seed_dir, rng, doc):
    dataset = _build_dataset(doc.get("dataset"), rng)
    layout = _build_layout(doc.get("layout"))
    schedule = _build_schedule(doc.get("schedule"))
    vectors = to_training_vectors(dataset, layout.n_label)
    machine = cast_train(layout, vectors, schedule, rng)
    serialize.save_machine(machine, seed_dir / "machine.json")
    return ["machine.json"]


def _exp_sample_target(config, seed_dir, rng, doc):
    machine = _build_machine(doc.get("machine"), rng)
    sampler = doc.get("sampler") or {"kind": "gibbs"}
    lif_ctx = None
    if sampler.get("kind") == "lif":
        params = _lif_params(doc.get("lif"))
        noise = _noise_config(doc.get("lif"), params)
        cal = calibrate(params, noise, rng)
        lif_ctx = (params, noise, cal)
    trace = _sampler_trace(sampler, machine, rng, lif_ctx=lif_ctx)
    serialize.save_trace(trace, seed_dir / "trace.txt")
    files = ["trace.txt"]
    if machine.n_units <= 20:
        target = exact_distribution(machine)
        emp = empirical_distribution(trace.valid_states(), machine.n_units)
        serialize.write_metric_csv(
            seed_dir / "kl.csv", ("n_samples", "kl_joint"),
            [(int(trace.valid.sum()), float(kl_divergence(emp, target)))],
        )
        files.append("kl.csv")
    return files


def _exp_generate(config, seed_dir, rng, doc):
    machine = _build_machine(doc.get("machine"), rng)
    layout = _build_layout(doc.get("layout"))
    dataset = _build_dataset(doc.get("dataset"), rng)
    test = dataset.pixels[: int(doc.get("n_test", 200))]
    sampler = doc.get("sampler") or {"kind": "gibbs"}
    n_samples = int(doc.get("n_samples", 1000))
    lif_ctx = None
    if sampler.get("kind") == "lif":
        params = _lif_params(doc.get("lif"))
        noise = _noise_config(doc.get("lif"), params)
        cal = calibrate(params, noise, rng)
        lif_ctx = (params, noise, cal)
    trace = _sampler_trace(sampler, machine, rng, layout=layout,
                           n_valid=n_samples, lif_ctx=lif_ctx)
    visible = trace.valid_states()[:, : layout.n_visible]
    checkpoints = doc.get("checkpoints") or [
        int(c) for c in np.unique(np.geomspace(10, n_samples, 12).astype(int))
    ]
    curve = isl_curve(test, visible, checkpoints,
                      IslConfig(float(doc.get("isl_beta", 0.95))))
    serialize.write_metric_csv(seed_dir / "isl_curve.csv",
                               ("n_samples", "mean_log_likelihood"), curve)
    return ["isl_curve.csv"]


def _exp_classify(config, seed_dir, rng, doc):
    machine = _build_machine(doc.get("machine"), rng)
    layout = _build_layout(doc.get("layout"))
    dataset = _build_dataset(doc.get("dataset"), rng)
    n_eval = min(int(doc.get("n_eval", 200)), len(dataset))
    classes = np.unique(dataset.labels)
    correct = 0
    for i in range(n_eval):
        pred = classify(machine, layout, dataset.pixels[i], rng,
                        n_sweeps=int(doc.get("n_sweeps", 60)))
        correct += int(classes[pred] == dataset.labels[i])
    serialize.write_metric_csv(
        seed_dir / "accuracy.csv", ("n_eval", "accuracy"),
        [(n_eval, correct / n_eval)],
    )
    return ["accuracy.csv"]


def _exp_sweep_stp(config, seed_dir, rng, doc):
    machine = _build_machine(doc.get("machine"), rng)
    if machine.n_units > 20:
        raise ConfigError("machine", "sweep-stp metric needs <= 20 units (exact KL)")
    sweep = doc.get("sweep")
    if not sweep or "axes" not in sweep:
        raise ConfigError("sweep.axes", "is required, e.g. {u0: [...], tau_rec: [...]}")
    axes = sweep["axes"]
    if len(axes) != 2:
        raise ConfigError("sweep.axes", "exactly two axes form a 2D slice")
    fixed = {"u0": 1.0, "tau_rec": 10.0, "tau_fac": 0.0}
    fixed.update(sweep.get("fixed", {}))
    (name_a, vals_a), (name_b, vals_b) = sorted(axes.items())
    params = _lif_params(doc.get("lif"))
    noise = _noise_config(doc.get("lif"), params)
    cal = calibrate(params, noise, rng)
    target = exact_distribution(machine)
    duration = float(doc.get("duration_ms", 100_000.0))
    rows = []
    for va in vals_a:
        for vb in vals_b:
            point = dict(fixed)
            point[name_a] = float(va)
            point[name_b] = float(vb)
            stp = StpParams(point["u0"], point["tau_rec"], point["tau_fac"])
            cfg = translate(machine, cal, params, noise, stp=stp)
            sub_rng = np.random.default_rng(rng.integers(0, 2**63))
            _, trace = simulate(cfg, duration, sub_rng, record_spikes=False)
            emp = empirical_distribution(trace, machine.n_units)
            rows.append((float(va), float(vb), float(kl_divergence(emp, target))))
    serialize.write_metric_csv(seed_dir / "sweep.csv", (name_a, name_b, "kl"), rows)
    best = min(rows, key=lambda r: r[2])
    serialize.write_metric_csv(seed_dir / "sweep_best.csv",
                               (name_a, name_b, "kl"), [best])
    return ["sweep.csv", "sweep_best.csv"]


def _exp_pattern_complete(config, seed_dir, rng, doc):
    machine = _build_machine(doc.get("machine"), rng)
    layout = _build_layout(doc.get("layout"))
    dataset = _build_dataset(doc.get("dataset"), rng)
    ref_idx = int(doc.get("reference_index", 0))
    mask = half_clamp_mask(dataset.width, dataset.height,
                           doc.get("half", "lower"), dataset.pixels[ref_idx])
    n_samples = int(doc.get("n_samples", 20_000))
    sampler = doc.get("sampler") or {"kind": "gibbs"}
    full_mask = np.concatenate(
        [mask.values, np.full(layout.n_hidden + layout.n_label, -1, dtype=np.int64)]
    )
    if sampler.get("kind") == "lif":
        params = _lif_params(doc.get("lif"))
        noise = _noise_config(doc.get("lif"), params)
        cal = calibrate(params, noise, rng)
        stp = _stp_from(sampler.get("stp"))
        cfg = translate(machine, cal, params, noise, stp=stp)
        cfg = clamp(cfg, [None if v == -1 else int(v) for v in full_mask])
        ms = float(sampler.get("ms_per_sample", MS_PER_SWEEP))
        _, trace = simulate(cfg, n_samples * ms, rng, sample_interval=ms,
                            record_spikes=False)
        window = int(sampler.get("mode_window", 10))
    else:
        clamped = _clamped_gibbs(machine, layout, full_mask, n_samples, rng)
        trace = clamped
        window = int(sampler.get("mode_window", 10))
    modes = modes_from_labels(trace, layout, window=window)
    dwell = mode_dwell_histogram(modes)
    occ = dwell.occupancy(layout.n_label)
    serialize.write_metric_csv(
        seed_dir / "occupancy.csv", ("mode", "fraction"),
        [(int(i), float(f)) for i, f in enumerate(occ)],
    )
    return ["occupancy.csv"]


def _clamped_gibbs(machine, layout, mask, n_sweeps, rng):
    """Gibbs chain with masked units frozen at their clamp values."""
    from .samplers import SampleTrace, _RbmBlocks
    from scipy.special import expit

    blocks = _RbmBlocks.from_machine(machine, layout)
    z = (rng.random(machine.n_units) < 0.5).astype(np.float64)
    fixed = mask >= 0
    z[fixed] = mask[fixed].astype(np.float64)
    lo = layout
    states = np.empty((n_sweeps, machine.n_units), dtype=np.uint8)
    v_fixed = fixed[lo.visible]
    for sweep in range(n_sweeps):
        v, h, l = z[lo.visible], z[lo.hidden], z[lo.label]
        v_new = (rng.random(lo.n_visible)
                 < expit(blocks.w_vh @ h + blocks.b_v)).astype(np.float64)
        v[~v_fixed] = v_new[~v_fixed]
        h[:] = rng.random(lo.n_hidden) < expit(
            v @ blocks.w_vh + l @ blocks.w_lh + blocks.b_h
        )
        l[:] = rng.random(lo.n_label) < expit(blocks.w_lh @ h + blocks.b_l)
        states[sweep] = z.astype(np.uint8)
    times = np.arange(1.0, n_sweeps + 1.0)
    return SampleTrace(states, np.ones(n_sweeps, dtype=bool), times)


def _exp_compare(config, seed_dir, rng, doc):
    machine = _build_machine(doc.get("machine"), rng)
    layout = _build_layout(doc.get("layout"))
    dataset = _build_dataset(doc.get("dataset"), rng)
    n_valid = int(doc.get("n_samples", 1000))
    test = dataset.pixels[: int(doc.get("n_test", 200))]
    checkpoints = [int(c) for c in np.unique(np.geomspace(10, n_valid, 10).astype(int))]
    params = _lif_params(doc.get("lif"))
    noise = _noise_config(doc.get("lif"), params)
    cal = calibrate(params, noise, rng)
    lif_ctx = (params, noise, cal)
    samplers = doc.get("samplers") or [
        {"kind": "gibbs"},
        {"kind": "ast"},
        {"kind": "lif", "stp": doc.get("stp", {"u0": 0.01, "tau_rec": 280.0})},
    ]
    files = []
    for sampler in samplers:
        name = sampler["kind"]
        trace = _sampler_trace(sampler, machine, rng, layout=layout,
                               n_valid=n_valid, lif_ctx=lif_ctx)
        visible = trace.valid_states()[:, : layout.n_visible]
        curve = isl_curve(test, visible, checkpoints)
        serialize.write_metric_csv(seed_dir / f"isl_{name}.csv",
                                   ("n_samples", "mean_log_likelihood"), curve)
        files.append(f"isl_{name}.csv")
        if layout.n_label > 0:
            modes = modes_from_labels(trace, layout, window=10)
            dwell = mode_dwell_histogram(modes)
            lengths, counts = dwell.histogram()
            serialize.write_metric_csv(
                seed_dir / f"dwell_{name}.csv", ("dwell_samples", "count"),
                list(zip(lengths.tolist(), counts.tolist())),
            )
            files.append(f"dwell_{name}.csv")
    return files


_EXPERIMENT_BODIES = {
    "calibrate": _exp_calibrate,
    "train": _exp_train,
    "sample-target": _exp_sample_target,
    "generate": _exp_generate,
    "classify": _exp_classify,
    "sweep-stp": _exp_sweep_stp,
    "pattern-complete": _exp_pattern_complete,
    "compare": _exp_compare,
}


def _run_seed(config: RunConfig, seed: int):
    seed_dir = Path(config.out_dir) / f"seed{seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    body = _EXPERIMENT_BODIES[config.experiment]
    t0 = time.time()
    files = body(config, seed_dir, rng, config.raw)
    return files, time.time() - t0


def _run_seed_entry(doc, seed):
    return _run_seed(RunConfig.from_dict(doc), seed)


def run(config: RunConfig, workers=None) -> RunManifest:
    """Execute the experiment for every seed; write and return the manifest."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    manifest = RunManifest(config.canonical_hash(), __version__, {}, {})
    if workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                seed: pool.submit(_run_seed_entry, config.raw, seed)
                for seed in config.seeds
            }
            for seed, fut in futures.items():
                try:
                    files, elapsed = fut.result()
                    manifest.outputs[seed] = files
                    manifest.timings[seed] = elapsed
                except Exception as exc:  # noqa: BLE001 - recorded per seed
                    manifest.failures[seed] = str(exc)
    else:
        for seed in config.seeds:
            try:
                files, elapsed = _run_seed(config, seed)
                manifest.outputs[seed] = files
                manifest.timings[seed] = elapsed
            except Exception as exc:  # noqa: BLE001
                manifest.failures[seed] = str(exc)
    manifest.save(out_dir / "manifest.json")
    if manifest.failures and not manifest.outputs:
        raise RunError(f"all seeds failed: {manifest.failures}")
    return manifest


def sweep_stp(config: RunConfig, workers=None) -> RunManifest:
    if config.experiment != "sweep-stp":
        raise ConfigError("experiment", "sweep_stp needs experiment: sweep-stp")
    return run(config, workers)


def compare_samplers(config: RunConfig, workers=None) -> RunManifest:
    if config.experiment != "compare":
        raise ConfigError("experiment", "compare_samplers needs experiment: compare")
    return run(config, workers)
