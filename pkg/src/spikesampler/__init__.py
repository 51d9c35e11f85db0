"""Sampling from binary energy-based models with spiking networks.

Exact reference machinery (boltzmann), classical Gibbs/tempering samplers
and the tempered trainer (samplers), the clock-driven LIF network with
synaptic resource dynamics (lif, stp), data generators (datasets), quality
metrics (evaluation, tsne), file formats (serialize) and the batch
experiment driver (experiments, cli).
"""

from .boltzmann import (
    BoltzmannMachine,
    DiscreteDistribution,
    conditional_on,
    empirical_distribution,
    energy,
    exact_distribution,
    kl_divergence,
    marginal_over,
)
from .datasets import (
    ClampMask,
    ImageDataset,
    generate_bars,
    half_clamp_mask,
    load_mnist_idx,
    make_imbalanced,
)
from .evaluation import (
    IslConfig,
    ModeTrace,
    classify,
    isl_curve,
    isl_log_likelihood,
    mean_interaction_strength,
    mode_dwell_histogram,
    opt_baseline,
    pom_baseline,
)
from .lif import (
    Calibration,
    LifNetworkConfig,
    LifParams,
    NoiseConfig,
    calibrate,
    clamp,
    extract_states,
    simulate,
    translate,
)
from .samplers import (
    AstState,
    RbmLayout,
    SampleTrace,
    TemperatureLadder,
    TrainingSchedule,
    ast_chain,
    ast_effective_rate,
    ast_step,
    block_gibbs_sweep,
    cast_train,
    gibbs_chain,
    gibbs_sweep,
)
from .stp import StpParams, SynapseState, stp_advance, stp_on_spike
from .tsne import TsneConfig, tsne_embed

__version__ = "0.1.0"
