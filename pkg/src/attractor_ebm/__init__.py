"""Energy-based recurrent state-space model with a continuous-attractor memory.

A hierarchy of Gaussian layers trained by local Hebbian gradient flow
predicts action-conditioned observations; Langevin dynamics performs
prior and posterior sampling; a fixed low-rank attractor network
compresses the observation-action history into the top-layer prior.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .envs import (
    Episode,
    EyeMoveEnv,
    GridWorldEnv,
    PatchGrid,
    SequenceEnv,
    patchify,
    synth_rotating_bars,
    synth_smooth_images,
    unpatchify,
)
from .errors import ConfigError, ContractError, DivergenceError, FormatError
from .harness import (
    MetricsLog,
    TrainConfig,
    eval_eyemove_init_k,
    eval_sequence_replay,
    evaluate_mse,
    generate_whole_image,
    imagine,
    init_memory_protocol,
    train,
)
from .hierarchy import (
    HierarchyParams,
    LayerStack,
    layer_loss,
    layer_mean,
    learn_layer,
    posterior_sample,
    predict_mean,
    sample_prior_stack,
    step_observation,
)
from .memory import (
    MemorySpec,
    MemoryState,
    build_recurrent,
    cann_step,
    encode_action,
    memory_update,
)
from .rng import BatchedStreams, RngStream

__version__ = "0.1.0"
