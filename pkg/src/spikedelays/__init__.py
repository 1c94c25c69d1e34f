"""Feed-forward spiking networks with learnable per-neuron axonal delays.

The package trains spike-response-model networks whose hidden neurons
carry trainable output delays, capped per layer by an adaptive schedule
that grows each cap while the top delay bins stay crowded.
"""

from .errors import (
    BadMagic,
    ChannelOutOfRange,
    ConfigInvalid,
    CorruptPayload,
    DatasetMissing,
    IoError,
    MissingFile,
    NonConvergence,
    ShapeMismatch,
    SpikeDelaysError,
    TraceMissing,
    TruncatedFile,
    VersionMismatch,
)
from .events import EventStream, SpikeTensor, bin_events, load_events, write_events
from .data import BatchIterator, DatasetManifest, batch_iterator, load_manifest, write_manifest
from .kernels import KernelConfig, causal_conv, refractory_kernel, response_kernel
from .network import (
    ForwardTrace,
    LayerParams,
    Network,
    NetworkConfig,
    axonal_delay_forward,
    clip_delays,
    count_params,
    init_network,
    network_forward,
    srm_forward,
)
from .scheduler import (
    DelayHistogram,
    ScheduleResult,
    SchedulerConfig,
    SchedulerState,
    delay_histogram,
    run_schedule,
    scheduler_decide,
    window_fraction,
)
from .training import (
    Gradients,
    LossConfig,
    SurrogateConfig,
    adam_step,
    backward,
    init_adam_state,
    loss_and_grad,
    surrogate_derivative,
    train_steps,
)

__version__ = "0.1.0"
