"""Spike-encoded EMG classification with a self-regulating spiking reservoir."""

from .dataio import Trial, TrialSet, load_trials, session_folds, synth_trials, trim_set
from .encoding import EncoderParams, EventStream, encode_trial, grid_search_thresholds
from .errors import ArtifactError, ConfigError, DataError, NumericError
from .neuron import NeuronParams, NeuronState
from .plasticity import CriticalParams, measure_global_branching
from .reservoir import Raster, ReservoirEngine, SimulationConfig
from .topology import ReservoirSpec, Wiring, build_wiring

__version__ = "0.1.0"
