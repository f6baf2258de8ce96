"""View-selective deep learning for WiFi CSI localization."""
from .baselines import DNNRegressor, VDLRegressor
from .channel import ChannelParams, CsiDataset, Topology, default_topology, generate_dataset
from .config import ExperimentConfig, TrainConfig, load_config
from .csi import ViewSpec, featurize, normalize_view_label, relative_csi
from .evaluation import ErrorReport, error_cdf, localization_error, run_experiment
from .model import Stage1Model, Stage2Model, VSDLRegressor
from .pipeline import LocalizationModel, train_system

__version__ = "0.1.0"
