"""OS-net: shallow neural ODEs with a skew-symmetric weight product, plus
orbital-stability diagnostics for learned and reference dynamics."""
from .model import ActivationSpec, OsNet, forward, init_net, j_matrix, load_checkpoint, regularizer, save_checkpoint
from .ode import DivergenceError, Trajectory, VectorField, integrate
from .stability import analyze_attractor, corollary_report, floquet_stability, krein_central_zone, monodromy
from .systems import SystemSpec, make_field
from .train import TrainConfig, train

__all__ = [
    "ActivationSpec", "OsNet", "forward", "init_net", "j_matrix", "load_checkpoint", "regularizer",
    "save_checkpoint", "DivergenceError", "Trajectory", "VectorField", "integrate",
    "analyze_attractor", "corollary_report", "floquet_stability", "krein_central_zone", "monodromy",
    "SystemSpec", "make_field", "TrainConfig", "train",
]

__version__ = "0.1.0"
