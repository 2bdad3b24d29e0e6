"""Graph-contrastive node anomaly detection with a configurable view pool."""

__version__ = "0.1.0"

from .graph import Graph, NormalizedAdjacency, load_graph, save_graph  # noqa: F401
from .injection import InjectionSpec, inject_benchmark  # noqa: F401
from .contrast import CombinationConfig, decode_view, pair_scale  # noqa: F401
from .trainer import TrainConfig, train  # noqa: F401
from .scoring import compute_auc, score_rounds  # noqa: F401
