from .components import connected_components
from .wcds import WcdsResult, extract_wcds
from .ncut import Clustering, normalized_cut

__all__ = [
    "Clustering",
    "WcdsResult",
    "connected_components",
    "extract_wcds",
    "normalized_cut",
]
