"""wcp-prior: Wasserstein complexity penalization priors, analytic and numerical."""

from .catalog import CATALOG, density_table, evaluate_distance
from .errors import WcpError

__all__ = ["CATALOG", "WcpError", "density_table", "evaluate_distance"]
__version__ = "0.1.0"
