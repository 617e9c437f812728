"""SEQIHR epidemic model with age-stratified lockdown economics."""

from .calibration import default_params
from .integrator import IntegrationConfig, simulate
from .model import CompartmentState, ModelParams

__version__ = "0.1.0"
