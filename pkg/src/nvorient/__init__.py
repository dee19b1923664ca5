"""CW-ODMR simulation and microwave-field orientation reconstruction for NV
centers under a transverse static bias field."""

__version__ = "0.1.0"

from . import fitkit, geometry, odmrsim, reconstruct, sensitivity, spinmodel  # noqa: F401
from .errors import NvOrientError  # noqa: F401
