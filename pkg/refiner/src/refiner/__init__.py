"""UNet refinement of CT reconstructions, trained only on noise-free
inputs and evaluated on noisy test exports."""

from .dtns_io import (DtnsFormatError, load_manifest, manifest_tensor,
                      read_tensor, write_tensor)
from .evaluation import (aggregate_log_stats, evaluate, pearson_r, refine,
                         scattering_distances_via_cli)
from .training import RefinerConfig, load_model, train
from .unet import UNet

__version__ = "0.1.0"
