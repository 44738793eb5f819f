"""Sparse-view, low-photon X-ray CT reconstruction benchmark.

Simulates parallel-beam photon-count measurements under Poisson noise,
reconstructs with FBP / MLE / MAP-TV, scores with Pearson correlation and
scattering-transform distance, and sweeps photon levels into aggregate
tables for noise-resilience studies.
"""

from .dtns import read_tensor, verify_manifest, write_tensor
from .fbp import FbpConfig, FbpWindow, fbp_reconstruct, ramp_filter
from .metrics import (MetricsReport, ScatteringConfig,
                      UndefinedCorrelationError, pearson_r,
                      scattering_coeffs, scattering_distance)
from .phantoms import (ImageGrid, PhantomKind, PhantomSpec, ScanGeometry,
                       derive_geometry, make_phantom, make_random_ellipses,
                       make_shepp_logan)
from .photon import (PhotonMeasurement, expected_counts, log_transform,
                     simulate_counts)
from .projector import (Sinogram, back_project, estimate_operator_norm,
                        forward_project)
from .solvers import (ArmijoParams, InitMode, MapTvConfig, MleConfig,
                      ReconReport, map_tv_reconstruct, map_tv_solve,
                      mle_reconstruct, mle_solve, poisson_nll,
                      poisson_nll_gradient, select_tv_weight, tv_prox,
                      tv_value)
from .sweep import (Algorithm, Split, SweepConfig, SweepRow, SweepTable,
                    aggregate_log_stats, calibrate_tv_weights,
                    export_dataset, run_sweep)

__version__ = "0.1.0"
