"""Rigid registration of simulated 4D ultrasound frames to a reference 3D volume."""

from .evaluation import (PerturbationRanges, TrialRecord, export_correlation, run_dataset,
                         run_trial, sample_reference_transform)
from .optimizer import OptResult, SimplexConfig, minimize
from .phantom import PhantomSpec, generate
from .registration import (RegistrationConfig, RegistrationResult, is_success, register_frame,
                           track_sequence)
from .segmentation import RoiMask, SegmentationConfig, otsu_threshold, segment_roi
from .similarity import NccResult, ncc
from .transform import (ErrorDecomposition, RigidTransform, compose, error_of, from_params,
                        invert, to_params)
from .volume import (PlaneSpec, SliceSet, Volume3D, extract_slices, load_volume,
                     orthogonal_layout, sample_trilinear, save_volume)

__version__ = "0.1.0"
