"""Problem builders for the saddle-point solver."""

from .data import ImageSpec, circles_phantom, make_noise, smooth_edges_image, two_region_image
from .imaging import (build_compressed_sensing, build_rof, build_segmentation, build_tvl1,
                      rof_dual_energy, rof_energy, rof_saddle_value, segmentation_weights,
                      total_variation, tvl1_energy)
from .lp import (LPInstance, build_lp, diagonal_preconditioner, lp_local_gap, random_packing_lp,
                 sc50b_like, with_equalities)
from .signal import build_linf_approx, linf_split, random_fourier_rows, random_signal

__all__ = [
    "ImageSpec", "circles_phantom", "make_noise", "smooth_edges_image", "two_region_image",
    "build_compressed_sensing", "build_rof", "build_segmentation", "build_tvl1",
    "rof_dual_energy", "rof_energy", "rof_saddle_value", "segmentation_weights",
    "total_variation", "tvl1_energy",
    "LPInstance", "build_lp", "diagonal_preconditioner", "lp_local_gap", "random_packing_lp", "sc50b_like",
    "with_equalities",
    "build_linf_approx", "linf_split", "random_fourier_rows", "random_signal",
]
