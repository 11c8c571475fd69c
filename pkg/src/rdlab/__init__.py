"""Generalized Gaussian entropy coding and scaling-law analysis toolkit."""

__version__ = "0.1.0"

from .codec import (
    CodecConfig,
    EncodedImage,
    decode_image,
    encode_image,
    psnr,
    rd_loss,
    rd_sweep,
)
from .coder import CdfTable, rc_decode, rc_encode
from .ggm import GGMParams, build_cdf_table, ggm_cdf, ggm_pmf_integer, rate_bits
from .imageio import ImageBuffer, load_image, save_image
from .metrics import RDCurve, RDPoint, bd_psnr, bd_rate, pearson
from .scaling import (
    PowerLawFit,
    ScalePoint,
    TrainingCurve,
    compute_pflops,
    evaluate_fit,
    fit_power_law,
    fit_power_law_floor,
    forecast_report,
    pareto_frontier,
)


def __getattr__(name):
    # keeps scikit-learn out of the import path of the command line tool
    if name == "PowerLawRegressor":
        from .estimator import PowerLawRegressor

        return PowerLawRegressor
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "CdfTable",
    "CodecConfig",
    "EncodedImage",
    "GGMParams",
    "ImageBuffer",
    "PowerLawFit",
    "PowerLawRegressor",
    "RDCurve",
    "RDPoint",
    "ScalePoint",
    "TrainingCurve",
    "bd_psnr",
    "bd_rate",
    "build_cdf_table",
    "compute_pflops",
    "decode_image",
    "encode_image",
    "evaluate_fit",
    "fit_power_law",
    "fit_power_law_floor",
    "forecast_report",
    "ggm_cdf",
    "ggm_pmf_integer",
    "load_image",
    "pareto_frontier",
    "pearson",
    "psnr",
    "rate_bits",
    "rc_decode",
    "rc_encode",
    "rd_loss",
    "rd_sweep",
    "save_image",
]
