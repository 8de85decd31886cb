"""Picture quality indices for completed tensors.

PSNR, SSIM and ERGAS are computed on frontal slices (mode 3, the band or
frame axis); SAM compares mode-3 fibers (spectra) pixel by pixel.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .tensor import as_tensor3

logger = logging.getLogger(__name__)

PSNR_CAP = 100.0
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11 x 11 window
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(ref, est):
    # fixed memory layout keeps reductions bitwise reproducible
    ref = np.ascontiguousarray(as_tensor3(ref, "ref"), dtype=float)
    est = np.ascontiguousarray(as_tensor3(est, "est"), dtype=float)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {est.shape}")
    return ref, est


def default_peak(ref):
    """Dynamic range of the reference, ``max - min`` (1.0 for constant data)."""
    span = float(np.max(ref) - np.min(ref))
    return span if span > 0 else 1.0


def psnr_slices(ref, est, peak=None):
    """Per-frontal-slice PSNR in dB, capped at 100 dB."""
    ref, est = _pair(ref, est)
    peak = default_peak(ref) if peak is None else float(peak)
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = np.mean((ref - est) ** 2, axis=(0, 1))
    out = np.full(mse.shape, PSNR_CAP)
    pos = mse > 0
    out[pos] = np.minimum(10.0 * np.log10(peak**2 / mse[pos]), PSNR_CAP)
    return out


def psnr(ref, est, peak=None):
    """Mean over frontal slices of ``10 log10(peak^2 / MSE)``."""
    return float(np.mean(psnr_slices(ref, est, peak)))


def _smooth(img):
    # reflect = symmetric padding (d c b a | a b c d)
    return gaussian_filter(img, SSIM_SIGMA, mode="reflect", radius=SSIM_RADIUS)


def ssim_map(x, y, peak):
    """SSIM index map of two 2-D images with an 11x11 Gaussian window."""
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mx, my = _smooth(x), _smooth(y)
    sxx = _smooth(x * x) - mx * mx
    syy = _smooth(y * y) - my * my
    sxy = _smooth(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim_slices(ref, est, peak=None):
    ref, est = _pair(ref, est)
    peak = default_peak(ref) if peak is None else float(peak)
    return np.array(
        [np.mean(ssim_map(ref[:, :, k], est[:, :, k], peak)) for k in range(ref.shape[2])]
    )


def ssim(ref, est, peak=None):
    """Single-scale SSIM averaged over frontal slices.

    Uses ``C1 = (0.01 peak)^2`` and ``C2 = (0.03 peak)^2``. Borders are
    handled by symmetric padding, so slices smaller than the window are
    accepted.
    """
    return float(np.mean(ssim_slices(ref, est, peak)))


def ergas(ref, est, scale_ratio=1.0):
    """``100 * scale_ratio * sqrt(mean_b MSE_b / mean_b(ref)^2)`` over bands."""
    ref, est = _pair(ref, est)
    means = np.mean(ref, axis=(0, 1))
    if np.any(means == 0):
        raise ValueError("ERGAS is undefined for a band with zero mean")
    mse = np.mean((ref - est) ** 2, axis=(0, 1))
    return float(100.0 * scale_ratio * np.sqrt(np.mean(mse / means**2)))


def spectral_angles(ref, est):
    """Angle in radians between the mode-3 fibers at every pixel.

    Pixels where either fiber is zero get NaN.
    """
    ref, est = _pair(ref, est)
    na = np.linalg.norm(ref, axis=2, keepdims=True)
    nb = np.linalg.norm(est, axis=2, keepdims=True)
    valid = (na[..., 0] > 0) & (nb[..., 0] > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ua, ub = ref / na, est / nb
    # 2 atan2(|ua - ub|, |ua + ub|) stays accurate for nearly parallel fibers
    ang = 2.0 * np.arctan2(np.linalg.norm(ua - ub, axis=2), np.linalg.norm(ua + ub, axis=2))
    return np.where(valid, ang, np.nan)


def sam(ref, est):
    """Mean spectral angle (radians), skipping pixels with a zero fiber."""
    ang = spectral_angles(ref, est)
    if np.all(np.isnan(ang)):
        return float("nan")
    return float(np.nanmean(ang))


@dataclass
class QualityReport:
    psnr: float
    ssim: float
    ergas: float
    sam: float
    peak: float
    scale_ratio: float = 1.0
    sam_skipped: int = 0
    per_slice: dict = field(default_factory=dict)

    def to_dict(self, per_slice=False):
        out = {
            "psnr": self.psnr,
            "ssim": self.ssim,
            "ergas": self.ergas,
            "sam": self.sam,
            "peak": self.peak,
            "scale_ratio": self.scale_ratio,
            "sam_skipped": self.sam_skipped,
        }
        if per_slice:
            out["per_slice"] = {k: [float(x) for x in v] for k, v in self.per_slice.items()}
        return out


def quality_report(ref, est, peak=None, scale_ratio=1.0):
    """All indices at once, plus per-slice PSNR/SSIM curves.

    The ``fsim`` curve is a NaN placeholder kept for table compatibility.
    """
    ref, est = _pair(ref, est)
    peak = default_peak(ref) if peak is None else float(peak)
    p = psnr_slices(ref, est, peak)
    s = ssim_slices(ref, est, peak)
    try:
        e = ergas(ref, est, scale_ratio)
    except ValueError as exc:
        logger.warning("%s; reporting NaN", exc)
        e = float("nan")
    ang = spectral_angles(ref, est)
    skipped = int(np.sum(np.isnan(ang)))
    return QualityReport(
        psnr=float(np.mean(p)),
        ssim=float(np.mean(s)),
        ergas=e,
        sam=sam(ref, est),
        peak=peak,
        scale_ratio=float(scale_ratio),
        sam_skipped=skipped,
        per_slice={"psnr": p, "ssim": s, "fsim": np.full(ref.shape[2], np.nan)},
    )
