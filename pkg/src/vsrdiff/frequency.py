"""Per-frame 2-D Fourier analysis, binary band masks, and band-wise PSNR.

Videos are real arrays shaped (T, C, H, W) in [0, 1]; spectra are
complex128 arrays of the same shape under the unnormalized forward /
1/(H*W) inverse convention, so Parseval reads
``sum |x|^2 == sum |F(x)|^2 / (H*W)``.

All functions are pure and safe to call concurrently on distinct inputs.
"""

from __future__ import annotations

import numpy as np

Spectrum = np.ndarray  # complex128, shape (..., H, W)

PSNR_CAP_DB = 100.0
_PSNR_MSE_FLOOR = 1e-10


def dft2(frames: np.ndarray) -> Spectrum:
    """Unnormalized forward 2-D DFT over the two trailing axes."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim < 2 or frames.shape[-1] < 2 or frames.shape[-2] < 2:
        raise ValueError(f"dft2: trailing dims must be at least 2x2, got {frames.shape}")
    return np.fft.fft2(frames, axes=(-2, -1))


def dft2_direct(frames: np.ndarray) -> Spectrum:
    """Matrix-product DFT; slow but transparent, must agree with dft2."""
    frames = np.asarray(frames, dtype=np.float64)
    h, w = frames.shape[-2], frames.shape[-1]
    bh = _dft_basis(h)
    bw = _dft_basis(w)
    return np.einsum("uh,...hw,vw->...uv", bh, frames.astype(np.complex128), bw)


def _dft_basis(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def idft2(spectrum: Spectrum) -> np.ndarray:
    """Inverse 2-D DFT; returns the real part.

    For spectra of real signals filtered by a conjugate-symmetric mask the
    imaginary residue is at numerical-noise level.
    """
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    return np.fft.ifft2(spectrum, axes=(-2, -1)).real


def make_lowpass(h: int, w: int, rho: float) -> np.ndarray:
    """Binary radial low-pass mask of shape (H, W) in DFT index order.

    A bin passes when its centered frequency radius, normalized so the
    farthest corner sits at radius 1, is at most ``rho``.  rho = 1 therefore
    passes every bin, and the DC bin always passes.  The mask is symmetric
    under the conjugate-symmetry index map, so band-filtered spectra of
    real signals invert to real signals.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"make_lowpass: rho must be in (0, 1], got {rho}")
    if h < 2 or w < 2:
        raise ValueError(f"make_lowpass: extents must be at least 2, got {h}x{w}")
    fu = np.fft.fftfreq(h) * h  # centered integer frequencies in DFT order
    fv = np.fft.fftfreq(w) * w
    hn = h // 2
    wn = w // 2
    r2 = (fu[:, None] / hn) ** 2 + (fv[None, :] / wn) ** 2
    return (r2 <= 2.0 * rho * rho + 1e-12).astype(np.float64)


def split_bands(video: np.ndarray, mask: np.ndarray) -> tuple[Spectrum, Spectrum]:
    """Split a video's spectrum into (low, high) bands via a binary mask."""
    video = np.asarray(video)
    if mask.shape != video.shape[-2:]:
        raise ValueError(f"split_bands: mask {mask.shape} does not match frames {video.shape}")
    spec = dft2(video)
    return spec * mask, spec * (1.0 - mask)


def band_videos(video: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct the low- and high-band videos of a (T, C, H, W) input."""
    low, high = split_bands(video, mask)
    return idft2(low), idft2(high)


def psnr_scalar(mse: float, peak: float = 1.0) -> float:
    """PSNR in dB with the 100 dB cap for effectively zero error."""
    if mse < _PSNR_MSE_FLOOR:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB))


def band_psnr(video: np.ndarray, reference: np.ndarray, mask: np.ndarray) -> tuple[float, float]:
    """Frame-averaged PSNR of the low and high bands of video vs reference.

    Both inputs are (T, C, H, W) in [0, 1]; the PSNR of each band is
    computed per frame between the band-filtered videos and averaged.
    """
    video = np.asarray(video)
    reference = np.asarray(reference)
    if video.shape != reference.shape:
        raise ValueError(f"band_psnr: shape mismatch {video.shape} vs {reference.shape}")
    x_low, x_high = band_videos(video, mask)
    r_low, r_high = band_videos(reference, mask)
    vals = []
    for xb, rb in ((x_low, r_low), (x_high, r_high)):
        per_frame = np.mean((xb - rb) ** 2, axis=(1, 2, 3))
        vals.append(float(np.mean([psnr_scalar(m) for m in per_frame])))
    return vals[0], vals[1]


def spectrum_energy(spectrum: Spectrum) -> float:
    return float(np.sum(np.abs(spectrum) ** 2))
