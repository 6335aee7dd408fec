"""Numerical modulation-space toolkit: STFT norms, dilation exponents,
symbol classes, Kohn-Nirenberg quantization and the experiment runner."""

from .grid import (
    Grid,
    GridMismatchError,
    PreconditionError,
    SampledSignal,
    dft,
    idft,
    dilate,
    lp_norm,
    modulate,
    translate,
)
from .indices import ExponentPair, critical_order, gap, mu1, mu2, region
from .tfa import band_norm, bump_window, gaussian_window, mixed_lpq_norm, modulation_norm, stft

__version__ = "0.1.0"
