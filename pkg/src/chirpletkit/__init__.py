"""Adaptive Gaussian chirplet decomposition (MPEM) with time-frequency tools."""

from .core import (
    DT_MIN,
    ChirpletAtom,
    ChirpletParams,
    Decomposition,
    add_noise,
    energy,
    inner_product,
    make_analytic,
    reconstruct,
    sample_chirplet,
)
from .dictionary import DictionaryConfig, build_dictionary
from .estimator import EstimatorOptions, mpem_decompose
from .io import load_decomposition, load_signal, save_decomposition
from .spectra import acs, stft_spectrogram

__version__ = "0.1.0"

__all__ = [
    "DT_MIN",
    "ChirpletAtom",
    "ChirpletParams",
    "Decomposition",
    "DictionaryConfig",
    "EstimatorOptions",
    "acs",
    "add_noise",
    "build_dictionary",
    "energy",
    "inner_product",
    "load_decomposition",
    "load_signal",
    "make_analytic",
    "mpem_decompose",
    "reconstruct",
    "sample_chirplet",
    "save_decomposition",
    "stft_spectrogram",
]
