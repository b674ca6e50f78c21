"""Time-frequency images: closed-form chirplet WVD, the adaptive chirplet
spectrogram (ACS) and a Gaussian-window STFT spectrogram for comparison.

Grids are indexed ``values[freq, time]`` with time in samples and frequency
in rad/sample.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import TWO_PI, ChirpletAtom, Decomposition
from .errors import InvalidInputError

__all__ = [
    "TFGrid",
    "default_axes",
    "chirplet_wvd",
    "acs",
    "stft_spectrogram",
    "export_grid",
    "load_grid_csv",
]

PNG_FLOOR_DB = -60.0


@dataclass
class TFGrid:
    values: np.ndarray
    time_axis: np.ndarray
    freq_axis: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.time_axis = np.asarray(self.time_axis, dtype=np.float64)
        self.freq_axis = np.asarray(self.freq_axis, dtype=np.float64)
        if self.values.shape != (self.freq_axis.size, self.time_axis.size):
            raise InvalidInputError(
                f"grid shape {self.values.shape} does not match axes "
                f"({self.freq_axis.size}, {self.time_axis.size})"
            )
        for axis in (self.time_axis, self.freq_axis):
            if axis.size > 1 and not np.all(np.diff(axis) > 0):
                raise InvalidInputError("grid axes must be strictly increasing")

    @property
    def cell_area(self) -> float:
        """Area of one cell in units of ``samples * rad/sample / (2 pi)``."""
        dt = self.time_axis[1] - self.time_axis[0] if self.time_axis.size > 1 else 1.0
        dw = self.freq_axis[1] - self.freq_axis[0] if self.freq_axis.size > 1 else TWO_PI
        return float(dt * dw / TWO_PI)

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)


def default_axes(n: int):
    """``n`` time samples and ``n//2 + 1`` frequencies spanning ``[0, pi]``."""
    return np.arange(n, dtype=np.float64), np.linspace(0.0, math.pi, n // 2 + 1)


def _wrap(x):
    return (x + math.pi) % TWO_PI - math.pi


def chirplet_wvd(atom: ChirpletAtom, time_axis, freq_axis) -> TFGrid:
    """Closed-form Wigner-Ville distribution of one atom, scaled by ``|a|**2``.

    ``W(t, w) = 2 exp(-((t - tc)/dt)**2 - dt**2 (w - wc - 2c(t - tc))**2)``,
    with the frequency offset wrapped to ``(-pi, pi]``.
    """
    p = atom.params
    t = np.asarray(time_axis, dtype=np.float64)
    w = np.asarray(freq_axis, dtype=np.float64)
    tau = t - p.tc
    offset = _wrap(w[:, None] - p.omega - 2.0 * p.c * tau[None, :])
    values = (2.0 * atom.amp ** 2) * np.exp(-(tau[None, :] / p.dt) ** 2 - (p.dt * offset) ** 2)
    grid = TFGrid(values, t, w, {"source": "chirplet-wvd"})
    # +-3 spreads hold all but ~1e-4 of the energy
    lo, hi = p.tc - 3 * p.dt, p.tc + 3 * p.dt
    if t.size and (lo < t[0] or hi > t[-1]):
        grid.meta.setdefault("warnings", []).append("atom support exceeds time axis")
    return grid


def acs(d: Decomposition, time_axis=None, freq_axis=None) -> TFGrid:
    """Adaptive chirplet spectrogram: the sum of every atom's WVD."""
    t0, w0 = default_axes(d.n_samples)
    t = t0 if time_axis is None else np.asarray(time_axis, dtype=np.float64)
    w = w0 if freq_axis is None else np.asarray(freq_axis, dtype=np.float64)
    total = np.zeros((w.size, t.size))
    notes = []
    for atom in d.atoms:
        g = chirplet_wvd(atom, t, w)
        total += g.values
        notes.extend(g.meta.get("warnings", []))
    meta = {"source": "acs", "n_atoms": len(d.atoms)}
    if notes:
        meta["warnings"] = sorted(set(notes))
    return TFGrid(total, t, w, meta)


def _gaussian_window(length: int) -> np.ndarray:
    sigma = length / 6.0
    k = np.arange(length) - (length - 1) / 2.0
    return np.exp(-0.5 * (k / sigma) ** 2)


def stft_spectrogram(f, window_len: int = 11, hop: int = 1) -> TFGrid:
    """Magnitude-squared STFT with a Gaussian window (sigma = window_len / 6).

    One frame is centered on every ``hop``-th sample; frames overhanging the
    record are zero padded. Each frame is a length-N DFT, and the values are
    divided by ``N * sum(window**2) / hop`` so that for a unit hop the grid
    energy equals the signal energy up to edge losses.
    """
    f = np.asarray(f, dtype=np.complex128)
    n = f.size
    if window_len < 1 or window_len % 2 == 0:
        raise InvalidInputError("window_len must be a positive odd integer")
    if window_len > n:
        raise InvalidInputError(f"window of {window_len} samples exceeds signal length {n}")
    if hop < 1:
        raise InvalidInputError("hop must be >= 1")
    win = _gaussian_window(window_len)
    half = window_len // 2
    centers = np.arange(0, n, hop)
    frames = np.zeros((centers.size, n), dtype=np.complex128)
    for row, c in enumerate(centers):
        lo, hi = max(0, c - half), min(n, c + half + 1)
        frames[row, lo:hi] = f[lo:hi] * win[lo - c + half : hi - c + half]
    power = np.abs(np.fft.fft(frames, axis=1)) ** 2
    scale = n * float(np.sum(win ** 2)) / hop
    n_freq = n // 2 + 1
    values = power[:, :n_freq].T / scale
    freq_axis = TWO_PI * np.arange(n_freq) / n
    meta = {
        "source": "stft",
        "window": "gaussian",
        "window_len": window_len,
        "sigma": window_len / 6.0,
        "hop": hop,
        "normalization": "|DFT|^2 / (N * sum(window^2) / hop)",
    }
    return TFGrid(values, centers.astype(np.float64), freq_axis, meta)


def export_grid(g: TFGrid, path, fmt: str | None = None) -> None:
    """Write a grid as CSV (linear values) or 8-bit grayscale PNG (dB scale).

    CSV: the first row holds the time axis after an empty corner cell, and
    every following row starts with its frequency. PNG: ``10 log10`` of the
    max-normalized values, floored at -60 dB, highest frequency on top.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([""] + [repr(float(t)) for t in g.time_axis])
            for w, row in zip(g.freq_axis, g.values):
                writer.writerow([repr(float(w))] + [repr(float(v)) for v in row])
    elif fmt == "png":
        from PIL import Image

        Image.fromarray(_to_gray(g.values)[::-1], mode="L").save(path, format="PNG")
    else:
        raise InvalidInputError(f"unknown grid format {fmt!r}; use csv or png")


def _to_gray(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    peak = values.max() if values.size else 0.0
    if peak <= 0.0:
        return np.zeros(values.shape, dtype=np.uint8)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(np.clip(values, 0.0, None) / peak)
    db = np.clip(db, PNG_FLOOR_DB, 0.0)
    return np.round(255.0 * (db - PNG_FLOOR_DB) / -PNG_FLOOR_DB).astype(np.uint8)


def load_grid_csv(path) -> TFGrid:
    """Read a grid written by :func:`export_grid` in CSV format."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    time_axis = [float(v) for v in rows[0][1:]]
    freq_axis = [float(r[0]) for r in rows[1:]]
    values = [[float(v) for v in r[1:]] for r in rows[1:]]
    return TFGrid(np.array(values).reshape(len(freq_axis), len(time_axis)), time_axis, freq_axis)
