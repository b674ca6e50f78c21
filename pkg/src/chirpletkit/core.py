"""Signal representation, Gaussian chirplet synthesis and reconstruction.

Analytic signals are plain 1-D ``complex128`` numpy arrays. All quantities
are in normalized units: time in samples, frequency in rad/sample and
chirp-rate in rad/sample**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import hilbert

from .errors import DegenerateAtomError, DomainError, InvalidInputError

__all__ = [
    "DT_MIN",
    "ChirpletParams",
    "ChirpletAtom",
    "Decomposition",
    "make_analytic",
    "sample_chirplet",
    "inner_product",
    "energy",
    "complex_noise",
    "add_noise",
    "reconstruct",
]

#: Smallest admissible time spread, in samples.
DT_MIN = 0.5

TWO_PI = 2.0 * math.pi
MIN_SIGNAL_LENGTH = 4


@dataclass(frozen=True)
class ChirpletParams:
    """Parameter set ``(t_c, omega_c, c, dt)`` of a Gaussian chirplet.

    ``omega`` is wrapped into ``[0, 2*pi)`` on construction.
    """

    tc: float
    omega: float
    c: float
    dt: float

    def __post_init__(self):
        values = (self.tc, self.omega, self.c, self.dt)
        if not all(math.isfinite(v) for v in values):
            raise DomainError(f"non-finite chirplet parameters {values}")
        if self.dt <= DT_MIN:
            raise DomainError(f"time spread {self.dt} must exceed {DT_MIN}")
        object.__setattr__(self, "tc", float(self.tc))
        object.__setattr__(self, "omega", float(self.omega) % TWO_PI)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "dt", float(self.dt))

    def as_array(self) -> np.ndarray:
        return np.array([self.tc, self.omega, self.c, self.dt])

    @classmethod
    def from_array(cls, x) -> "ChirpletParams":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


@dataclass(frozen=True)
class ChirpletAtom:
    """One estimated chirplet.

    The coefficient is held in polar form (``amp >= 0``, ``phase`` in
    radians), the same six-real layout used on disk, so serialization
    round-trips bit for bit.
    """

    params: ChirpletParams
    amp: float
    phase: float = 0.0
    cc: float = 0.0

    @classmethod
    def from_coeff(cls, params: ChirpletParams, coeff: complex, cc: float = 0.0):
        coeff = complex(coeff)
        return cls(params, abs(coeff), math.atan2(coeff.imag, coeff.real), float(cc))

    @property
    def coeff(self) -> complex:
        return complex(self.amp * math.cos(self.phase), self.amp * math.sin(self.phase))


@dataclass
class Decomposition:
    """Ordered chirplet atoms plus the residual-energy trace.

    ``residual_energy_trace[n]`` is the residue energy after ``n`` atoms have
    been extracted, so it always holds one more entry than ``atoms``.
    """

    atoms: list[ChirpletAtom]
    n_samples: int
    residual_energy_trace: list[float]
    radix: int = 2
    i0: int = 1
    sample_rate_hz: float | None = None
    cc_threshold: float | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.residual_energy_trace) != len(self.atoms) + 1:
            raise InvalidInputError(
                "residual_energy_trace must have exactly one more entry than atoms"
            )

    def __len__(self):
        return len(self.atoms)


def _as_complex(f, name="signal") -> np.ndarray:
    arr = np.asarray(f)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    return arr.astype(np.complex128, copy=False)


def energy(f) -> float:
    """Total energy ``sum |f[n]|**2``."""
    f = np.asarray(f)
    return float(np.vdot(f, f).real)


def make_analytic(x) -> np.ndarray:
    """Convert a real signal to its analytic counterpart.

    The imaginary part is the DFT-domain Hilbert transform (negative bins
    zeroed, positive bins doubled, DC and Nyquist untouched). The real part
    is copied from ``x`` bit for bit.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        raise InvalidInputError("make_analytic expects a real-valued signal")
    x = x.astype(np.float64)
    if x.ndim != 1 or x.size < MIN_SIGNAL_LENGTH:
        raise InvalidInputError(
            f"signal must be 1-D with at least {MIN_SIGNAL_LENGTH} samples"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("signal contains non-finite values")
    z = hilbert(x)
    return x + 1j * z.imag


def sample_chirplet(p: ChirpletParams, n: int) -> np.ndarray:
    """Sample a chirplet at ``t = 0..n-1`` and rescale it to unit energy.

    The continuous-time prefactor is dropped; normalizing the truncated,
    sampled waveform makes ``inner_product(f, g)`` an exact projection.
    """
    if n < MIN_SIGNAL_LENGTH:
        raise InvalidInputError(f"n must be at least {MIN_SIGNAL_LENGTH}")
    if p.dt <= DT_MIN:
        raise DomainError(f"time spread {p.dt} must exceed {DT_MIN}")
    tau = np.arange(n) - p.tc
    g = np.exp(-0.5 * (tau / p.dt) ** 2 + 1j * (p.c * tau + p.omega) * tau)
    norm = math.sqrt(energy(g))
    if norm == 0.0 or not math.isfinite(norm):
        raise DegenerateAtomError(f"chirplet {p} vanishes on {n} samples")
    return g / norm


def inner_product(f, g) -> complex:
    """Return ``sum f[n] * conj(g[n])``."""
    f = _as_complex(f, "f")
    g = _as_complex(g, "g")
    if f.shape != g.shape:
        raise InvalidInputError(f"length mismatch: {f.size} != {g.size}")
    return complex(np.vdot(g, f))


def complex_noise(n: int, seed) -> np.ndarray:
    """Unit-variance circular complex Gaussian noise.

    Uniforms come from the counter-based Philox generator keyed by ``seed``
    (an int or a sequence of ints), then pass through the polar Box-Muller
    transform, so the stream is fixed for a given seed.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random((2, n))
    radius = np.sqrt(-np.log1p(-u[0]))
    return radius * np.exp(1j * TWO_PI * u[1])


def add_noise(f, snr_db: float, seed) -> np.ndarray:
    """Add complex white Gaussian noise at an exact full-record SNR.

    The drawn noise vector is rescaled so that
    ``10*log10(energy(f) / energy(noise)) == snr_db``.
    """
    f = _as_complex(f)
    ef = energy(f)
    if ef <= 0.0:
        raise DomainError("cannot set an SNR against a zero-energy signal")
    w = complex_noise(f.size, seed)
    target = ef / 10.0 ** (snr_db / 10.0)
    w *= math.sqrt(target / energy(w))
    return f + w


def reconstruct(d: Decomposition) -> np.ndarray:
    """Sum of ``coeff * g`` over all atoms of a decomposition."""
    out = np.zeros(d.n_samples, dtype=np.complex128)
    for atom in d.atoms:
        out += atom.coeff * sample_chirplet(atom.params, d.n_samples)
    return out
