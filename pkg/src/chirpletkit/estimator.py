"""MPEM chirplet estimation: matching-pursuit coarse scan, Newton-Raphson
refinement and round-robin EM refinement of all extracted atoms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    DT_MIN,
    TWO_PI,
    ChirpletAtom,
    ChirpletParams,
    Decomposition,
    energy,
    sample_chirplet,
)
from .dictionary import Block, Dictionary
from .errors import DegenerateResidualError, DomainError, InvalidInputError

__all__ = [
    "EstimatorOptions",
    "em_schedule",
    "mp_coarse",
    "objective",
    "refine_nr",
    "em_refine",
    "coherence",
    "mpem_decompose",
]

log = logging.getLogger(__name__)

# Kernels for small dictionaries are cached; larger ones are built per scan.
_CACHE_LIMIT = 1 << 23
_ROW_CHUNK = 1 << 21
# Residues this far below the input energy are treated as exhausted.
_EXHAUSTED = 1e-20


@dataclass(frozen=True)
class EstimatorOptions:
    max_atoms: int = 10
    cc_threshold: float = 0.005
    em_passes: int = 3
    em_tol: float = 1e-6
    nr_max_iters: int = 50
    nr_step_tol: float = 1e-8
    # M-step search after NR: "local" rescans +-2 lattice cells, "full"
    # rescans the whole dictionary, "none" relies on NR alone.
    em_rescan: str = "local"
    gabor_only: bool = False

    def __post_init__(self):
        if self.max_atoms < 1:
            raise InvalidInputError("max_atoms must be >= 1")
        if not 0.0 < self.cc_threshold < 1.0:
            raise InvalidInputError("cc_threshold must lie in (0, 1)")
        if self.em_passes < 0:
            raise InvalidInputError("em_passes must be >= 0")
        if self.em_tol <= 0 or self.nr_step_tol <= 0 or self.nr_max_iters < 1:
            raise InvalidInputError("tolerances and iteration caps must be positive")
        if self.em_rescan not in ("none", "local", "full"):
            raise InvalidInputError(f"unknown em_rescan mode {self.em_rescan!r}")


def em_schedule(i: int, p: int) -> np.ndarray:
    """Weights ``beta_n`` for global EM iteration ``i`` (1-based) over ``p`` atoms.

    Exactly one atom, ``(i - 1) mod p``, receives the whole error.
    """
    if i < 1 or p < 1:
        raise InvalidInputError("EM iteration and atom count are 1-based")
    beta = np.zeros(p)
    beta[(i - 1) % p] = 1.0
    return beta


# ---------------------------------------------------------------- MP scan


@lru_cache(maxsize=8)
def _block_kernel(n: int, dt: float, c: float, rows: tuple[int, int]) -> np.ndarray:
    """Unit-energy dechirped windows, one row per time center in ``rows``.

    Row ``t`` holds ``w(n - t) * exp(-j c (n - t)**2) / sqrt(E(t))`` so that the
    DFT of ``residual * row`` gives, up to a phase, every frequency shift.
    """
    tcs = np.arange(*rows, dtype=np.float64)
    tau = np.arange(n, dtype=np.float64)[None, :] - tcs[:, None]
    w = np.exp(-0.5 * (tau / dt) ** 2)
    norm = np.sqrt(np.sum(w * w, axis=1, keepdims=True))
    kernel = w / norm
    if c != 0.0:
        kernel = kernel * np.exp(-1j * c * tau * tau)
    return kernel


def _kernel(n, block: Block, rows, cache: bool):
    if cache:
        return _block_kernel(n, block.dt, block.c, rows)
    return _block_kernel.__wrapped__(n, block.dt, block.c, rows)


def _scan_block(r, block, rows, freqs, cache):
    """Best ``(|coeff|, t_c, gamma)`` of one block restricted to ``rows``."""
    n = r.size
    spectra = np.fft.fft(r[None, :] * _kernel(n, block, rows, cache), axis=1)
    if freqs is not None:
        spectra = spectra[:, freqs]
    mags = np.abs(spectra)
    flat = int(np.argmax(mags))
    row, col = divmod(flat, mags.shape[1])
    gamma = col if freqs is None else int(freqs[col])
    return mags[row, col], rows[0] + row, gamma


def _row_chunks(lo, hi, n):
    step = max(1, _ROW_CHUNK // n)
    for start in range(lo, hi, step):
        yield start, min(hi, start + step)


def mp_coarse(residual, d: Dictionary, *, gabor_only=False, window=None):
    """Lattice atom maximizing ``|<residual, g>|`` and its coefficient.

    For each block the ``N x N`` translation grid is scanned with one
    length-N FFT per time center. ``window=(tc, gamma, half)`` restricts the
    scan to ``half`` cells around a time/frequency center. Ties go to the
    first atom in enumeration order.
    """
    r = np.asarray(residual, dtype=np.complex128)
    n = d.n
    if r.shape != (n,):
        raise InvalidInputError(f"residual length {r.size} does not match dictionary N={n}")
    if energy(r) == 0.0:
        raise DegenerateResidualError("cannot match a zero residual")
    blocks = d.gabor_blocks() if gabor_only else d.blocks
    cache = n * n * len(blocks) <= _CACHE_LIMIT

    if window is None:
        row_ranges = list(_row_chunks(0, n, n))
        freqs = None
    else:
        tc0, g0, half = window
        lo, hi = max(0, int(round(tc0)) - half), min(n, int(round(tc0)) + half + 1)
        row_ranges = [(lo, hi)]
        freqs = np.arange(int(round(g0)) - half, int(round(g0)) + half + 1) % n
        cache = False

    best = (-1.0, None, 0, 0)
    for block in blocks:
        for rows in row_ranges:
            mag, tc, gamma = _scan_block(r, block, rows, freqs, cache)
            if mag > best[0]:
                best = (mag, block, tc, gamma)
    _, block, tc, gamma = best
    params = ChirpletParams(float(tc), TWO_PI * gamma / n, block.c, block.dt)
    coeff = complex(np.vdot(sample_chirplet(params, n), r))
    return params, coeff


# ---------------------------------------------------------- NR refinement


def _derivatives(f, x, order=2):
    """``J = |<f, g_x>|**2`` with its gradient and Hessian in ``x``.

    ``x = (tc, omega, c, dt)``. With ``u`` the unnormalized chirplet,
    ``A = sum f conj(u)`` and ``E = sum |u|**2`` we have ``J = |A|**2 / E``.
    """
    tc, w, c, dt = x
    n = f.size
    tau = np.arange(n) - tc
    env = np.exp(-0.5 * (tau / dt) ** 2)
    cu = env * np.exp(-1j * (c * tau + w) * tau)  # conj(u)
    fcu = f * cu
    A = fcu.sum()
    env2 = env * env
    E = env2.sum()
    S = (A * A.conjugate()).real
    J = S / E
    coeff = A / math.sqrt(E)
    if order == 0:
        return J, coeff

    inv2 = 1.0 / dt ** 2
    inv3 = inv2 / dt
    # d(conj u)/dx / conj(u): rows tc, omega, c, dt
    dpsi = np.empty((4, n), dtype=np.complex128)
    dpsi[0] = tau * inv2 + 1j * (2 * c * tau + w)
    dpsi[1] = -1j * tau
    dpsi[2] = -1j * tau * tau
    dpsi[3] = tau * tau * inv3
    dre = np.zeros((4, n))  # d log|u| / dx
    dre[0] = tau * inv2
    dre[3] = tau * tau * inv3

    Ad = dpsi @ fcu
    Ed = 2.0 * (dre @ env2)
    Sd = 2.0 * (A.conjugate() * Ad).real
    grad = Sd / E - S * Ed / E ** 2

    # second derivatives of log conj(u); the real part gives those of log|u|
    d2 = {
        (0, 0): np.full(n, -inv2 - 2j * c),
        (0, 1): np.full(n, 1j + 0j),
        (0, 2): 2j * tau,
        (0, 3): -2.0 * tau * inv3 + 0j,
        (3, 3): -3.0 * tau * tau * inv2 * inv2 + 0j,
    }
    hess = np.empty((4, 4))
    for i in range(4):
        for j in range(i, 4):
            extra = d2.get((i, j))
            kern = dpsi[i] * dpsi[j]
            if extra is not None:
                kern = kern + extra
            Aij = kern @ fcu
            ekern = 4.0 * dre[i] * dre[j]
            if extra is not None:
                ekern = ekern + 2.0 * extra.real
            Eij = ekern @ env2
            Sij = 2.0 * (Ad[j].conjugate() * Ad[i] + A.conjugate() * Aij).real
            h = (
                Sij / E
                - (Sd[i] * Ed[j] + Sd[j] * Ed[i]) / E ** 2
                - S * Eij / E ** 2
                + 2.0 * S * Ed[i] * Ed[j] / E ** 3
            )
            hess[i, j] = hess[j, i] = h
    return J, coeff, grad, hess


def objective(f, p: ChirpletParams, order: int = 0):
    """``J(p) = |<f, g_p>|**2`` (``order=0``) or with gradient and Hessian
    (``order=2``) for the unit-energy chirplet ``g_p``."""
    f = np.asarray(f, dtype=np.complex128)
    out = _derivatives(f, p.as_array(), order)
    if order == 0:
        return out[0]
    J, _, grad, hess = out
    return J, grad, hess


def _project(x, n):
    tc, w, c, dt = x
    tc = min(max(tc, 0.0), math.nextafter(float(n), 0.0))
    dt = min(max(dt, DT_MIN * (1.0 + 1e-9)), 4.0 * n)
    return np.array([tc, w % TWO_PI, c, dt])


def refine_nr(f, init: ChirpletParams, opts: EstimatorOptions | None = None):
    """Locally maximize ``J = |<f, g>|**2`` over the four chirplet parameters.

    Newton steps are used while the Hessian is negative definite, otherwise
    a Newton step on the Hessian shifted to be negative definite; every step is backtracked until ``J`` increases,
    so the result never scores below ``init``. Step sizes are measured in
    units natural to the current spread: ``(dt, 1/dt, 1/dt**2, dt)``.
    Returns ``(params, coeff)`` with ``coeff = <f, g_params>``.
    """
    opts = opts or EstimatorOptions()
    f = np.asarray(f, dtype=np.complex128)
    n = f.size
    x = init.as_array()
    J, coeff, grad, hess = _derivatives(f, x)
    if J == 0.0:
        return init, complex(coeff)

    for _ in range(opts.nr_max_iters):
        dt = x[3]
        scale = np.array([dt, 1.0 / dt, 1.0 / dt ** 2, dt])
        # work in scaled coordinates z = x / scale
        gs = grad * scale
        hs = hess * np.outer(scale, scale)
        gnorm = np.linalg.norm(gs)
        step = None
        try:
            np.linalg.cholesky(-hs)
            step = -np.linalg.solve(hs, gs)
        except np.linalg.LinAlgError:
            # shift the Hessian until it is negative definite
            if gnorm > 0.0:
                mu = np.linalg.eigvalsh(hs)[-1] + gnorm
                step = np.linalg.solve(mu * np.eye(4) - hs, gs)
        if step is None or not np.all(np.isfinite(step)) or step @ gs <= 0:
            if gnorm == 0.0:
                break
            step = gs / gnorm
        length = np.linalg.norm(step)
        if length > 1.0:
            step /= length
            length = 1.0

        alpha = 1.0
        moved = False
        while alpha * length > opts.nr_step_tol * 1e-3:
            cand = _project(x + alpha * step * scale, n)
            Jc, cc = _derivatives(f, cand, order=0)
            if Jc > J:
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
        delta = np.linalg.norm((cand - x) / scale)
        x = cand
        J, coeff, grad, hess = _derivatives(f, x)
        if delta < opts.nr_step_tol:
            break
    return ChirpletParams.from_array(x), complex(coeff)


# ------------------------------------------------------------------ EM


def _lattice_cell(p: ChirpletParams, n: int):
    return p.tc, p.omega * n / TWO_PI


def _m_step(y, params, d, opts):
    """Re-estimate one atom from its complete data ``y``.

    NR starts from the current parameters; if it stalls (relative gain in
    ``J`` below ``opts.em_tol``) the lattice is rescanned and NR restarted
    from the new seed, keeping whichever result scores higher.
    """
    start_j = objective(y, params)
    best, coeff = refine_nr(y, params, opts)
    best_j = abs(coeff) ** 2
    if opts.em_rescan == "none" or d is None:
        return best, coeff
    if opts.em_rescan == "local" and best_j - start_j > opts.em_tol * best_j:
        return best, coeff
    if opts.em_rescan == "full":
        seed, _ = mp_coarse(y, d, gabor_only=opts.gabor_only)
    else:
        tc, gamma = _lattice_cell(params, d.n)
        seed, _ = mp_coarse(y, d, gabor_only=opts.gabor_only, window=(tc, gamma, 2))
    cand, cand_coeff = refine_nr(y, seed, opts)
    if abs(cand_coeff) ** 2 > best_j:
        return cand, cand_coeff
    return best, coeff


def em_refine(f, atoms, opts: EstimatorOptions | None = None, d: Dictionary | None = None,
              trace=None):
    """Jointly refine ``atoms`` against ``f`` with one-atom-per-iteration EM.

    At global iteration ``i`` only atom ``(i-1) mod P`` is updated, from the
    complete data ``y = a g + e``. Stops after ``opts.em_passes`` full passes
    or once a pass changes ``||e||**2`` by less than ``opts.em_tol``
    (relative). When ``trace`` is a list, ``||e||**2`` is appended to it
    initially and after every pass.
    """
    opts = opts or EstimatorOptions()
    if not atoms:
        raise InvalidInputError("em_refine needs at least one atom")
    f = np.asarray(f, dtype=np.complex128)
    n = f.size
    atoms = list(atoms)
    p = len(atoms)
    comps = [a.coeff * sample_chirplet(a.params, n) for a in atoms]
    e = f - np.sum(comps, axis=0)
    err = energy(e)
    if trace is not None:
        trace.append(err)
    floor = _EXHAUSTED * energy(f)
    i = 0
    for _ in range(opts.em_passes):
        start = err
        for _ in range(p):
            i += 1
            idx = int(np.argmax(em_schedule(i, p)))
            y = comps[idx] + e
            if energy(y) == 0.0:
                continue
            params, coeff = _m_step(y, atoms[idx].params, d, opts)
            comp = coeff * sample_chirplet(params, n)
            e_new = y - comp
            err_new = energy(e_new)
            if err_new > err:
                # refinement is ascent-only, so this is rounding; keep the old atom
                continue
            atoms[idx] = ChirpletAtom.from_coeff(params, coeff, atoms[idx].cc)
            comps[idx] = comp
            e, err = e_new, err_new
        if trace is not None:
            trace.append(err)
        if err <= floor or start - err < opts.em_tol * start:
            break
    return atoms


# ----------------------------------------------------------------- MPEM


def coherence(coeff: complex, residual_energy: float) -> float:
    """Coherence ``|coeff|**2 / ||R^n f||**2`` of an atom against its residue."""
    if residual_energy <= 0.0:
        raise DomainError("coherence is undefined for a zero-energy residue")
    return abs(coeff) ** 2 / residual_energy


def mpem_decompose(f, d: Dictionary, opts: EstimatorOptions | None = None,
                   sample_rate_hz=None) -> Decomposition:
    """Decompose ``f`` into Gaussian chirplets with the MPEM loop.

    Each outer iteration extracts one atom from the residue (MP scan then NR),
    refines all atoms with EM and recomputes the residue. Extraction stops
    when the newest atom's coherence falls below ``opts.cc_threshold`` (that
    atom is discarded), when ``opts.max_atoms`` is reached, or when the residue
    is exhausted. ``opts.gabor_only`` restricts the MP scans to zero
    chirp-rate blocks.
    """
    opts = opts or EstimatorOptions()
    f = np.asarray(f, dtype=np.complex128)
    if f.shape != (d.n,):
        raise InvalidInputError(f"signal length {f.size} does not match dictionary N={d.n}")
    cfg = d.config
    total = energy(f)
    header = dict(
        n_samples=d.n,
        radix=cfg.a,
        i0=cfg.i0,
        sample_rate_hz=sample_rate_hz,
        cc_threshold=opts.cc_threshold,
    )
    if total == 0.0:
        log.warning("all-zero signal: returning an empty decomposition")
        return Decomposition([], residual_energy_trace=[0.0], warnings=["zero-signal"], **header)

    atoms: list[ChirpletAtom] = []
    residual = f.copy()
    trace = [total]
    while len(atoms) < opts.max_atoms:
        res_energy = trace[-1]
        if res_energy <= _EXHAUSTED * total:
            break
        coarse, _ = mp_coarse(residual, d, gabor_only=opts.gabor_only)
        params, coeff = refine_nr(residual, coarse, opts)
        cc = coherence(coeff, res_energy)
        if cc < opts.cc_threshold:
            break
        atoms.append(ChirpletAtom.from_coeff(params, coeff, cc))
        if opts.em_passes > 0:
            atoms = em_refine(f, atoms, opts, d)
        residual = f - sum(a.coeff * sample_chirplet(a.params, d.n) for a in atoms)
        # extraction and EM are both non-increasing; clamp rounding noise
        trace.append(min(energy(residual), res_energy))
    return Decomposition(atoms, residual_energy_trace=trace, **header)
