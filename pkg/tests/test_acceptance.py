"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line; the lines are also
collected into the pytest terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from chirpletkit.bench import (
    baseline_decompose,
    crossed_params,
    make_crossed_signal,
    robustness_index,
    run_robustness_experiment,
)
from chirpletkit.cli import main
from chirpletkit.core import (
    ChirpletAtom,
    ChirpletParams,
    Decomposition,
    add_noise,
    complex_noise,
    energy,
    sample_chirplet,
)
from chirpletkit.dictionary import DictionaryConfig, build_dictionary, enumerate_blocks
from chirpletkit.estimator import EstimatorOptions, em_refine, mpem_decompose, objective
from chirpletkit.io import ATOM_FIELDS, decomposition_to_dict, dumps_decomposition
from chirpletkit.spectra import chirplet_wvd, default_axes

from conftest import ACCEPTANCE_LINES


def report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    assert ok, line


def pseudo_wvd(z, freqs):
    n = z.size
    out = np.zeros((freqs.size, n))
    for t in range(n):
        mmax = min(t, n - 1 - t)
        m = np.arange(-mmax, mmax + 1)
        r = z[t + m] * np.conj(z[t - m])
        out[:, t] = 2.0 * np.real(np.exp(-2j * np.outer(freqs, m)) @ r)
    return out


# ------------------------------------------------------------------ 1


def test_criterion_01_crossed_recovery():
    n = 100
    f = make_crossed_signal(n)
    d = build_dictionary(DictionaryConfig(n))
    start = time.perf_counter()
    dec = mpem_decompose(f, d, EstimatorOptions(max_atoms=2))
    elapsed = time.perf_counter() - start
    up, down = crossed_params(n)
    problems = []
    if len(dec.atoms) != 2:
        problems.append(f"{len(dec.atoms)} atoms")
    for truth in (up, down):
        same = [a.params for a in dec.atoms if np.sign(a.params.c) == np.sign(truth.c)]
        if len(same) != 1:
            problems.append(f"no unique atom with chirp sign {np.sign(truth.c):+.0f}")
            continue
        p = same[0]
        dw = abs((p.omega - truth.omega + math.pi) % (2 * math.pi) - math.pi)
        if abs(p.tc - truth.tc) > 1:
            problems.append(f"tc {p.tc:.3f}")
        if dw > 2 * math.pi / n:
            problems.append(f"omega {p.omega:.4f}")
        if abs(p.c - truth.c) > 0.2 * abs(truth.c):
            problems.append(f"c {p.c:.5f}")
        if abs(p.dt - n / 3) > 0.1 * n / 3:
            problems.append(f"dt {p.dt:.3f}")
    rel = dec.residual_energy_trace[-1] / energy(f)
    if rel >= 0.01:
        problems.append(f"residual {rel:.3g}")
    if elapsed >= 30:
        problems.append(f"runtime {elapsed:.1f}s")
    report(1, not problems,
           f"residual/input={rel:.2e}, runtime={elapsed:.2f}s" + (f"; {problems}" if problems else ""))


# ------------------------------------------------------------------ 2


def _robustness(trials, alpha, budget_s, label):
    start = time.perf_counter()
    rep = run_robustness_experiment([-10.0, 0.0], trials, 1000, seed=0)
    elapsed = time.perf_counter() - start
    ok = elapsed < budget_s
    parts = []
    for r in rep.rows:
        row_ok = r.median_ri > 0 and r.p_value < alpha
        ok &= row_ok
        parts.append(f"{r.snr_db:+.0f} dB median={r.median_ri:.3g} p={r.p_value:.3g}")
    return ok, f"{label}: " + "; ".join(parts) + f"; runtime={elapsed:.0f}s"


def test_criterion_02_robustness_direction():
    ok, detail = _robustness(100, 0.05, 20 * 60, "100 trials, p<0.05")
    report(2, ok, detail)


def test_criterion_02_robustness_smoke():
    ok, detail = _robustness(30, 0.1, 5 * 60, "30-trial smoke, p<0.1")
    report(2.1, ok, detail)


# ------------------------------------------------------------------ 3


def test_criterion_03_ri_algebra():
    rng = np.random.default_rng(3)
    e_l = rng.exponential(size=10_000) * 10.0 ** rng.integers(-6, 6, 10_000)
    e_p = rng.exponential(size=10_000) * 10.0 ** rng.integers(-6, 6, 10_000)
    # force a slice of exact ties and zero errors on one side
    e_p[:500] = e_l[:500]
    e_p[500:600] = 0.0
    e_l[600:700] = 0.0
    bad = 0
    for a, b in zip(e_l, e_p):
        ri = robustness_index(a, b)
        bad += not (-1.0 <= ri <= 1.0)
        bad += (ri == 0.0) != (a == b)
        bad += robustness_index(b, a) != -ri
    report(3, bad == 0, f"{bad} violations over 10^4 pairs")


# ------------------------------------------------------------------ 4


def test_criterion_04_mp_energy_bookkeeping():
    n = 128
    d = build_dictionary(DictionaryConfig(n))
    opts = EstimatorOptions(max_atoms=6, em_passes=0, cc_threshold=1e-4)
    worst = 0.0
    steps = 0
    for s in range(50):
        rng = np.random.default_rng(s)
        f = np.zeros(n, complex)
        for _ in range(int(rng.integers(2, 6))):
            p = ChirpletParams(rng.uniform(10, n - 10), rng.uniform(0.3, 2.8),
                               rng.uniform(-0.01, 0.01), rng.uniform(2, 20))
            f += complex(rng.normal(), rng.normal()) * sample_chirplet(p, n)
        f = add_noise(f, 20.0, (4, s))
        dec = mpem_decompose(f, d, opts)
        tr = dec.residual_energy_trace
        for i, a in enumerate(dec.atoms):
            drop = tr[i] - tr[i + 1]
            worst = max(worst, abs(drop - a.amp ** 2) / a.amp ** 2)
            steps += 1
    report(4, worst <= 1e-6 and steps > 0, f"max relative mismatch {worst:.2e} over {steps} steps")


# ------------------------------------------------------------------ 5


def test_criterion_05_em_monotonicity():
    n = 100
    d = build_dictionary(DictionaryConfig(n))
    coarse = EstimatorOptions(max_atoms=2, em_passes=0)
    opts = EstimatorOptions(max_atoms=2, em_passes=8, em_tol=1e-12)
    worst = -np.inf
    for s in range(50):
        rng = np.random.default_rng(100 + s)
        clean = sum(
            complex(rng.normal(1, 0.3), rng.normal(0, 0.3))
            * sample_chirplet(ChirpletParams(rng.uniform(25, 75), rng.uniform(0.8, 2.3),
                                             rng.uniform(-0.03, 0.03), rng.uniform(5, 30)), n)
            for _ in range(2)
        )
        f = add_noise(clean, rng.uniform(-5, 10), (5, s))
        atoms = mpem_decompose(f, d, coarse).atoms
        trace = []
        em_refine(f, atoms, opts, d, trace)
        worst = max(worst, float(np.max(np.diff(trace)) / energy(f)))
    report(5, worst <= 1e-9, f"largest per-pass increase {worst:.2e} x ||f||^2")


# ------------------------------------------------------------------ 6


def test_criterion_06_gradient_fidelity():
    n = 100
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        truth = ChirpletParams(rng.uniform(20, 80), rng.uniform(0.5, 2.5),
                               rng.uniform(-0.03, 0.03), rng.uniform(3, 30))
        f = add_noise(sample_chirplet(truth, n), 5.0, int(rng.integers(1 << 31)))
        p = ChirpletParams(truth.tc + rng.normal(0, 2), truth.omega + rng.normal(0, 0.1),
                           truth.c + rng.normal(0, 0.005), max(2.0, truth.dt * rng.uniform(0.7, 1.3)))
        x = p.as_array()
        _, grad, _ = objective(f, p, order=2)
        scale = np.array([p.dt, 1 / p.dt, 1 / p.dt ** 2, p.dt])
        fd = np.zeros(4)
        for i in range(4):
            h = np.zeros(4)
            h[i] = 1e-5 * scale[i]
            fd[i] = (objective(f, ChirpletParams.from_array(x + h))
                     - objective(f, ChirpletParams.from_array(x - h))) / (2 * h[i])
        # componentwise error relative to the gradient size, in natural units
        err = np.max(np.abs(grad - fd) * scale) / np.linalg.norm(fd * scale)
        worst = max(worst, err)
    report(6, worst <= 1e-4, f"max relative deviation {worst:.2e} at 100 points")


# ------------------------------------------------------------------ 7


def test_criterion_07_wvd_closed_form():
    n = 64
    t, w = default_axes(n)
    rng = np.random.default_rng(7)
    worst_dev = worst_mass = 0.0
    for _ in range(20):
        dt = rng.uniform(4, 8)
        p = ChirpletParams(rng.uniform(3.5 * dt, n - 1 - 3.5 * dt), rng.uniform(math.pi / 3, 2 * math.pi / 3),
                           rng.uniform(-0.5, 0.5) / dt ** 2, dt)
        coeff = complex(rng.normal(), rng.normal())
        atom = ChirpletAtom.from_coeff(p, coeff)
        grid = chirplet_wvd(atom, t, w)
        oracle = abs(coeff) ** 2 * pseudo_wvd(sample_chirplet(p, n), w)
        worst_dev = max(worst_dev, np.max(np.abs(grid.values - oracle)) / grid.values.max())
        worst_mass = max(worst_mass, abs(grid.mass() - abs(coeff) ** 2) / abs(coeff) ** 2)
    ok = worst_dev < 0.03 and worst_mass <= 0.02
    report(7, ok, f"max deviation {100 * worst_dev:.3f}% of peak, max mass error {100 * worst_mass:.4f}%")


# ------------------------------------------------------------------ 8


def test_criterion_08_coherence_stopping():
    n = 256
    d = build_dictionary(DictionaryConfig(n))
    opts = EstimatorOptions(max_atoms=10, cc_threshold=0.05)
    halted = 0
    for s in range(100):
        dec = mpem_decompose(complex_noise(n, (8, s)), d, opts)
        halted += len(dec.atoms) < opts.max_atoms
    report(8, halted >= 95, f"halted early in {halted}/100 runs")


# ------------------------------------------------------------------ 9


def _estimation_reals(doc):
    return [a[k] for a in doc["atoms"] for k in ATOM_FIELDS if isinstance(a[k], float)]


def test_criterion_09_compression_accounting():
    rng = np.random.default_rng(9)
    ok = True
    for p in (0, 1, 5, 60):
        atoms = [ChirpletAtom.from_coeff(
            ChirpletParams(rng.uniform(0, 2000), rng.uniform(0, 6), rng.normal(0, 1e-3), rng.uniform(1, 80)),
            complex(rng.normal(), rng.normal())) for _ in range(p)]
        dec = Decomposition(atoms, 2000, [1.0] * (p + 1))
        doc = json.loads(dumps_decomposition(dec))
        ok &= len(_estimation_reals(doc)) == 6 * p == len(_estimation_reals(decomposition_to_dict(dec)))
    ratio = len(_estimation_reals(doc)) / 2000
    ok &= ratio <= 0.2
    report(9, ok, f"6P reals for P in (0,1,5,60); P=60, N=2000 payload/raw = {ratio:.2f}")


# ------------------------------------------------------------------ 10


def test_criterion_10_dictionary_counts():
    details = []
    ok = True
    for n in (64, 128, 256):
        d = build_dictionary(DictionaryConfig(n, 2, 1))
        levels = d.config.levels
        expected = 1 + sum(4 * 2 ** (2 * k) for k in range(levels - 1))
        blocks = list(enumerate_blocks(d))
        distinct = {(b.k, b.m, b.rotated) for b in blocks}
        # materialize every (block, time, frequency) index and count distinct atoms
        ids = (np.arange(len(blocks))[:, None, None] * n * n
               + np.arange(n)[None, :, None] * n + np.arange(n)[None, None, :])
        atoms = np.unique(ids.ravel()).size
        ok &= len(blocks) == len(distinct) == expected and d.size == atoms == n * n * expected
        details.append(f"N={n}: {len(blocks)} blocks, M={atoms}")
    report(10, ok, "; ".join(details))


# ------------------------------------------------------------------ 11


def test_criterion_11_determinism(tmp_path):
    bench = []
    for name in ("a.csv", "b.csv"):
        assert main(["bench", "--seed", "7", "-o", str(tmp_path / name)]) == 0
        bench.append((tmp_path / name).read_bytes())
    sig = tmp_path / "crossed.csv"
    assert main(["demo", "crossed", "-o", str(sig)]) == 0
    dec = []
    for name in ("a.json", "b.json"):
        assert main(["decompose", str(sig), "--atoms", "4", "-o", str(tmp_path / name)]) == 0
        dec.append((tmp_path / name).read_bytes())
    ok = bench[0] == bench[1] and dec[0] == dec[1]
    report(11, ok, f"bench reports identical={bench[0] == bench[1]}, atom files identical={dec[0] == dec[1]}")
