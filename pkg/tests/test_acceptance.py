"""Acceptance checks, one test per criterion.

Each test prints a single ``CRITERION <n> PASS|FAIL: ...`` line (shown even
without ``-s``) before asserting.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest

from topfree.cli import main
from topfree.entropy import (
    ball_covering_bounds_check,
    delta_top_estimate,
    estimate_gamma_measure,
    estimate_volume_ball,
    estimate_volume_gaussian,
    ht_check,
)
from topfree.linalg import MatrixTuple
from topfree.microstates import (
    Constraint,
    MicrostateSpec,
    constraint_norms,
    direct_sum,
    is_microstate,
    is_semi_microstate,
)
from topfree.ncpoly import parse_poly, poly_norm_at
from topfree.potential import (
    THETA,
    RealCompact,
    arcsine_density,
    chi_one_var,
    density_l1,
    equilibrium_measure,
    reference_density,
    semicircle_entropy_values,
)
from topfree.presets import ball, contraction, interval, semicircular

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")

    return emit


@pytest.fixture(scope="module")
def unit_interval():
    t0 = time.perf_counter()
    res = equilibrium_measure(RealCompact.parse("[-1,1]"), 2000)
    return res, time.perf_counter() - t0


def test_criterion_1_capacity(report, unit_interval):
    res, secs = unit_interval
    cap_err = abs(res.capacity - 0.5)
    kap_err = abs(res.kappa - (THETA - math.log(2)))
    ok = cap_err <= 1e-3 and kap_err <= 2e-3 and secs <= 60
    report(1, ok, f"capacity={res.capacity:.6f} (err {cap_err:.1e}), kappa={res.kappa:.6f} (err {kap_err:.1e}), "
                  f"{secs:.1f}s")
    assert ok


def test_criterion_2_arcsine(report, unit_interval):
    res, _ = unit_interval
    l1 = density_l1(res.measure, arcsine_density, -0.95, 0.95)
    spread = res.potential_spread()
    ok = l1 <= 5e-2 and spread <= 5e-3
    report(2, ok, f"L1 on [-0.95,0.95] = {l1:.2e}, potential spread = {spread:.2e}")
    assert ok


def test_criterion_3_semicircle_chi(report):
    chi = chi_one_var(reference_density("semicircle", 4000))
    vals = semicircle_entropy_values(1)
    err = abs(chi - vals["energy_formula"])
    ok = err <= 2e-3
    report(3, ok, f"chi={chi:.6f} vs {vals['energy_formula']:.6f} (err {err:.1e}); "
                  f"gaussian-measure value {vals['gaussian_bound']:.6f}, gap {vals['gap']:.6f}")
    assert ok


def test_criterion_4_norm_convergence(report):
    t0 = time.perf_counter()
    dims = [50, 100, 200, 400]
    one = ht_check(parse_poly("X1", 1), dims, 20, seed=7)
    two = ht_check(parse_poly("X1+X2", 2), dims, 20, seed=7)
    secs = time.perf_counter() - t0
    errs = [r.abs_error for r in one]
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    rel1 = errs[-1] / 2.0
    rel2 = two[-1].abs_error / (2 * math.sqrt(2))
    ok = rel1 <= 0.05 and monotone and rel2 <= 0.05 and secs <= 600
    report(4, ok, f"X1 errors {['%.4f' % e for e in errs]} (monotone={monotone}), X1 rel err {rel1:.3%}, "
                  f"X1+X2 mean {two[-1].mean:.4f} rel err {rel2:.3%}, {secs:.1f}s")
    assert ok


def test_criterion_5_gamma(report):
    est = estimate_gamma_measure(semicircular(1, k=200, epsilon=0.5), 200, seed=5)
    ok = est.probability >= 0.95
    report(5, ok, f"gamma_200 = {est.probability:.3f} +/- {est.std_error:.3f} ({est.hits}/200)")
    assert ok


def test_criterion_6_small_volumes(report):
    spec = contraction(1, k=1, epsilon=0.1)
    exact = math.log(0.4)
    b = estimate_volume_ball(spec, 1.1, 100_000, seed=1)
    g = estimate_volume_gaussian(spec, 100_000, seed=2)
    zb = abs(b.raw_log_vol - exact) / b.std_error
    zg = abs(g.raw_log_vol - exact) / g.std_error
    rng = np.random.default_rng(2024)
    zs = []
    for i in range(10):
        n, k = int(rng.integers(1, 3)), int(rng.integers(1, 4))
        targets = rng.uniform(0.8, 1.3, size=n)
        eps = float(rng.uniform(0.2, 0.3))
        s = MicrostateSpec.standard(list(targets), epsilon=eps, k=k)
        R = float(targets.max()) + eps
        vb = estimate_volume_ball(s, R, 20_000, seed=100 + i)
        vg = estimate_volume_gaussian(s, 20_000, seed=200 + i)
        zs.append(abs(vb.raw_log_vol - vg.raw_log_vol) / math.hypot(vb.std_error, vg.std_error))
    ok = zb <= 3 and zg <= 3 and max(zs) <= 3
    report(6, ok, f"ball {b.raw_log_vol:.5f} (z={zb:.2f}), gaussian {g.raw_log_vol:.5f} (z={zg:.2f}) vs "
                  f"log 0.4 = {exact:.5f}; random specs max |z| = {max(zs):.2f}")
    assert ok


def _normalized_volumes(eps: float, ks, samples: int, seed: int):
    out = []
    for k in ks:
        spec = interval(-2.0, 2.0, k=k, epsilon=eps)
        R = float(spec.coordinate_bounds().max())
        v = estimate_volume_ball(spec, R, samples, seed=seed)
        out.append((v.normalized, v.normalized_std_error))
    return out


def test_criterion_7_chi_below_kappa(report):
    ks = [2, 3, 4, 5, 6]
    est = _normalized_volumes(0.1, ks, 20_000, seed=7)
    vals = [v for v, _ in est]
    below = all(v <= THETA + 3 * s for v, s in est)
    nondecreasing = vals == sorted(vals)
    close = abs(vals[-1] - THETA) <= 0.5
    ok = below and nondecreasing and close
    info = _normalized_volumes(0.5, ks, 5_000, seed=7)
    report(7, ok, f"eps=0.1 normalized {['%.4f' % v for v in vals]} vs kappa {THETA:.4f} "
                  f"(below={below}, nondecreasing={nondecreasing}, k=6 gap {THETA - vals[-1]:.3f}); "
                  f"info eps=0.5: {['%.4f' % v for v, _ in info]}")
    assert ok


def test_criterion_8_direct_sums(report):
    rng = np.random.default_rng(8)
    polys = ["X1", "X1*X2 + X2*X1", "X1*X1 - X2", "X1 + i*X2", "X1*X2*X1 - 0.5*X2"]
    block_fail = incl_fail = incl_done = 0

    def rand_tuple(k, scale):
        a = rng.standard_normal((2, k, k)) + 1j * rng.standard_normal((2, k, k))
        return MatrixTuple(scale * (a + a.conj().swapaxes(-1, -2)) / 2)

    for i in range(100):
        p = parse_poly(polys[i % len(polys)], 2)
        x, y = rand_tuple(int(rng.integers(1, 5)), 1.0), rand_tuple(int(rng.integers(1, 5)), 1.0)
        want = max(poly_norm_at(p, x), poly_norm_at(p, y))
        if abs(poly_norm_at(p, direct_sum(x, y)) - want) > 1e-10 * max(1.0, want):
            block_fail += 1
    while incl_done < 100:
        p = parse_poly(polys[incl_done % len(polys)], 2)
        k1, k2 = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        x, y = rand_tuple(k1, 1.0), rand_tuple(k2, float(rng.uniform(0.2, 1.0)))
        cons = (Constraint(p, 1.0),)
        nx = constraint_norms(MicrostateSpec(2, 0, cons, 1.0, k1, 1.0), x.data[None])[0, 0]
        eps = float(rng.uniform(0.05, 0.5))
        spec = MicrostateSpec(2, 0, (Constraint(p, max(0.0, nx + float(rng.uniform(-0.9, 0.9)) * eps)),), eps, k1, 1.0)
        if not (is_microstate(spec, x) and is_semi_microstate(spec.with_k(k2), y)):
            continue
        incl_done += 1
        if not is_microstate(spec.with_k(k1 + k2), direct_sum(x, y)):
            incl_fail += 1
    ok = block_fail == 0 and incl_fail == 0
    report(8, ok, f"max-norm block identity failures {block_fail}/100, "
                  f"two-sided (+) one-sided inheritance failures {incl_fail}/100")
    assert ok


def test_criterion_9_covering(report):
    eps = [0.5, 0.2, 0.1, 0.05]
    k1 = ball_covering_bounds_check(1, 1.0, eps, 5000, seed=11)
    counts = [r["net_size"] for r in k1.rows]
    ref = [math.ceil(1 / e) for e in eps]
    within = all(c / 2 <= n <= 2 * c for n, c in zip(counts, ref))
    k2 = ball_covering_bounds_check(2, 1.0, [1.0, 0.7, 0.5, 0.35, 0.25], 40_000, seed=1)
    exps = [k1.exponent_ratio, k2.exponent_ratio]
    ok = within and all(abs(r - 1) <= 0.3 for r in exps)
    report(9, ok, f"k=1 counts {counts} vs ceil(1/eps) {ref}; exponent / k^2: k=1 {exps[0]:.3f}, k=2 {exps[1]:.3f}")
    assert ok


def test_criterion_10_delta_top(report):
    rep = delta_top_estimate(lambda k, e: ball(1, k=k, epsilon=e), [1, 2, 3], [0.4, 0.2, 0.1], 3000, seed=5)
    ok = abs(rep.slope - 1) <= 0.3
    report(10, ok, f"slope {rep.slope:.3f}, D_eps {{{', '.join(f'{e}: {v:.3f}' for e, v in rep.D.items())}}}")
    assert ok


def test_criterion_11_reproducible(report, tmp_path):
    runs = {
        "volume": ["--preset", "interval:-2,2", "--k", "1,2", "--eps", "0.2", "--samples", "20000",
                   "--estimator", "both", "--seed", "3"],
        "covering": ["--k", "1,2", "--eps-list", "1.0,0.5", "--samples", "2000", "--seed", "3"],
        "gamma-measure": ["--preset", "semicircular:2", "--k", "20", "--samples", "200", "--seed", "3"],
        "dimension": ["--k", "1,2", "--samples", "500", "--seed", "3"],
    }
    mismatched = []
    for cmd, args in runs.items():
        dirs = []
        for tag, w in (("a", "1"), ("b", "1"), ("c", "4")):
            base = tmp_path / cmd / tag
            assert main([cmd, *args, "--workers", w, "--outdir", str(base)]) == 0
            (d,) = list(base.iterdir())
            dirs.append(d)
        files = sorted(p.relative_to(dirs[0]) for p in (dirs[0] / "data").iterdir())
        for f in files:
            blobs = {(d / f).read_bytes() for d in dirs}
            if len(blobs) != 1:
                mismatched.append(f"{cmd}/{f}")
    ok = not mismatched
    report(11, ok, f"{len(runs)} commands x 3 runs (workers 1, 1, 4): mismatched CSVs {mismatched or 'none'}")
    assert ok
