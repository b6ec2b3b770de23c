"""Acceptance suite.

One test per acceptance criterion, each printing a PASS/FAIL line per
sub-check (run with ``pytest -s`` to see them) and asserting its stated
runtime budget.

Two sub-clauses encode thresholds that the underlying mathematics does not
attain; they are kept as stated, isolated in their own tests, and fail by
design with the correct values derived in their docstrings:

* ``test_criterion2_capacity_hundredfold_drop`` — the cutoff-norm decay at
  beta = 1 is logarithmic in s, giving a factor-4 drop over the stated
  grid, never a factor 100.
* ``test_criterion4_low_beta_frequency_floor`` — the collision probability
  at beta = 0.5 from unit gap by T = 1 is Q(1/4, 1/4) = 0.2563, not >= 0.5.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from dysonlab import bochner, capacity, heat, ricci, sde
from dysonlab.core import ModelParams


def check(results, name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    results.append((name, bool(ok)))


def finish(results, elapsed, budget):
    print(f"-- elapsed {elapsed:.1f}s (budget {budget}s)")
    failed = [name for name, ok in results if not ok]
    assert not failed, f"failed sub-checks: {failed}"
    assert elapsed <= budget, f"runtime {elapsed:.1f}s exceeds {budget}s"


# ---------------------------------------------------------------------------
# criterion 1: Ricci nonnegativity and sharpness
# ---------------------------------------------------------------------------


def test_criterion1_ricci_nonnegativity_and_sharpness():
    t0 = time.monotonic()
    results = []
    rng = np.random.default_rng(2024)

    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 7))
        beta = float(rng.uniform(1e-2, 4.0))
        nb = ricci.n_beta(n, beta)
        N = float(rng.choice([nb, 2 * nb, 10 * nb, math.inf]))
        x = rng.normal(size=n)
        while np.min(np.abs(np.subtract.outer(x, x))[~np.eye(n, dtype=bool)]) < 1e-9:
            x = rng.normal(size=n)
        form = ricci.ricci_form(x, ModelParams(n=n, beta=beta, N=N))
        worst = min(worst, np.linalg.eigvalsh(form.matrix)[0] / form.scale)
    check(results, "c1.min-eig over 1e4 draws", worst >= -1e-9, f"worst ratio {worst:.2e}")

    worst_align = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        beta = float(rng.uniform(1e-2, 4.0))
        x = rng.normal(size=n) * 2.0
        while np.min(np.abs(np.subtract.outer(x, x))[~np.eye(n, dtype=bool)]) < 1e-6:
            x = rng.normal(size=n) * 2.0
        form = ricci.ricci_form(x, ModelParams(n=n, beta=beta, N=ricci.n_beta(n, beta)))
        vc = x - x.mean()
        worst_align = max(worst_align, abs(form.value(vc)) / (form.scale * (vc @ vc)))
    check(results, "c1.sharp at N=N_beta along centered x", worst_align <= 1e-9,
          f"worst {worst_align:.2e}")

    neg_found = True
    for n in (2, 3, 4, 6):
        for beta in (0.5, 1.0, 2.0, 4.0):
            N = ricci.n_beta(n, beta) - 0.1
            if N <= n:
                continue
            e = ricci.min_ricci_eig(np.arange(1.0, n + 1.0), ModelParams(n=n, beta=beta, N=N))
            neg_found = neg_found and (e < 0.0)
    check(results, "c1.negative below N_beta", neg_found)

    finish(results, time.monotonic() - t0, 10.0)


# ---------------------------------------------------------------------------
# criterion 2: capacity threshold
# ---------------------------------------------------------------------------

S_GRID = (1e-3, 1e-6, 1e-12)
EPS_GRID = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def test_criterion2_capacity_threshold():
    t0 = time.monotonic()
    results = []

    vals1 = [capacity.capacity_upper(s, 1.0).value for s in S_GRID]
    check(results, "c2.beta=1 strictly decreasing", vals1[0] > vals1[1] > vals1[2],
          "values " + ", ".join(f"{v:.4f}" for v in vals1))
    vals06 = [capacity.capacity_upper(s, 0.6).value for s in S_GRID]
    check(results, "c2.beta=0.6 increasing", vals06[0] < vals06[1] < vals06[2],
          "values " + ", ".join(f"{v:.3g}" for v in vals06))

    p15 = [capacity.point_capacity_1d(1.5, e) for e in EPS_GRID]
    ok = all(b < a for a, b in zip(p15, p15[1:])) and p15[-1] <= 0.05 * p15[0]
    check(results, "c2.point beta=1.5 decays to 0", ok,
          f"first {p15[0]:.4f} last {p15[-1]:.2e}")

    p05 = [capacity.point_capacity_1d(0.5, e) for e in EPS_GRID]
    ok = all(v > 0.0 for v in p05) and abs(p05[-1] - p05[-2]) <= 0.05 * p05[-1]
    check(results, "c2.point beta=0.5 positive floor", ok,
          f"floor {p05[-1]:.4f}, last step {abs(p05[-1]-p05[-2])/p05[-1]:.2%}")

    got = capacity.point_capacity_1d(0.0, 1e-3, m=512)
    want = 1.0 / math.tanh(1.0 - 1e-3)
    check(results, "c2.beta=0 sinh closed form", abs(got - want) <= 1e-3 * want,
          f"{got:.6f} vs {want:.6f}")

    finish(results, time.monotonic() - t0, 30.0)


def test_criterion2_capacity_hundredfold_drop():
    """Stated clause: capacity_upper final value <= 0.01 x first on S_GRID.

    Unattainable: at beta = 1 the squared norm is (e-1)/|log s| (1 + o(1)) --
    the slope of the log-log cutoff integrates to a logarithmic decay -- so
    the grid ratio is |log 1e-3| / |log 1e-12| = 1/4, measured 0.2387.  A
    hundredfold drop would need s of order 1e-300.  Kept as stated; see the
    decisions ledger.
    """
    vals = [capacity.capacity_upper(s, 1.0).value for s in S_GRID]
    ratio = vals[-1] / vals[0]
    print(f"[INFO] c2.hundredfold-drop: measured ratio {ratio:.4f}, "
          f"log-law prediction {math.log(1e-3) / math.log(1e-12):.4f}")
    assert ratio <= 0.01, (
        f"logarithmic decay: ratio {ratio:.4f} (= |log s1|/|log s3| = 0.25 asymptotically)"
    )


# ---------------------------------------------------------------------------
# criterion 3: weak-Bochner counterexample
# ---------------------------------------------------------------------------

R_GRID = (0.1, 0.05, 0.025, 0.0125)
LIGHT = bochner.WBQuadSpec(h_order=6, h_order_check=8, t_tol=1e-7)


def _criterion3_combo(results, n, beta, rng, spec, n_fd, n_pairings):
    tag = f"c3[beta={beta},n={n}]"
    p = bochner.make_params(0.1, n=n, beta=beta, K=-1.0)

    # (a) the weighted Laplacian of u vanishes on the inner slab
    inner = bochner.sample_points(p, 1000, rng, region="inner")
    lap_inner = np.max(np.abs(bochner.fields_batch(inner, p)["lap_u"]))
    trans = bochner.sample_points(p, 200, rng, region="u-core")
    scale = np.max(np.abs(bochner.fields_batch(trans, p)["lap_u"]))
    check(results, f"{tag}.a inner-slab harmonicity", lap_inner <= 1e-8 * scale,
          f"max |lap_u| {lap_inner:.1e} vs scale {scale:.2e}")

    # (b) finite-difference validation at regular points
    worst = 0.0
    per = max(n_fd // 3, 1)
    for region in ("u-core", "q-core", "phi-core"):
        for x in bochner.sample_points(p, per, rng, region=region, t_min_frac=0.05):
            c = bochner.fd_laplacian_check(x, p)
            worst = max(worst, c.rel_u, c.rel_phi)
    check(results, f"{tag}.b fd-validation {3 * per} points", worst <= 1e-5,
          f"worst rel {worst:.2e}")

    # (c, d) r-scan: signs, monotonicity, fitted exponents
    rows = bochner.wb_scan(R_GRID, n=n, beta=beta, K=-1.0, spec=spec)
    lhs_vals = [res.lhs for _, res in rows]
    rhs_vals = [res.rhs for _, res in rows]
    check(results, f"{tag}.c lhs negative on grid", all(v < 0 for v in lhs_vals),
          ", ".join(f"{v:.3g}" for v in lhs_vals))
    check(results, f"{tag}.c |lhs| increasing", all(
        abs(b) > abs(a) for a, b in zip(lhs_vals, lhs_vals[1:])))
    lhs_fit = bochner.fit_scaling([(r, res.lhs) for r, res in rows])
    check(results, f"{tag}.c lhs slope", abs(lhs_fit.exponent + 1 + beta) <= 0.1,
          f"{lhs_fit.exponent:.4f} vs {-(1 + beta)}, residual {lhs_fit.residual:.4f}")
    check(results, f"{tag}.c fit residual", lhs_fit.residual <= 0.02)
    rhs_fit = bochner.fit_scaling([(r, res.rhs) for r, res in rows])
    check(results, f"{tag}.d rhs slope (K=-1)", abs(rhs_fit.exponent - (1 - beta)) <= 0.1,
          f"{rhs_fit.exponent:.4f} vs {1 - beta}")
    check(results, f"{tag}.d |rhs| decreasing", all(
        abs(b) < abs(a) for a, b in zip(rhs_vals, rhs_vals[1:])))

    # net effect: for each K there is r in the grid with lhs < rhs
    r_small, res_small = rows[-1]
    rhs_unit = res_small.rhs / -1.0  # the K-independent positive factor
    for K in (-1.0, 0.0, 1.0):
        check(results, f"{tag}.net wB fails at K={K:g}",
              res_small.lhs < K * rhs_unit,
              f"lhs {res_small.lhs:.3g} < rhs {K * rhs_unit:.3g} at r={r_small}")

    # (f) weak-Laplacian self-consistency
    psis = [
        (bochner.PlateauBump(0.0, 0.3, 0.2), bochner.PlateauBump(-0.3, 0.0, 0.2)),
        (bochner.PlateauBump(0.05, 0.2, 0.15), bochner.PlateauBump(-0.2, -0.05, 0.15)),
        (bochner.PlateauBump(-0.25, 0.0, 0.15), bochner.PlateauBump(-0.1, 0.15, 0.15)),
        (bochner.PlateauBump(-0.15, 0.15, 0.15), bochner.PlateauBump(-0.35, 0.0, 0.15)),
        (bochner.PlateauBump(0.1, 0.35, 0.2), bochner.PlateauBump(-0.15, 0.05, 0.15)),
    ][:n_pairings]
    worst = 0.0
    for bumps in psis:
        if n == 3:
            bumps = bumps + (bochner.PlateauBump(14.5, 15.5, 0.4),)
            left, right, err = bochner.weak_laplacian_pairing(p, bumps, t_tol=1e-6, h_order=6)
        else:
            left, right, err = bochner.weak_laplacian_pairing(p, bumps)
        scale = max(abs(left), abs(right), 1e-9)
        tol = max(5.0 * err, 1e-5 * scale)
        worst = max(worst, abs(left - right) / tol)
    check(results, f"{tag}.f weak-Laplacian pairing x{len(psis)}", worst <= 1.0,
          f"worst diff/tolerance {worst:.2f}")


def test_criterion3_weak_bochner_counterexample():
    t0 = time.monotonic()
    results = []
    rng = np.random.default_rng(7)

    for beta in (0.3, 0.5, 0.7):
        _criterion3_combo(results, 2, beta, rng, bochner.WBQuadSpec(),
                          n_fd=99, n_pairings=5 if beta == 0.5 else 2)
    _criterion3_combo(results, 3, 0.5, rng, LIGHT, n_fd=30, n_pairings=1)

    # (e) the leading constant is negative across the temperature range
    frozen = {
        0.1: -0.7672888791139976,
        0.2: -1.6118829931360061,
        0.3: -2.5842334787328443,
        0.4: -3.7662239794921195,
        0.5: -5.302938506082167,
        0.6: -7.4820442799371385,
        0.7: -10.971900505901164,
        0.8: -17.773948282657322,
        0.9: -37.88938105917619,
    }
    worst = 0.0
    all_neg = True
    for beta, want in frozen.items():
        got = bochner.leading_constant(beta)
        all_neg = all_neg and got < 0.0
        worst = max(worst, abs(got - want) / abs(want))
    check(results, "c3.e leading constant negative, matches oracle",
          all_neg and worst <= 1e-8, f"worst rel {worst:.2e}")

    finish(results, time.monotonic() - t0, 180.0)


# ---------------------------------------------------------------------------
# criterion 4: collision phase transition
# ---------------------------------------------------------------------------

X0 = (-0.5, 0.5)


def test_criterion4_collision_phase_transition():
    t0 = time.monotonic()
    results = []

    ps = sde.simulate(X0, beta=2.0, T=1.0, dt0=1e-4, seed=0, noise=False)
    gap = abs(ps.final[0] - ps.final[1])
    want = math.sqrt(1.0 + 2.0 * 2.0 * 1.0)
    check(results, "c4.deterministic gap law", abs(gap - want) <= 1e-3 * want,
          f"{gap:.6f} vs {want:.6f}")

    hi = sde.collision_stats(2, 1.5, 1.0, 2000, seed=101, x0=X0)
    check(results, "c4.beta=1.5 frequency <= 0.01", hi.frequency <= 0.01,
          f"{hi.frequency:.4f}")

    lo = sde.collision_stats(2, 0.5, 1.0, 2000, seed=101, x0=X0)
    oracle = sde.bessel_hit_oracle(0.5, 1.0, 1.0, 2000, seed=101)
    check(results, "c4.beta=0.5 within 0.05 of gap oracle",
          abs(lo.frequency - oracle) <= 0.05,
          f"simulate {lo.frequency:.4f} vs oracle {oracle:.4f}")

    lo_half = sde.collision_stats(2, 0.5, 1.0, 2000, seed=101, x0=X0, threshold=5e-7)
    width = lo.ci_high - lo.ci_low
    check(results, "c4.threshold halving (beta=0.5)",
          abs(lo.frequency - lo_half.frequency) < width,
          f"shift {abs(lo.frequency - lo_half.frequency):.4f} < CI width {width:.4f}")
    hi_half = sde.collision_stats(2, 1.5, 1.0, 2000, seed=101, x0=X0, threshold=5e-7)
    check(results, "c4.threshold halving (beta=1.5)", hi_half.frequency <= 0.01)

    com = sde.center_of_mass_samples(2, 1.5, 1.0, 2000, seed=55, x0=X0)
    ks = stats.kstest(com, "norm", args=(0.0, math.sqrt(1.0 / 2.0)))
    check(results, "c4.center-of-mass KS", ks.pvalue >= 0.01, f"p={ks.pvalue:.3f}")

    finish(results, time.monotonic() - t0, 120.0)


def test_criterion4_low_beta_frequency_floor():
    """Stated clause: beta = 0.5 collision frequency >= 0.5.

    Unattainable: the gap g with dg = (beta/g) dt + sqrt(2) dW makes
    rho = g/sqrt(2) a Bessel process of dimension beta + 1 = 1.5, whose
    hitting probability from rho_0 = 1/sqrt(2) by T = 1 is the regularized
    upper incomplete gamma Q(1/4, rho_0^2/(2T)) = Q(0.25, 0.25) = 0.2563.
    The simulator and the independent gap oracle both measure ~0.26.  Kept
    as stated; see the decisions ledger.
    """
    from scipy.special import gammaincc

    exact = float(gammaincc(0.25, 0.25))
    cs = sde.collision_stats(2, 0.5, 1.0, 2000, seed=101, x0=X0)
    print(f"[INFO] c4.frequency-floor: measured {cs.frequency:.4f}, "
          f"closed form {exact:.4f}")
    assert cs.frequency >= 0.5, (
        f"collision probability is Q(1/4,1/4)={exact:.4f}; measured {cs.frequency:.4f}"
    )


# ---------------------------------------------------------------------------
# criterion 5: heat-semigroup gradient-estimate dichotomy
# ---------------------------------------------------------------------------


def test_criterion5_heat_dichotomy():
    t0 = time.monotonic()
    results = []
    t_heat = 0.01

    forms = {}
    for beta in (1.5, 0.5):
        for m in (1024, 2048, 4096):
            forms[(beta, m)] = heat.assemble_form(beta, 1.0, m)

    # beta = 1.5: the estimate holds for the whole suite, margins shrink
    for name, fn in heat.DATUM_PROFILES.items():
        r1 = heat.margin_refinement(forms[(1.5, 2048)], forms[(1.5, 1024)], fn, t_heat)
        r2 = heat.margin_refinement(forms[(1.5, 4096)], forms[(1.5, 2048)], fn, t_heat)
        ok = (
            r1.fine.margin <= 5.0 * r1.err_est
            and max(r2.fine.margin, 0.0) <= max(max(r1.fine.margin, 0.0), 5.0 * r2.err_est)
        )
        check(results, f"c5.beta=1.5 {name}", ok,
              f"m2048 {r1.fine.margin:.2e} (est {r1.err_est:.1e}), m4096 {r2.fine.margin:.2e}")
        rN = heat.margin_refinement(forms[(1.5, 2048)], forms[(1.5, 1024)], fn, t_heat, N=3.5)
        check(results, f"c5.beta=1.5 {name} finite-N", rN.fine.margin <= 5.0 * rN.err_est)

    # beta = 0.5: the search finds a growing violation; even data still pass
    s1 = heat.counterexample_search(forms[(0.5, 2048)], t_heat)
    s2 = heat.counterexample_search(forms[(0.5, 4096)], t_heat)
    ok = (
        s1.best.trend == "growing"
        and s1.best.fine.margin >= 10.0 * s1.best.err_est
        and s2.best.fine.margin >= 2.0 * s1.best.fine.margin
    )
    check(results, "c5.beta=0.5 violation grows", ok,
          f"{s1.best.fine.datum}: m2048 {s1.best.fine.margin:.3e} "
          f">= 10 x {s1.best.err_est:.1e}, growth {s2.best.fine.margin / s1.best.fine.margin:.2f}x")
    for name in ("gauss-even", "cos-even", "twin-bump-even"):
        fn = heat.DATUM_PROFILES[name]
        r1 = heat.margin_refinement(forms[(0.5, 2048)], forms[(0.5, 1024)], fn, t_heat)
        r2 = heat.margin_refinement(forms[(0.5, 4096)], forms[(0.5, 2048)], fn, t_heat)
        ok = r1.fine.margin <= 5.0 * r1.err_est and r2.fine.margin <= 5.0 * r2.err_est
        check(results, f"c5.beta=0.5 {name} passes", ok,
              f"margins {r1.fine.margin:.2e}, {r2.fine.margin:.2e}")

    finish(results, time.monotonic() - t0, 120.0)


# ---------------------------------------------------------------------------
# criterion 6: reproducibility of the CLI battery
# ---------------------------------------------------------------------------


def _run_cli(outdir, workers):
    cmd = [
        sys.executable, "-m", "dysonlab", "all",
        "--beta", "0.8", "--seed", "33", "--paths", "200", "--samples", "200",
        "--grid", "128", "--s-grid", "1e-3,1e-5", "--workers", str(workers),
        "--out", str(outdir),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr


def test_criterion6_cli_reproducibility(tmp_path):
    results = []
    dirs = {"first": 1, "second": 1, "fourwide": 4}
    for name, workers in dirs.items():
        _run_cli(tmp_path / name, workers)
    names = sorted(os.listdir(tmp_path / "first"))
    identical = True
    for fname in names:
        with open(tmp_path / "first" / fname, "rb") as fh:
            blob = fh.read()
        for other in ("second", "fourwide"):
            with open(tmp_path / other / fname, "rb") as fh:
                if fh.read() != blob:
                    identical = False
    check(results, "c6.byte-identical across runs and workers {1,4}", identical,
          f"{len(names)} files compared")
    failed = [name for name, ok in results if not ok]
    assert not failed
