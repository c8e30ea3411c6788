"""Acceptance-check registry behind the command line verifier.

Each target function returns a list of CheckResult records; the CLI
renders them as text or a versioned JSON report.  Checks are sized so
that a full run stays in the low minutes on a laptop while still
exercising every headline property at its contractual tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import contour, fuss_catalan, lve, lvr_action, oracle, perturbation

SCHEMA = "lvr-lab/1"
DEFAULT_SEED = 1234


@dataclass(frozen=True)
class VerifyConfig:
    """Run parameters; p, n, lam narrow the oracle target to one point
    and p_max sets the upper coupling power for the exact identities."""

    seed: int = DEFAULT_SEED
    samples: int = 60000
    workers: int = 2
    p: int | None = None
    n: int | None = None
    lam: complex | None = None
    p_max: int = 6


@dataclass(frozen=True)
class CheckResult:
    check: str
    params: dict
    expected: str
    got: str
    tol: float
    passed: bool
    runtime_s: float = 0.0


def _check(name, params, expected, got, tol, passed, t0) -> CheckResult:
    return CheckResult(
        check=name,
        params=params,
        expected=str(expected),
        got=str(got),
        tol=float(tol),
        passed=bool(passed),
        runtime_s=round(time.perf_counter() - t0, 3),
    )


def _cut_plane_samples(p: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random points with |z| <= 10 kept at least 1e-3 away from the cut
    [R_p, inf)."""
    out = []
    r_p = fuss_catalan.cut_start(p)
    while len(out) < n:
        z = rng.uniform(-10, 10) + 1j * rng.uniform(-10, 10)
        if abs(z) > 10:
            continue
        if z.real >= r_p - 1e-3 and abs(z.imag) < 1e-3:
            continue
        out.append(z)
    return np.array(out)


def run_fc(cfg: VerifyConfig):
    checks = []
    rng = np.random.default_rng(cfg.seed)

    t0 = time.perf_counter()
    worst = 0.0
    for p in (2, 3, 4, 5):
        ev = fuss_catalan.FcEvaluator(p)
        zs = _cut_plane_samples(p, 1000, rng)
        t = ev.tp_eval_many(zs)
        worst = max(worst, float(np.abs(zs * t**p - t + 1).max()))
    checks.append(_check(
        "fc.functional_equation", {"p": [2, 3, 4, 5], "samples": 1000},
        "residual <= 1e-10", f"{worst:.3e}", 1e-10, worst <= 1e-10, t0,
    ))

    t0 = time.perf_counter()
    ev2 = fuss_catalan.FcEvaluator(2)
    zs = _cut_plane_samples(2, 200, rng)
    t = ev2.tp_eval_many(zs)
    closed = (1 - np.sqrt(1 - 4 * zs)) / (2 * zs)
    dev = float(np.abs(t - closed).max())
    checks.append(_check(
        "fc.closed_form_p2", {"samples": 200},
        "matches (1-sqrt(1-4z))/(2z) to 1e-12", f"{dev:.3e}", 1e-12, dev <= 1e-12, t0,
    ))

    t0 = time.perf_counter()
    ok = True
    for p in (2, 3, 4, 5):
        # independent recursion: series of T = 1 + z T^p by convolution
        coeffs = [1]
        for n in range(1, 11):
            power = [1]
            for _ in range(p):
                power = [
                    sum(power[i] * coeffs[k - i] for i in range(max(0, k - n + 1), min(len(power), k + 1)))
                    for k in range(n)
                ]
            coeffs.append(power[n - 1])
        table = fuss_catalan.fc_numbers_table(p, 10)
        ok = ok and all(row.value == coeffs[row.n] for row in table)
    checks.append(_check(
        "fc.numbers_vs_series_recursion", {"p": [2, 3, 4, 5], "n_max": 10},
        "exact integer match", "match" if ok else "MISMATCH", 0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    xs = -np.logspace(-3, 4, 200)
    vals = np.array([fuss_catalan.FcEvaluator(p).tp_eval_many(xs) for p in (2, 3, 4, 5)])
    min_re = float(vals.real.min())
    max_im = float(np.abs(vals.imag).max())
    pos_ok = min_re > 0 and max_im < 1e-12
    checks.append(_check(
        "fc.positivity_negative_axis", {"z": "[-1e4, -1e-3]", "samples": 200},
        "T_p real and > 0", f"min {min_re:.3e}, |imag| {max_im:.1e}", 0.0, pos_ok, t0,
    ))

    t0 = time.perf_counter()
    dev = max(
        abs(fuss_catalan.cut_start(p) - (p - 1) ** (p - 1) / p**p) for p in (2, 3, 4, 5)
    )
    checks.append(_check(
        "fc.cut_start_closed_form", {"p": [2, 3, 4, 5]},
        "(p-1)^(p-1)/p^p", f"{dev:.1e}", 1e-15, dev <= 1e-15, t0,
    ))
    return checks


def run_action(cfg: VerifyConfig):
    checks = []
    rng = np.random.default_rng(cfg.seed)

    t0 = time.perf_counter()
    worst = 0.0
    for p in (2, 3):
        for _ in range(25):
            n = int(rng.integers(1, 5))
            spec = lvr_action.Spectrum(tuple(np.sort(rng.uniform(0.05, 3.0, n))))
            lam = rng.uniform(0.02, 0.3) * np.exp(1j * rng.uniform(-2.0, 2.0))
            pr = lvr_action.ModelParams(p=p, lam=complex(lam), n_l=n, n_r=n)
            a = lvr_action.matrix_a(spec, pr)
            res = float(np.abs(np.array(spec.values) - (a + lam * a**p)).max())
            worst = max(worst, res)
    checks.append(_check(
        "action.scalar_map_inverts", {"p": [2, 3], "draws": 50},
        "s = a + lam a^p to 1e-10", f"{worst:.3e}", 1e-10, worst <= 1e-10, t0,
    ))

    t0 = time.perf_counter()
    zero = lvr_action.action_s(
        lvr_action.Spectrum((0.5, 1.5)),
        lvr_action.ModelParams(p=3, lam=0.0, n_l=2, n_r=2),
    ).total
    checks.append(_check(
        "action.zero_coupling_exact", {"p": 3, "N": 2},
        "S == 0", str(zero), 0.0, zero == 0j, t0,
    ))

    t0 = time.perf_counter()
    worst = 0.0
    for p in (2, 3):
        s = float(rng.uniform(0.3, 2.0))
        lam = complex(rng.uniform(0.05, 0.2))
        pr = lvr_action.ModelParams(p=p, lam=lam, n_l=1, n_r=1)
        got = lvr_action.action_s(lvr_action.Spectrum((s,)), pr).total
        ev = lvr_action.evaluator(p)
        a = ev.a_eval(lam, s)
        want = -np.log(1 + lam * p * a ** (p - 1))
        worst = max(worst, abs(got - want))
    checks.append(_check(
        "action.scalar_closed_form", {"p": [2, 3]},
        "-log(1 + p lam a^(p-1))", f"{worst:.3e}", 1e-10, worst <= 1e-10, t0,
    ))

    t0 = time.perf_counter()
    worst = 0.0
    for p in (2, 3):
        for _ in range(25):
            n = int(rng.integers(2, 5))
            vals = np.sort(rng.uniform(0.1, 3.0, n))
            while np.min(np.diff(vals)) < 1e-3:
                vals = np.sort(rng.uniform(0.1, 3.0, n))
            lam = rng.uniform(0.02, 0.15) * np.exp(1j * rng.uniform(-1.5, 1.5))
            pr = lvr_action.ModelParams(p=p, lam=complex(lam), n_l=n, n_r=n)
            worst = max(worst, lvr_action.resolvent_derivative_check(
                lvr_action.Spectrum(tuple(vals)), pr))
    checks.append(_check(
        "action.resolvent_derivative", {"p": [2, 3], "draws": 50},
        "residual <= 1e-8", f"{worst:.3e}", 1e-8, worst <= 1e-8, t0,
    ))

    t0 = time.perf_counter()
    ok = True
    worst_rel = 0.0
    for k in range(20):
        n_l = int(rng.integers(1, 4))
        n_r = int(rng.integers(n_l, 5)) if k % 2 else n_l
        m = (rng.standard_normal((n_l, n_r)) + 1j * rng.standard_normal((n_l, n_r))) / 2
        p = int(rng.integers(2, 4))
        pr = lvr_action.ModelParams(p=p, lam=complex(rng.uniform(0.02, 0.1)), n_l=n_l, n_r=n_r)
        norm = float(np.linalg.norm(m, 2))
        res = lvr_action.selective_integration_check(m, pr)
        scale = 1e-8 * (1 + norm ** (3 * p))
        worst_rel = max(worst_rel, res / scale)
        ok = ok and res <= scale
    checks.append(_check(
        "action.selective_integration", {"matrices": 20, "shapes": "square+rect"},
        "residual within scaled 1e-8", f"worst {worst_rel:.2e} of budget", 1e-8, ok, t0,
    ))
    return checks


def _contour_triple(scale: float = 1.0):
    g0 = contour.make_keyhole(0.14, 6.0 * scale, 0.36, nodes_per_piece=192)
    g1 = contour.make_keyhole(0.10, 4.0 * scale, 0.27, nodes_per_piece=192)
    g2 = contour.make_keyhole(0.05, 3.5 * scale, 0.18, nodes_per_piece=192)
    return contour.ContourTriple(g0, g1, g2)


def run_contour(cfg: VerifyConfig):
    checks = []

    # the widest keyhole has psi = 0.36, so the lemma geometry needs
    # epsilon > 2 (p - 1) psi = 1.44 at p = 3
    wide = lvr_action.PacmanDomain(epsilon=1.56, eta=0.2)

    t0 = time.perf_counter()
    pr = lvr_action.ModelParams(p=3, lam=0.05 * np.exp(0.25j * np.pi), n_l=2, n_r=2,
                                pacman=wide)
    spec = lvr_action.Spectrum((0.5, 1.2))
    got = contour.reconstruct_s(spec, pr, _contour_triple(), t_nodes=20)
    want = lvr_action.action_s(spec, pr).total
    rel = abs(got - want) / abs(want)
    checks.append(_check(
        "contour.reconstruct_p3_complex", {"p": 3, "N": 2, "lam": "0.05 exp(i pi/4)"},
        "rel <= 1e-5", f"{rel:.3e}", 1e-5, rel <= 1e-5, t0,
    ))

    t0 = time.perf_counter()
    pr1 = lvr_action.ModelParams(p=2, lam=0.1, n_l=1, n_r=1, pacman=wide)
    spec1 = lvr_action.Spectrum((1.0,))
    got = contour.reconstruct_s(spec1, pr1, _contour_triple(), t_nodes=20)
    want = lvr_action.action_s(spec1, pr1).total
    rel = abs(got - want) / abs(want)
    checks.append(_check(
        "contour.reconstruct_p2_real", {"p": 2, "N": 1, "lam": 0.1},
        "rel <= 1e-5", f"{rel:.3e}", 1e-5, rel <= 1e-5, t0,
    ))

    t0 = time.perf_counter()
    k = contour.make_keyhole(0.1, 4.0, 0.2, nodes_per_piece=160)
    spec = lvr_action.Spectrum((0.5, 1.7))
    pr0 = lvr_action.ModelParams(p=3, lam=0.0, n_l=2, n_r=2, pacman=wide)
    a_rec = contour.cauchy_reconstruct_a(spec, pr0, k)
    dev = float(np.abs(a_rec - np.array(spec.values)).max())
    checks.append(_check(
        "contour.identity_reconstruction", {"lam": 0},
        "a == s to 1e-9", f"{dev:.3e}", 1e-9, dev <= 1e-9, t0,
    ))

    t0 = time.perf_counter()
    pr_audit = lvr_action.ModelParams(
        p=2, lam=0.15 * np.exp(1j * (np.pi - 0.8)), n_l=1, n_r=1,
        pacman=lvr_action.PacmanDomain(epsilon=0.5, eta=0.2),
    )
    audit = contour.cut_sector_audit(pr_audit, contour.make_keyhole(0.1, 3.0, 0.2), samples=256)
    checks.append(_check(
        "contour.cut_sector_audit", {"psi": 0.2, "epsilon": 0.5, "eta": 0.2},
        "compliant geometry passes", f"passed={audit.passed}", 0.0, audit.passed, t0,
    ))

    t0 = time.perf_counter()
    ok = True
    summary = []
    for p in (2, 3):
        prev = None
        for mag in (0.1, 0.05, 0.025):
            pr = lvr_action.ModelParams(
                p=p, lam=mag * np.exp(1.2j), n_l=1, n_r=1,
                pacman=lvr_action.PacmanDomain(epsilon=1.56, eta=0.2),
            )
            tri = contour.ContourTriple(
                contour.make_keyhole(0.14, math.inf, 0.36, nodes_per_piece=64),
                contour.make_keyhole(0.10, math.inf, 0.27, nodes_per_piece=64),
                contour.make_keyhole(0.05, math.inf, 0.18, nodes_per_piece=64),
            )
            b = contour.bound_integrals(pr, tri)
            vals = [b.i1, b.i2, b.i3]
            ok = ok and all(math.isfinite(v) for v in vals)
            if prev is not None:
                active = vals if p != 2 else vals[1:]
                pa = prev if p != 2 else prev[1:]
                ok = ok and all(v < q for v, q in zip(active, pa))
            prev = vals
        summary.append(f"p={p} I=({b.i1:.1f},{b.i2:.1f},{b.i3:.1f})")
    checks.append(_check(
        "contour.bound_integrals_decrease", {"p": [2, 3], "magnitudes": [0.1, 0.05, 0.025]},
        "finite, strictly decreasing with |lam|", "; ".join(summary), 0.0, ok, t0,
    ))
    return checks


def run_oracle(cfg: VerifyConfig):
    checks = []

    if cfg.p is not None or cfg.n is not None or cfg.lam is not None:
        # focused single-point representation-equality report
        p = cfg.p if cfg.p is not None else 2
        n = cfg.n if cfg.n is not None else 2
        lam = cfg.lam if cfg.lam is not None else 0.1 + 0j
        pr = lvr_action.ModelParams(p=p, lam=lam, n_l=n, n_r=n)
        t0 = time.perf_counter()
        zo, zl = oracle.z_original(pr).value, oracle.z_lvr(pr).value
        rel = abs(zo - zl) / abs(zo)
        checks.append(_check(
            "oracle.identity_focused",
            {"p": p, "N": n, "lam": str(lam)},
            "rel <= 1e-6", f"{rel:.3e}", 1e-6, rel <= 1e-6, t0,
        ))
        t0 = time.perf_counter()
        zm = oracle.z_lvr(pr, oracle.McConfig(
            n_samples=cfg.samples, seed=cfg.seed, n_workers=cfg.workers))
        sig = abs(zm.value - zo) / zm.error_estimate
        checks.append(_check(
            "oracle.identity_focused_mc",
            {"p": p, "N": n, "lam": str(lam), "samples": cfg.samples},
            "within 3 sigma", f"{sig:.2f} sigma", 3.0, sig <= 3.0, t0,
        ))
        return checks

    t0 = time.perf_counter()
    worst = 0.0
    for p in (2, 3):
        for lam in (0.05, 0.2, 1.0):
            pr = lvr_action.ModelParams(p=p, lam=lam, n_l=1, n_r=1)
            dev = abs(oracle.z_original(pr).value - oracle.z_lvr(pr).value)
            worst = max(worst, dev)
    checks.append(_check(
        "oracle.identity_scalar", {"p": [2, 3], "lam": [0.05, 0.2, 1.0]},
        "|z_original - z_lvr| <= 1e-8", f"{worst:.3e}", 1e-8, worst <= 1e-8, t0,
    ))

    t0 = time.perf_counter()
    worst = 0.0
    for p in (2, 3):
        for n in (2, 3):
            pr = lvr_action.ModelParams(p=p, lam=0.1, n_l=n, n_r=n)
            zo, zl = oracle.z_original(pr).value, oracle.z_lvr(pr).value
            worst = max(worst, abs(zo - zl) / abs(zo))
    checks.append(_check(
        "oracle.identity_matrix_quadrature", {"p": [2, 3], "N": [2, 3], "lam": 0.1},
        "rel <= 1e-6", f"{worst:.3e}", 1e-6, worst <= 1e-6, t0,
    ))

    t0 = time.perf_counter()
    ok = True
    worst_sigma = 0.0
    for p, n in ((2, 2), (3, 3)):
        pr = lvr_action.ModelParams(p=p, lam=0.05 * np.exp(0.25j * np.pi), n_l=n, n_r=n)
        zq = oracle.z_original(pr).value
        zm = oracle.z_lvr(pr, oracle.McConfig(n_samples=cfg.samples, seed=cfg.seed, n_workers=cfg.workers))
        sig = abs(zm.value - zq) / zm.error_estimate
        worst_sigma = max(worst_sigma, sig)
        ok = ok and sig <= 3.0
    checks.append(_check(
        "oracle.identity_monte_carlo", {"(p,N)": [[2, 2], [3, 3]], "lam": "0.05 exp(i pi/4)",
                                        "samples": cfg.samples},
        "within 3 sigma", f"worst {worst_sigma:.2f} sigma", 3.0, ok, t0,
    ))

    t0 = time.perf_counter()
    worst = max(oracle.measure_self_test(n) for n in (1, 2, 3))
    checks.append(_check(
        "oracle.measure_normalization", {"N": [1, 2, 3]},
        "Z(0) == 1 to 1e-8", f"{worst:.3e}", 1e-8, worst <= 1e-8, t0,
    ))
    return checks


def run_perturb(cfg: VerifyConfig):
    checks = []

    t0 = time.perf_counter()
    nl1 = perturbation.BivariatePoly.nl(1)
    ok = True
    for p in range(2, cfg.p_max + 1):
        s1, s2 = perturbation.effective_action_series(p, order=2)
        m_p = perturbation.moment_sd(perturbation.TraceMonomial((p,)))
        ok = ok and perturbation.moment(s1, square=True) == -(nl1 * m_p)
        lhs = perturbation.moment(s2, square=True) + Fraction(1, 2) * perturbation.moment(
            s1 * s1, square=True
        )
        rhs = Fraction(1, 2) * perturbation.BivariatePoly.nl(2) * perturbation.moment_sd(
            perturbation.TraceMonomial((p, p))
        )
        ok = ok and lhs == rhs
    checks.append(_check(
        "perturb.exact_identities", {"p": f"2..{cfg.p_max}"},
        "polynomial identities in N", "hold" if ok else "FAIL", 0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    s1, s2 = perturbation.effective_action_series(3, order=2)
    ok = s1 == perturbation.closed_form_s1(3) and s2 == perturbation.closed_form_s2(3)
    checks.append(_check(
        "perturb.p3_closed_forms", {"p": 3},
        "S1, S2 match closed forms", "match" if ok else "FAIL", 0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    ok = True
    for p in range(2, 7):
        orig = perturbation.logz_series(p, 2, "original", square=True)
        lvr_s = perturbation.logz_series(p, 2, "lvr", square=True)
        ok = ok and orig[0] == lvr_s[0] and orig[1] == lvr_s[1]
    sq = perturbation.logz_series(2, 2, "original", square=True)
    ok = ok and sq[0].evaluate(1, 1) == -2 and sq[1].evaluate(1, 1) == 10
    q = perturbation.quartic_report()
    flags = {(r.order, r.interpretation): r.matches for r in q.rows}
    ok = ok and flags[(1, "per_nlnr")] and flags[(2, "raw")]
    checks.append(_check(
        "perturb.quartic_orders", {"orders": [1, 2]},
        "logZ coeffs -2, +10; representations agree", "hold" if ok else "FAIL", 0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    ok = True
    worst = 0.0
    for p in (2, 3):
        coeffs = oracle.z_series_fd(p, order=2)
        for n in (1, 2):
            want = (-1) ** n * math.factorial(p * n) / math.factorial(n)
            rel = abs(coeffs[n - 1] - want) / abs(want)
            worst = max(worst, rel)
            ok = ok and rel <= 1e-3
    checks.append(_check(
        "perturb.scalar_z_series", {"p": [2, 3], "orders": [1, 2]},
        "(pn)!/n! to rel 1e-3", f"worst rel {worst:.2e}", 1e-3, ok, t0,
    ))
    return checks


def run_bkar(cfg: VerifyConfig):
    checks = []
    rng = np.random.default_rng(cfg.seed)

    t0 = time.perf_counter()
    ok = lve.bkar_identity_check({((0, 1), (0, 1)): 1}, 2) == 0
    ok = ok and lve.bkar_identity_check({((0, 1), (1, 2)): 1}, 3) == 0
    edges4 = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    f = {}
    for _ in range(10):
        deg = int(rng.integers(0, 4))
        mono = tuple(sorted(edges4[int(rng.integers(6))] for _ in range(deg)))
        f[mono] = f.get(mono, 0) + int(rng.integers(-4, 5))
    ok = ok and lve.bkar_identity_check(f, 4) == 0
    checks.append(_check(
        "bkar.interpolation_identity", {"n": [2, 3, 4]},
        "residual exactly 0 (rational)", "0" if ok else "NONZERO", 0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    pools = {n: lve.enumerate_forests(n) for n in range(2, 7)}
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        forest = pools[n][int(rng.integers(len(pools[n])))]
        w = {e: float(rng.uniform()) for e in forest.edges}
        worst = min(worst, float(np.linalg.eigvalsh(lve.bkar_interpolate(forest, w))[0]))
    checks.append(_check(
        "bkar.psd_interpolation", {"draws": 1000, "n": "2..6"},
        "min eigenvalue >= -1e-12", f"{worst:.2e}", 1e-12, worst >= -1e-12, t0,
    ))

    t0 = time.perf_counter()
    ok = all(len(lve.enumerate_trees(n)) == n ** max(n - 2, 0) for n in range(1, 7))
    counts = {}
    for t in lve.enumerate_trees(5):
        deg = [0] * 5
        for a, b in t.edges:
            deg[a] += 1
            deg[b] += 1
        counts[tuple(deg)] = counts.get(tuple(deg), 0) + 1
    for profile, count in counts.items():
        denom = 1
        for r in profile:
            denom *= math.factorial(r - 1)
        ok = ok and count == math.factorial(3) // denom
    ok = ok and len(lve.enumerate_trees(2, oriented=True, decorated=True)) == 8
    checks.append(_check(
        "bkar.tree_counts", {"n": "1..6"},
        "n^(n-2), Cayley histogram, 2^(2(n-1)) decorations", "hold" if ok else "FAIL",
        0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    factorized = {((0, 1), (0, 1)): 1, ((0, 1),): 2, (): 3}
    ok = lve.bkar_forest_sum(factorized, 3, trees_only=True) == 0
    checks.append(_check(
        "bkar.connected_part_vanishes", {"n": 3},
        "tree sum of factorized f == 0", "0" if ok else "NONZERO", 0.0, ok, t0,
    ))
    return checks


def run_lve(cfg: VerifyConfig):
    checks = []
    rng = np.random.default_rng(cfg.seed)

    t0 = time.perf_counter()
    ok = True
    for q in range(0, 6):
        for qbar in range(0, 6 - q):
            r = q + qbar
            words = lve.faadibruno_enumerate(q, qbar)
            ok = ok and 0 < len(words) <= 2**r * math.factorial(r)
            for w in words:
                r_pi, r_m, r_md, i_pi = w.lemma_counts
                ok = ok and r_pi == 1 + i_pi and r_m + r_md == r - 2 * i_pi
                ok = ok and len(w.letters) == r + 1
    words11 = lve.faadibruno_enumerate(1, 1)
    ok = ok and sorted(w.letters for w in words11) == sorted([
        ("m_resolvent", "resolvent", "mdag_resolvent"),
        ("resolvent", "mdag_resolvent_m", "resolvent"),
        ("resolvent", "identity", "resolvent"),
    ])
    checks.append(_check(
        "lve.corner_word_invariants", {"r": "0..5"},
        "count and corner tallies per lemma", "hold" if ok else "FAIL", 0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    m = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / 2
    worst1 = max(
        lve.faadibruno_numeric_check(2.4 + 0.3j, m, 1, 0),
        lve.faadibruno_numeric_check(2.4 + 0.3j, m, 0, 1),
    )
    worst2 = max(
        lve.faadibruno_numeric_check(2.4 + 0.3j, m, q, qb)
        for q, qb in ((1, 1), (2, 0), (0, 2), (2, 2))
    )
    ok = worst1 <= 1e-6 and worst2 <= 1e-4
    checks.append(_check(
        "lve.corner_vs_finite_difference", {"N": 2, "orders": "(1,0)..(2,2)"},
        "first order 1e-6, higher 1e-4", f"{worst1:.1e} / {worst2:.1e}", 1e-4, ok, t0,
    ))

    t0 = time.perf_counter()
    pr = lvr_action.ModelParams(p=2, lam=0.1, n_l=2, n_r=2)
    half = lvr_action.ModelParams(p=2, lam=0.05, n_l=2, n_r=2)
    mc = oracle.McConfig(n_samples=max(cfg.samples // 2, 10000), seed=cfg.seed, n_workers=cfg.workers)
    a_full = lve.amplitude_trivial(pr, mc)
    a_half = lve.amplitude_trivial(half, mc)
    ok = abs(a_half.value) < abs(a_full.value)
    checks.append(_check(
        "lve.vertex_amplitude_shrinks", {"N": 2, "p": 2, "lam": [0.1, 0.05]},
        "|A(lam/2)| < |A(lam)|", f"{abs(a_half.value):.4f} < {abs(a_full.value):.4f}",
        0.0, ok, t0,
    ))

    t0 = time.perf_counter()
    ok = True
    margins = []
    for lam in (0.02, 0.05):
        prl = lvr_action.ModelParams(p=2, lam=lam, n_l=2, n_r=2)
        f_ref = oracle.free_energy(prl)
        mc = oracle.McConfig(n_samples=cfg.samples, seed=cfg.seed, n_workers=cfg.workers)
        ps1 = lve.lve_partial_sum(prl, mc, n_max=1)
        ps2 = lve.lve_partial_sum(prl, mc, n_max=2)
        err1, err2 = abs(f_ref - ps1.value), abs(f_ref - ps2.value)
        bars = ps1.std_error + ps2.std_error
        margins.append((err1 - err2) / bars)
        ok = ok and err1 - err2 > bars
    checks.append(_check(
        "lve.partial_sum_improves", {"N": 2, "p": 2, "lam": [0.02, 0.05], "samples": cfg.samples},
        "error(n=2) < error(n=1) beyond bars", f"margins {margins[0]:.1f}x, {margins[1]:.1f}x",
        0.0, ok, t0,
    ))
    return checks


TARGETS = {
    "fc": run_fc,
    "action": run_action,
    "contour": run_contour,
    "oracle": run_oracle,
    "perturb": run_perturb,
    "bkar": run_bkar,
    "lve": run_lve,
}

TARGET_ORDER = ["fc", "action", "contour", "oracle", "perturb", "bkar", "lve"]


def run_target(name: str, cfg: VerifyConfig):
    if name == "all":
        out = []
        for t in TARGET_ORDER:
            out.extend(TARGETS[t](cfg))
        return out
    return TARGETS[name](cfg)


def report_dict(target: str, cfg: VerifyConfig, checks, with_timestamp: bool) -> dict:
    """JSON-ready report.  with_timestamp=False drops every wall-clock
    field so identical configs produce byte-identical documents."""
    rows = []
    for c in checks:
        row = {
            "check": c.check,
            "params": c.params,
            "expected": c.expected,
            "got": c.got,
            "tol": c.tol,
            "pass": c.passed,
        }
        if with_timestamp:
            row["runtime_s"] = c.runtime_s
        rows.append(row)
    doc = {
        "schema": SCHEMA,
        "target": target,
        "seed": cfg.seed,
        "samples": cfg.samples,
        "workers": cfg.workers,
        "n_pass": sum(c.passed for c in checks),
        "n_fail": sum(not c.passed for c in checks),
        "checks": rows,
    }
    if with_timestamp:
        doc["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    return doc
