"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed at the end of the session.
"""

import time

import numpy as np
import pytest

from bbvi_bounds import bounds, experiment, reparam, verify
from bbvi_bounds.basedist import GAUSSIAN, student_t
from bbvi_bounds.config import ExperimentConfig
from bbvi_bounds.targets import target_constants

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance


def report(number, title, passed, detail, started):
    line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail} ({time.time() - started:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def test_1_fertility_constant():
    t0 = time.time()
    A = bounds.abc_entropy_form(
        verify_record(L_H=1.840e3, mu_KL=5.017e2), d=9, M=10, family="cholesky").A
    rel = abs(A - 1.620e4) / 1.620e4
    report(1, "entropy-form A from the Fertility constants", rel <= 0.005,
           f"A = {A:.5g}, relative error {rel:.2e} (tol 5e-3)", t0)


def verify_record(L_H, mu_KL):
    from bbvi_bounds.targets import ConstantsRecord
    return ConstantsRecord(L_H=L_H, mu_KL=mu_KL, zeta_H=np.zeros(9), zeta_KL=np.zeros(9),
                           F_star=0.0, f_KL_star=0.0)


def test_2_norm_identity():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    failures, trials, worst = 0, 0, 0.0
    for family, cond in verify.family_grid():
        for _ in range(1000):
            d = int(rng.integers(1, 21))
            p = verify.random_params(rng, family, d, cond)
            u, g = rng.normal(size=d), rng.normal(size=d)
            direct = np.sum(reparam.pullback(p, u, g) ** 2)
            err = abs(reparam.pullback_sqnorm_identity(p, u, g) - direct) / (1 + direct)
            worst = max(worst, err)
            failures += err > 1e-10
            trials += 1
    report(2, "gradient-norm identity", failures == 0,
           f"{failures} failures in {trials} trials, worst relative error {worst:.1e} (tol 1e-10)", t0)


def test_3_gradients_match_finite_differences():
    t0 = time.time()
    worst = verify.gradient_fd_errors(points=200, seed=3)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(3, "gradients vs central differences (200 points each)",
           max(worst.values()) <= 1e-5, f"{detail} (tol 1e-5)", t0)


@pytest.mark.parametrize("dist", [GAUSSIAN, student_t(8.0)], ids=["gaussian", "student-t8"])
def test_4_expectation_identities(dist):
    t0 = time.time()
    results = verify.expectation_identity_checks(dist, n=10**6, seed=4)
    bad = [name for name, (ok, _) in results.items() if not ok]
    worst = max(abs(z) for name, (_, z) in results.items() if name != "mean-field inequality")
    report(4, f"expectation identities, {dist.kind} base", not bad,
           f"{len(results) - len(bad)}/{len(results)} within 3 SE, worst |z| = {worst:.2f}"
           + (f"; failed: {bad}" if bad else ""), t0)


def dominance(records):
    z = [(r.gvar_emp - r.bound_rhs) / r.gvar_se for r in records]
    return all(r.gvar_emp <= r.bound_rhs + 3 * r.gvar_se for r in records), max(z)


QUADRATIC_RUN = ExperimentConfig(d=20, sigma=0.3, lam=8.0, N=100, M=10, T=500, R=1000, eval_every=10)


@pytest.mark.parametrize("label, overrides", [
    ("entropy form, softplus cholesky", {}),
    ("entropy form, softplus mean-field", {"family": "mean-field"}),
    ("KL form, softplus cholesky", {"form": "kl", "theorem": "kl"}),
])
def test_5_upper_bound_dominance(label, overrides):
    t0 = time.time()
    cfg = QUADRATIC_RUN.with_overrides(**overrides)
    target, _ = experiment.build_target(cfg)
    records = experiment.trace_bounds(cfg, experiment.sgd_run(cfg, target), target)
    ok, worst = dominance(records)
    report(5, f"upper bound dominance, {label}", ok,
           f"{len(records)} iterates, max (gvar - rhs)/se = {worst:.1f}", t0)


def test_5_bounded_entropy_and_simultaneous_bounds():
    t0 = time.time()
    cfg = QUADRATIC_RUN.with_overrides(conditioner="clipped-softplus", S=2.0, theorem="bounded_entropy")
    target, _ = experiment.build_target(cfg)
    records = experiment.trace_bounds(cfg, experiment.sgd_run(cfg, target), target)
    ok_bounded, worst_bounded = dominance(records)
    consts = target_constants(target, GAUSSIAN, experiment.make_conditioner(cfg))
    entropy_bound = bounds.abc_entropy_form(consts, 20, 10, "cholesky", GAUSSIAN,
                                            experiment.make_conditioner(cfg))
    rhs_entropy = np.array([bounds.evaluate_abc(entropy_bound, r.F_gap, r.grad_F_sqnorm)
                            for r in records])
    gvar = np.array([r.gvar_emp for r in records])
    se = np.array([r.gvar_se for r in records])
    ok_entropy = bool(np.all(gvar <= rhs_entropy + 3 * se))
    ratio = rhs_entropy / np.array([r.bound_rhs for r in records])
    report(5, "bounded-entropy bound (S=2) and entropy-form bound on the same trajectory",
           ok_bounded and ok_entropy,
           f"bounded max z = {worst_bounded:.1f}, entropy-form holds = {ok_entropy}, "
           f"rhs ratio entropy/bounded in [{ratio.min():.3g}, {ratio.max():.3g}]", t0)


def test_6_lower_bound():
    t0 = time.time()
    target = verify.reference_quadratic_target(d=20)
    c = target_constants(target)
    points = verify.lower_bound_points(target, n_points=20, seed=6)
    z = [(e - r) / se for e, r, se in points]
    ok = all(e >= r - 3 * se for e, r, se in points)
    report(6, "lower bound near the optimum (square-root, L = mu)", ok,
           f"L/mu = {c.L_H / c.mu_H:.3g}, 20 points, min (gvar - rhs)/se = {min(z):.2f}", t0)


def test_7_parameterization_ordering():
    t0 = time.time()
    cfg = ExperimentConfig(target="linreg", N=200, d=10, T=500, R=1000, eval_every=10)
    rows = experiment.cmd_compare_parameterizations(cfg)
    ordered = [r["gvar_square_root"] >= r["gvar_cholesky_linear"] >= r["gvar_cholesky_softplus"]
               for r in rows]
    report(7, "square-root >= linear cholesky >= softplus cholesky", all(ordered),
           f"{sum(ordered)}/{len(ordered)} logged iterates ordered", t0)


def test_8_F_star_split_invariance():
    t0 = time.time()
    worst = verify.split_invariance_error(shifts=100, seed=8)
    report(8, "bound RHS invariant to the F* split", worst <= 1e-10,
           f"worst relative change {worst:.1e} over 100 shifts (tol 1e-10)", t0)


def test_9_identity_design_constants(tmp_path):
    t0 = time.time()
    path = tmp_path / "identity.csv"
    experiment.write_dataset_csv(np.eye(5), np.zeros(5), str(path))
    cfg = ExperimentConfig(target="linreg", dataset_path=str(path), standardize=False,
                           sigma=1.0, lam=1.0)
    row = experiment.cmd_constants(cfg)
    ok = (row["L_H"], row["mu_KL"]) == (2.0, 1.0)
    report(9, "constants on the identity design", ok,
           f"(L_H, mu_KL) = ({row['L_H']!r}, {row['mu_KL']!r}), kappa_cond = {row['kappa_cond']!r}", t0)
