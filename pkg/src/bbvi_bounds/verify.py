"""Property checks across all modules, run by the ``verify`` subcommand.

Each check returns ``(passed, detail)``; the registry records the tolerance
it uses so the report is self-describing.
"""

import json
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from . import bounds, linalg, reparam
from .basedist import GAUSSIAN, RngStream, student_t
from .estimator import empirical_sqnorm, expected_path_sqnorm, grad_sample
from .reparam import Conditioner
from .targets import (Bijector, exact_elbo, kl_gradient, kl_to_prior, linreg_target,
                      optimal_params, quadratic_target, target_constants)

CONDITIONER_GRID = (
    Conditioner("identity"),
    Conditioner("softplus"),
    Conditioner("exp"),
    Conditioner("clipped-softplus", 2.0),
)
FERTILITY = dict(L_H=1.840e3, mu_KL=5.017e2, d=9, M=10, A=1.620e4)


@dataclass
class Check:
    name: str
    tolerance: str
    fn: object


REGISTRY = []


def check(name, tolerance):
    def register(fn):
        REGISTRY.append(Check(name, tolerance, fn))
        return fn
    return register


def random_params(rng, family, d, conditioner=None, scale=1.0):
    m = rng.normal(size=d)
    if family == "square-root":
        return reparam.square_root(m, scale * rng.normal(size=(d, d)))
    conditioner = conditioner or Conditioner("softplus")
    s = rng.normal(size=d)
    if conditioner.kind == "identity":
        s = np.abs(s) + 0.1
    if family == "mean-field":
        return reparam.mean_field(m, s, conditioner)
    return reparam.cholesky(m, s, scale * rng.normal(size=d * (d - 1) // 2), conditioner)


def family_grid():
    for family in ("mean-field", "cholesky"):
        for cond in CONDITIONER_GRID:
            yield family, cond
    yield "square-root", Conditioner("identity")


def reference_quadratic_target(seed=0, d=20):
    zstar = GAUSSIAN.sample((d,), RngStream(seed, (0,)))
    return quadratic_target(100, 0.3, 8.0, zstar)


@check("linalg.cholesky_reconstruct", "rel Frobenius <= 1e-10")
def _cholesky(trials=50):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(trials):
        n = rng.integers(1, 15)
        B = rng.normal(size=(n, n))
        A = B @ B.T + np.eye(n)
        L = linalg.cholesky_spd(A)
        worst = max(worst, np.linalg.norm(L @ L.T - A) / np.linalg.norm(A))
    return worst <= 1e-10, f"worst residual {worst:.2e}"


@check("linalg.eig_extremes", "rel <= 1e-8")
def _eig(trials=50):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(trials):
        n = rng.integers(1, 12)
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        lam = rng.uniform(-5, 5, size=n)
        lo, hi = linalg.sym_eig_extremes((Q * lam) @ Q.T)
        scale = np.max(np.abs(lam))
        worst = max(worst, abs(lo - lam.min()) / scale, abs(hi - lam.max()) / scale)
    return worst <= 1e-8, f"worst error {worst:.2e}"


@check("linalg.logabsdet_triangular_vs_dense", "abs <= 1e-12")
def _logdet(trials=50):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(trials):
        n = rng.integers(1, 10)
        T = np.tril(rng.normal(size=(n, n))) + 2 * np.eye(n) * np.sign(rng.normal(size=n))
        P = np.eye(n)[rng.permutation(n)]
        # permuting rows makes the matrix non-triangular without changing |det|
        worst = max(worst, abs(linalg.logabsdet(T) - linalg.logabsdet(P @ T)))
    return worst <= 1e-12, f"worst difference {worst:.2e}"


@check("basedist.moments", "mean/third/fourth within 4/4/3 SE, var within 1%, 1e7 samples")
def _moments(n=10**7):
    failures = []
    for i, dist in enumerate((GAUSSIAN, student_t(8.0))):
        u = dist.sample((n,), RngStream(11, (i,)))
        for k, target, z in ((1, 0.0, 4), (3, 0.0, 4), (4, dist.kurtosis(), 3)):
            x = u**k
            se = x.std(ddof=1) / np.sqrt(n)
            if abs(x.mean() - target) > z * se:
                failures.append(f"{dist.kind} moment {k}: {x.mean():.4f} vs {target}")
        if abs(u.var() - 1) > 0.01:
            failures.append(f"{dist.kind} variance {u.var():.4f}")
    return not failures, "; ".join(failures) or "all moments consistent"


@check("reparam.norm_identity", "|identity - |pullback|^2| <= 1e-10 (1 + |pullback|^2)")
def _identity(trials=1000):
    rng = np.random.default_rng(4)
    fails = 0
    total = 0
    for family, cond in family_grid():
        for _ in range(trials):
            d = int(rng.integers(1, 21))
            p = random_params(rng, family, d, cond)
            u = rng.normal(size=d)
            g = rng.normal(size=d)
            direct = np.sum(reparam.pullback(p, u, g) ** 2)
            ident = reparam.pullback_sqnorm_identity(p, u, g)
            fails += abs(ident - direct) > 1e-10 * (1 + direct)
            total += 1
    return fails == 0, f"{fails} failures in {total} trials"


@check("reparam.parameterization_ordering", "pointwise, slack 1e-12")
def _ordering(trials=500):
    rng = np.random.default_rng(5)
    fails = 0
    for _ in range(trials):
        d = int(rng.integers(1, 15))
        C = np.tril(rng.normal(size=(d, d)), -1) + np.diag(rng.uniform(0.1, 1.9, size=d))
        m = rng.normal(size=d)
        u, g = rng.normal(size=d), rng.normal(size=d)
        clipped = reparam.match_parameterizations(m, C, Conditioner("clipped-softplus", 2.0))
        soft = reparam.match_parameterizations(m, C, Conditioner("softplus"))
        lin = reparam.match_parameterizations(m, C, Conditioner("identity"))
        seq = [np.sum(reparam.pullback(p, u, g) ** 2) for p in (
            clipped["cholesky"], soft["cholesky"], lin["cholesky"], soft["square-root"])]
        fails += any(a > b + 1e-12 * (1 + b) for a, b in zip(seq, seq[1:]))
        sq = seq[-1]
        fails += abs(sq - np.sum(g * g) * (1 + u @ u)) > 1e-12 * (1 + sq)
    return fails == 0, f"{fails} violations"


@check("reparam.meanfield_norm_bound", "slack 1e-12")
def _mf_bound(trials=500):
    rng = np.random.default_rng(6)
    fails = 0
    for _ in range(trials):
        d = int(rng.integers(1, 20))
        for cond in (Conditioner("identity"), Conditioner("softplus"),
                     Conditioner("clipped-softplus", 2.0)):
            p = random_params(rng, "mean-field", d, cond)
            u, g = rng.normal(size=d), rng.normal(size=d)
            lhs = np.sum(reparam.pullback(p, u, g) ** 2)
            rhs = (1 + np.linalg.norm(u * u)) * (g @ g)
            fails += lhs > rhs + 1e-12 * (1 + rhs)
    return fails == 0, f"{fails} violations"


def _mc_check(samples, expected, z=3.0):
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(n)
    dev = np.abs(mean - expected)
    # an exactly constant sample has zero spread; allow rounding only
    ok = dev <= z * se + 1e-12 * (1 + np.abs(expected))
    return bool(np.all(ok)), float(np.max(dev / np.maximum(se, 1e-300)))


def expectation_identity_checks(dist, n=10**6, d=4, seed=7):
    """All expectation identities for ``t(u) = C u + m``; returns ``{name: (ok, worst z)}``."""
    rng = np.random.default_rng(seed)
    u = dist.sample((n, d), RngStream(seed, (d,)))
    kappa = dist.kurtosis()
    C = rng.normal(size=(d, d))
    m, z = rng.normal(size=d), rng.normal(size=d)
    p = reparam.square_root(m, C)
    dev = reparam.transform(p, u) - z
    dev2 = np.sum(dev * dev, axis=1)
    u2 = np.sum(u * u, axis=1)
    mz = float((m - z) @ (m - z))
    cf = linalg.frobenius_norm_sq(C)
    outer = u[:, :, None] * u[:, None, :]
    out = {
        "E uu^T = I": _mc_check(outer.reshape(n, -1), np.eye(d).ravel()),
        "E |u|^2 = d": _mc_check(u2, d),
        "E u(1+|u|^2) = 0": _mc_check(u * (1 + u2)[:, None], np.zeros(d)),
        "E uu^T uu^T = (d-1+kappa) I": _mc_check(
            (outer * u2[:, None, None]).reshape(n, -1), ((d - 1 + kappa) * np.eye(d)).ravel()),
        "E|t(u)-z|^2": _mc_check(dev2, mz + cf),
        "E|t(u)-z|^2 (1+|u|^2)": _mc_check(dev2 * (1 + u2), (d + 1) * mz + (d + kappa) * cf),
    }
    s = rng.normal(size=d)
    mf = reparam.mean_field(m, s, Conditioner("softplus"))
    dev_mf = reparam.transform(mf, u) - z
    lhs = np.sum(dev_mf * dev_mf, axis=1) * (1 + np.linalg.norm(u * u, axis=1))
    cmf = linalg.frobenius_norm_sq(reparam.build_scale(mf))
    rhs = (np.sqrt(d * kappa) + kappa * np.sqrt(d) + 1) * mz + (2 * kappa * np.sqrt(d) + 1) * cmf
    se = lhs.std(ddof=1) / np.sqrt(n)
    out["mean-field inequality"] = (bool(lhs.mean() <= rhs + 3 * se), float((lhs.mean() - rhs) / se))
    return out


@check("reparam.expectation_identities", "within 3 MC standard errors, 1e6 samples")
def _expectations(n=10**6):
    bad = []
    for dist in (GAUSSIAN, student_t(8.0)):
        for name, (ok, worst) in expectation_identity_checks(dist, n).items():
            if not ok:
                bad.append(f"{dist.kind}: {name} (z={worst:.2f})")
    return not bad, "; ".join(bad) or "all identities hold"


def central_difference(fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        g[i] = (fn(x + e) - fn(x - e)) / (2 * e[i])
    return g


def fd_rel_error(analytic, numeric):
    return float(np.linalg.norm(analytic - numeric) / max(1.0, np.linalg.norm(numeric)))


def gradient_fd_errors(points=200, d=5, seed=8):
    """Worst central-difference relative error per gradient routine over ``points`` random points."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, d))
    targets_ = (linreg_target(X, rng.normal(size=20), 0.7, 2.0),
                quadratic_target(3, 0.9, 2.0, rng.normal(size=d)))
    grid = list(family_grid())
    worst = dict(pullback=0.0, entropy_gradient=0.0, kl_gradient=0.0, target=0.0)
    for i in range(points):
        family, cond = grid[i % len(grid)]
        p = random_params(rng, family, d, cond, scale=0.5)
        if family == "square-root":
            p = reparam.square_root(p.m, p.C_full + 3 * np.eye(d))
        lam = p.flat()
        u, g = rng.normal(size=d), rng.normal(size=d)
        # pullback of a linear test function zeta -> g . zeta
        num = central_difference(lambda x: g @ reparam.transform(p.with_flat(x), u), lam)
        worst["pullback"] = max(worst["pullback"], fd_rel_error(reparam.pullback(p, u, g), num))
        num = central_difference(lambda x: reparam.entropy(p.with_flat(x), GAUSSIAN), lam)
        worst["entropy_gradient"] = max(worst["entropy_gradient"],
                                        fd_rel_error(reparam.entropy_gradient(p), num))
        v = rng.uniform(0.5, 3.0)
        num = central_difference(lambda x: kl_to_prior(p.with_flat(x), v), lam)
        worst["kl_gradient"] = max(worst["kl_gradient"], fd_rel_error(kl_gradient(p, v), num))
        t = targets_[i % 2]
        form = ("entropy", "kl")[(i // 2) % 2]
        z = rng.normal(size=d)
        num = central_difference(lambda x: t.value(form, x), z)
        worst["target"] = max(worst["target"], fd_rel_error(t.grad(form, z), num))
    return worst


@check("gradients.finite_differences", "rel <= 1e-5, 200 points per routine")
def _gradients():
    worst = gradient_fd_errors()
    return max(worst.values()) <= 1e-5, ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


@check("targets.forms_agree", "within 3 MC standard errors, shared draws")
def _forms_agree(n=10**5):
    rng = np.random.default_rng(16)
    X = rng.normal(size=(25, 4))
    bad = []
    for t in (reference_quadratic_target(d=4), linreg_target(X, rng.normal(size=25), 0.8, 1.5)):
        for family, cond in (("mean-field", Conditioner("softplus")),
                             ("cholesky", Conditioner("softplus")),
                             ("square-root", Conditioner("identity"))):
            p = random_params(rng, family, 4, cond, scale=0.3)
            u = GAUSSIAN.sample((n, 4), RngStream(16, (len(bad),)))
            zeta = reparam.transform(p, u)
            diff = (t.value("entropy", zeta) - reparam.entropy(p)) - (
                t.value("kl", zeta) + kl_to_prior(p, t.prior_var))
            ok, z = _mc_check(diff, 0.0)
            if not ok:
                bad.append(f"{t.kind}/{family} z={z:.2f}")
    return not bad, "; ".join(bad) or "forms agree"


@check("targets.exp_bijector", "round trip abs <= 1e-12, log|J| gradient rel <= 1e-5")
def _bijector():
    b = Bijector("exp")
    grid = np.linspace(-5, 5, 101)
    rt = float(np.max(np.abs(b.forward(b.pull(grid[:, None])[0]) - grid[:, None])))
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(20):
        zeta = rng.normal(size=3)
        num = central_difference(lambda x: b.pull(x)[1], zeta)
        worst = max(worst, fd_rel_error(b.pull(zeta)[2], num))
    return rt <= 1e-12 and worst <= 1e-5, f"round trip {rt:.1e}, gradient {worst:.1e}"


@check("targets.certificates", "growth slack 1e-9, smoothness factor 1+1e-9")
def _certificates(trials=1000):
    rng = np.random.default_rng(9)
    X = rng.normal(size=(30, 4))
    fails = 0
    for t in (reference_quadratic_target(d=4), linreg_target(X, rng.normal(size=30), 0.5, 3.0)):
        c = target_constants(t)
        for form, L, mu, zbar, fstar in (("kl", c.L_KL, c.mu_KL, c.zeta_KL, c.f_KL_star),
                                         ("entropy", c.L_H, c.mu_H, c.zeta_H, c.f_H_star)):
            fails += np.linalg.norm(t.grad(form, zbar)) > 1e-8 * max(1.0, L)
            for _ in range(trials // 4):
                z1, z2 = zbar + rng.normal(size=t.d), zbar + rng.normal(size=t.d)
                gap = t.value(form, z1) - fstar
                fails += gap < 0.5 * mu * np.sum((z1 - zbar) ** 2) - 1e-9 * max(1.0, abs(fstar))
                lhs = np.linalg.norm(t.grad(form, z1) - t.grad(form, z2))
                fails += lhs > L * np.linalg.norm(z1 - z2) * (1 + 1e-9)
    return fails == 0, f"{fails} violations"


@check("targets.F_star_attained", "abs <= 1e-8 (relative to |F*|)")
def _fstar():
    t = reference_quadratic_target()
    c = target_constants(t)
    worst = 0.0
    for family in ("cholesky", "mean-field", "square-root"):
        F, g = exact_elbo(t, optimal_params(t, family), GAUSSIAN)
        worst = max(worst, abs(F - c.F_star) / max(1.0, abs(c.F_star)))
    return worst <= 1e-8, f"worst gap {worst:.2e}"


def unbiasedness_zscores(t, n=10**7, d=None, seed=18, chunk=10**5):
    """Largest |z| of the per-coordinate mean of ``grad_sample`` against the exact gradient."""
    rng = np.random.default_rng(seed)
    out = {}
    for family, cond in (("mean-field", Conditioner("softplus")),
                         ("cholesky", Conditioner("softplus")),
                         ("square-root", Conditioner("identity"))):
        p = random_params(rng, family, t.d, cond, scale=0.3)
        for form in ("entropy", "kl"):
            _, exact = exact_elbo(t, p, GAUSSIAN, form)
            total = np.zeros(p.p)
            total_sq = np.zeros(p.p)
            root = RngStream(seed, (len(out),))
            for k in range(n // chunk):
                g = grad_sample(t, form, p, GAUSSIAN, GAUSSIAN.sample((chunk, t.d), root.child(k)))
                total += g.sum(axis=0)
                total_sq += (g * g).sum(axis=0)
            mean = total / n
            se = np.sqrt(np.maximum(total_sq / n - mean**2, 0.0) * n / (n - 1) / n)
            dev = np.abs(mean - exact)
            z = np.where(se > 0, dev / np.maximum(se, 1e-300), np.where(dev > 1e-12, np.inf, 0.0))
            out[(family, form)] = (float(np.max(z)), p.p)
    return out


def familywise_z(p, level=3.0):
    """Per-coordinate threshold giving the two-sided ``level``-sigma error rate across ``p`` coordinates."""
    return float(norm.isf(norm.sf(level) / p))


@check("estimator.unbiasedness", "3-sigma family-wise over coordinates, 1e7 draws")
def _unbiased():
    rng = np.random.default_rng(19)
    X = rng.normal(size=(30, 3))
    bad = []
    for t in (reference_quadratic_target(d=3), linreg_target(X, rng.normal(size=30), 0.9, 2.0)):
        for key, (z, p) in unbiasedness_zscores(t).items():
            if z > familywise_z(p):
                bad.append(f"{t.kind}/{key}: z={z:.2f}")
    return not bad, "; ".join(bad) or "unbiased"


@check("estimator.variance_split", "<= E|grad f|^2 / M + |grad F|^2 + 3 SE, 50 points")
def _lemma34(points=50, R=400):
    rng = np.random.default_rng(10)
    t = reference_quadratic_target(d=5)
    fails = 0
    for i in range(points):
        family, cond = list(family_grid())[i % 9]
        if cond.kind == "exp":
            cond = Conditioner("softplus")
        p = random_params(rng, family, 5, cond, scale=0.3)
        if family == "square-root":
            p = reparam.square_root(p.m, p.C_full + np.eye(5))
        for form in ("entropy", "kl"):
            est = empirical_sqnorm(t, form, p, 10, R, seed=i, stream=(form == "kl",))
            _, gF = exact_elbo(t, p, GAUSSIAN, form)
            rhs = expected_path_sqnorm(t, form, p) / 10 + gF @ gF
            fails += est.second_moment > rhs + 3 * est.std_error
    return fails == 0, f"{fails} violations"


@check("bounds.fertility_A", "rel <= 0.5%")
def _fertility():
    A = bounds.entropy_form_A(FERTILITY["L_H"], FERTILITY["mu_KL"], FERTILITY["d"],
                              FERTILITY["M"], "cholesky")
    rel = abs(A - FERTILITY["A"]) / FERTILITY["A"]
    return rel <= 0.005, f"A = {A:.5g} (rel err {rel:.2e})"


def split_invariance_error(shifts=100, seed=12):
    """Worst relative change of the bound RHS when F* is shifted in the bookkeeping."""
    rng = np.random.default_rng(seed)
    t = reference_quadratic_target()
    c = target_constants(t, conditioner=Conditioner("clipped-softplus", 2.0))
    p = random_params(rng, "cholesky", t.d, Conditioner("clipped-softplus", 2.0), scale=0.1)
    F, g = exact_elbo(t, p)
    worst = 0.0
    for make in (bounds.abc_entropy_form, bounds.abc_kl_form, bounds.abc_bounded_entropy):
        kw = dict(conditioner=Conditioner("clipped-softplus", 2.0))
        base = bounds.evaluate_abc(make(c, t.d, 10, "cholesky", **kw), F - c.F_star, g @ g)
        for delta in rng.uniform(-1, 1, size=shifts) * (F - c.F_star):
            c2 = target_constants(t, conditioner=kw["conditioner"])
            c2.F_star = c.F_star + delta
            rhs = bounds.evaluate_abc(make(c2, t.d, 10, "cholesky", **kw), F - c2.F_star, g @ g)
            worst = max(worst, abs(rhs - base) / abs(base))
    return worst


@check("bounds.F_star_split_invariance", "rel <= 1e-10, 100 shifts")
def _split():
    worst = split_invariance_error()
    return worst <= 1e-10, f"worst relative change {worst:.2e}"


@check("bounds.upper_bound_dominance", "E|g|^2 <= RHS + 3 SE at 50 random points")
def _dominance(points=50, R=300):
    rng = np.random.default_rng(13)
    t = reference_quadratic_target()
    c = target_constants(t, conditioner=Conditioner("clipped-softplus", 2.0))
    zbar = c.zeta_H
    fails = 0
    for i in range(points):
        radius = 10.0 ** rng.uniform(-3, 0.5)
        for family, cond in (("mean-field", Conditioner("softplus")),
                             ("cholesky", Conditioner("softplus")),
                             ("square-root", Conditioner("identity"))):
            p = random_params(rng, family, t.d, cond, scale=0.02)
            p = p.with_flat(np.concatenate([zbar + radius * rng.normal(size=t.d),
                                            p.flat()[t.d:]]))
            if family == "square-root":
                p = reparam.square_root(p.m, p.C_full + 0.05 * np.eye(t.d))
            for form, make in (("entropy", bounds.abc_entropy_form), ("kl", bounds.abc_kl_form)):
                F, g = exact_elbo(t, p, GAUSSIAN, form)
                rhs = bounds.evaluate_abc(make(c, t.d, 10, family), F - c.F_star, g @ g)
                est = empirical_sqnorm(t, form, p, 10, R, seed=100 + i)
                fails += est.second_moment > rhs + 3 * est.std_error
    return fails == 0, f"{fails} violations"


def lower_bound_points(t, n_points=20, seed=14, M=10, R=1000):
    """``(empirical, rhs, se)`` at points within ``0.1 |lambda*|`` of the optimum (square-root family)."""
    rng = np.random.default_rng(seed)
    c = target_constants(t)
    star = optimal_params(t, "square-root")
    radius = 0.1 * np.linalg.norm(star.flat())
    C_star = star.C_full
    baseline = 0.5 * float(np.sum((t.f_h.hess @ C_star) * C_star))
    out = []
    for i in range(n_points):
        dm = rng.normal(size=t.d)
        dm *= rng.uniform(0, 0.9) * radius / np.linalg.norm(dm)
        # relative perturbation of the scale keeps C well inside the neighborhood
        dC = rng.normal(size=(t.d, t.d))
        dC *= rng.uniform(0, 0.1) * np.linalg.norm(C_star) / np.linalg.norm(dC)
        p = reparam.square_root(star.m + dm, C_star + dC)
        assert np.linalg.norm(p.flat() - star.flat()) <= radius
        F, g = exact_elbo(t, p)
        est = empirical_sqnorm(t, "entropy", p, M, R, seed=seed, stream=(i,))
        rhs = bounds.lower_bound_rhs(c.L_H, c.mu_H, t.d, M, F - c.F_star, g @ g, baseline)
        out.append((est.second_moment, rhs, est.std_error))
    return out


@check("bounds.lower_bound", "E|g|^2 >= RHS - 3 SE at 20 points near the optimum")
def _lower():
    pts = lower_bound_points(reference_quadratic_target())
    fails = sum(e < r - 3 * se for e, r, se in pts)
    return fails == 0, f"{fails} violations"


@check("estimator.determinism", "bit-identical")
def _determinism():
    t = reference_quadratic_target(d=4)
    p = random_params(np.random.default_rng(15), "cholesky", 4)
    a = empirical_sqnorm(t, "entropy", p, 10, 50, seed=3)
    b = empirical_sqnorm(t, "entropy", p, 10, 50, seed=3)
    return a == b, "identical" if a == b else f"{a} != {b}"


def run_checks(names=None, out=None):
    """Run registered checks; write one JSON line per check; return True if all pass."""
    all_ok = True
    for chk in REGISTRY:
        if names and chk.name not in names:
            continue
        t0 = time.time()
        try:
            ok, detail = chk.fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"error: {exc!r}"
        all_ok &= bool(ok)
        line = json.dumps(dict(check=chk.name, passed=bool(ok), tolerance=chk.tolerance,
                               detail=detail, seconds=round(time.time() - t0, 2)))
        if out is not None:
            print(line, file=out, flush=True)
    return all_ok
