"""Expected-smoothness (ABC) constants and the matching lower bound.

Every upper bound has the shape

    E|g_M|^2 <= 2 A (F - F*) + B |grad F|^2 + C

with ``B = 1``. The dimension factor ``C(d, kappa)`` depends only on the
scale parameterization.
"""

from dataclasses import dataclass

import numpy as np

from .basedist import GAUSSIAN
from .reparam import FAMILIES

GAP_CLAMP = 1e-9


class BoundNotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class ABCBound:
    A: float
    B: float
    C: float
    provenance: str = ""

    def terms(self, gap, grad_sqnorm):
        """``(A-term, B-term, C)`` at a state with the given gap and gradient norm."""
        if gap < -GAP_CLAMP:
            raise ValueError(f"objective gap {gap:.3e} is below F*")
        gap = max(gap, 0.0)
        return 2.0 * self.A * gap, self.B * grad_sqnorm, self.C


def c_dim(d, kappa, family, conditioner=None):
    if d < 1 or kappa < 1:
        raise ValueError("need d >= 1 and kappa >= 1")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if family != "square-root" and conditioner is not None and not conditioner.lipschitz:
        raise BoundNotApplicable("bound not applicable: conditioner not 1-Lipschitz")
    if family == "mean-field":
        return 2.0 * kappa * np.sqrt(d) + 1.0
    return float(d + kappa)


def _require(c, *names):
    missing = [n for n in names if getattr(c, n) is None]
    if missing:
        raise ValueError(f"missing constants: {', '.join(missing)}")


def _check_M(M):
    if M < 1:
        raise ValueError("M must be at least 1")


def abc_entropy_form(c, d, M, family, dist=GAUSSIAN, conditioner=None):
    """Constants for the entropy-regularized objective (smooth ``f_H``, growing ``f_KL``)."""
    _check_M(M)
    _require(c, "L_H", "mu_KL", "zeta_H", "zeta_KL", "F_star", "f_KL_star")
    cd = c_dim(d, dist.kurtosis(), family, conditioner)
    A = 2.0 * c.L_H**2 * cd / (c.mu_KL * M)
    C = 2.0 * c.L_H**2 * cd / M * c.statdist_sq + 2.0 * A * (c.F_star - c.f_KL_star)
    return ABCBound(A, 1.0, C, f"entropy form, {family}, C(d,kappa)={cd:g}")


def entropy_form_A(L_H, mu_KL, d, M, family, dist=GAUSSIAN):
    """Only the ``A`` constant of the entropy form, from published curvature constants."""
    _check_M(M)
    return 2.0 * L_H**2 * c_dim(d, dist.kurtosis(), family) / (mu_KL * M)


def abc_kl_form(c, d, M, family, dist=GAUSSIAN, conditioner=None):
    _check_M(M)
    _require(c, "L_KL", "mu_KL", "F_star", "f_KL_star")
    cd = c_dim(d, dist.kurtosis(), family, conditioner)
    A = c.L_KL**2 * cd / (c.mu_KL * M)
    return ABCBound(A, 1.0, 2.0 * A * (c.F_star - c.f_KL_star), f"KL form, {family}, C(d,kappa)={cd:g}")


def abc_bounded_entropy(c, d, M, family, dist=GAUSSIAN, conditioner=None, h_star=None):
    """Constants for the entropy form when ``-H(q)`` is bounded below by ``h_star``."""
    _check_M(M)
    if family == "square-root":
        raise BoundNotApplicable("bounded entropy needs a conditioned diagonal")
    if conditioner is not None and conditioner.kind != "clipped-softplus":
        raise BoundNotApplicable("bounded entropy needs the clipped-softplus conditioner")
    h_star = c.h_star if h_star is None else h_star
    if h_star is None:
        raise ValueError("missing constants: h_star")
    _require(c, "L_H", "mu_H", "F_star", "f_H_star")
    cd = c_dim(d, dist.kurtosis(), family, conditioner)
    A = c.L_H**2 * cd / (c.mu_H * M)
    return ABCBound(A, 1.0, 2.0 * A * (c.F_star - c.f_H_star - h_star),
                    f"bounded entropy, {family}, C(d,kappa)={cd:g}")


def evaluate_abc(b, gap, grad_sqnorm):
    return sum(b.terms(gap, grad_sqnorm))


def lower_bound_coefficient(L, mu, d, M):
    if L / mu > np.sqrt(d + 1):
        raise BoundNotApplicable(f"lower bound not applicable: L/mu = {L / mu:.4g} > sqrt(d+1)")
    return (2.0 * mu**2 * (d + 1) - 2.0 * L**2) / (M * L)


def lower_bound_rhs(L, mu, d, M, gap, grad_sqnorm, baseline, family="square-root"):
    """Right-hand side of the lower bound near the optimum.

    ``baseline`` is ``E f(t_{lambda*}(u)) - f*``.
    """
    if family != "square-root":
        raise BoundNotApplicable("lower bound not applicable: needs the square-root family")
    coef = lower_bound_coefficient(L, mu, d, M)
    return coef * (max(gap, 0.0) + baseline) + grad_sqnorm
