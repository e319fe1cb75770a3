"""Reparameterization gradient estimators and their empirical second moment."""

from dataclasses import dataclass

import numpy as np

from .basedist import GAUSSIAN, RngStream
from .reparam import build_scale, entropy_gradient, pullback, transform
from .targets import check_form, kl_gradient


@dataclass(frozen=True)
class VarianceEstimate:
    second_moment: float
    std_error: float
    replications: int
    M: int


def regularizer_gradient(t, form, params):
    if check_form(form) == "entropy":
        return -entropy_gradient(params)
    return kl_gradient(params, t.prior_var)


def path_gradient(t, form, params, u):
    """``grad_lambda f(t_lambda(u))`` for one base draw or a batch of them."""
    zeta = transform(params, u)
    return pullback(params, u, t.grad(form, zeta))


def grad_sample(t, form, params, dist, u):
    """Single-sample estimator ``grad_lambda f(t_lambda(u)) + grad h(lambda)``."""
    if form == "kl" and dist.kind != "gaussian":
        raise ValueError("the KL-regularized form needs a Gaussian base distribution")
    return path_gradient(t, form, params, u) + regularizer_gradient(t, form, params)


def grad_estimate(t, form, params, M, rng, dist=GAUSSIAN):
    """Mean of ``M`` single-sample estimates drawn from ``rng``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    u = dist.sample((M, params.d), rng)
    return np.mean(grad_sample(t, form, params, dist, u), axis=0)


def replicate_draws(dist, M, d, R, seed, stream=()):
    """Base draws of shape ``(R, M, d)``; replicate ``r`` comes from stream ``(*stream, r)``."""
    root = RngStream(seed, tuple(stream))
    return np.stack([dist.sample((M, d), root.child(r)) for r in range(R)])


def replicate_estimates(t, form, params, u, dist=GAUSSIAN):
    """M-sample gradient estimates for pre-drawn ``u`` of shape ``(R, M, d)``."""
    R, M, d = u.shape
    g = grad_sample(t, form, params, dist, u.reshape(R * M, d))
    return g.reshape(R, M, -1).mean(axis=1)


def summarize_sqnorms(sq, M):
    sq = np.asarray(sq, dtype=float)
    R = sq.shape[0]
    if R < 2:
        raise ValueError("need at least two replications")
    return VarianceEstimate(
        second_moment=float(np.mean(sq)),
        std_error=float(np.std(sq, ddof=1) / np.sqrt(R)),
        replications=R,
        M=M,
    )


def empirical_sqnorm(t, form, params, M, R, seed, dist=GAUSSIAN, stream=()):
    """Estimate ``E |g_M|^2`` from ``R`` independent replicates.

    The result depends only on ``(seed, stream)`` and the arguments, so two
    calls with the same stream share their base draws exactly.
    """
    u = replicate_draws(dist, M, params.d, R, seed, stream)
    g = replicate_estimates(t, form, params, u, dist)
    return summarize_sqnorms(np.sum(g * g, axis=1), M)


def expected_path_sqnorm(t, form, params, dist=GAUSSIAN):
    """Closed form of ``E |grad_lambda f(t_lambda(u))|^2`` for a quadratic ``f``.

    With ``g_f = A u + r`` (``A = H C``, ``r = grad f(m)``) the norm identity
    reads ``g_f^T (I + diag(W u^2)) g_f`` for a family-specific weight matrix
    ``W``; its expectation needs only the second and fourth moments of ``u``.
    """
    if t.bijector.kind != "identity":
        raise ValueError("closed form needs the identity bijector")
    q = t.quadratic(form)
    d = params.d
    C = build_scale(params)
    A = q.hess @ C
    r = q.grad(params.m)
    if params.family == "square-root":
        W = np.ones((d, d))
    else:
        Phi = params.conditioner(params.s)[1] ** 2
        W = np.diag(Phi)
        if params.family == "cholesky":
            W = W + np.tril(np.ones((d, d)), -1)
    kappa = dist.kurtosis()
    row_sq = np.sum(A * A, axis=1)
    weighted = row_sq[:, None] + (kappa - 1.0) * A * A + (r * r)[:, None]
    return float(np.sum(A * A) + r @ r + np.sum(W * weighted))
