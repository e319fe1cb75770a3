"""Location-scale reparameterization ``t(u) = C u + m`` and its chain rule.

Three scale parameterizations are supported:

* ``mean-field``: ``C = diag(phi(s))``, parameters ``(m, s)``
* ``cholesky``: ``C = diag(phi(s)) + L`` with ``L`` strictly lower triangular,
  parameters ``(m, s, L)`` with ``L`` packed row-major
* ``square-root``: ``C`` an unconstrained dense matrix, parameters ``(m, C)``
  with ``C`` flattened row-major

Flat parameter vectors and gradients always use that block order.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import linalg
from .basedist import GAUSSIAN

FAMILIES = ("mean-field", "cholesky", "square-root")
CONDITIONERS = ("identity", "softplus", "exp", "clipped-softplus")


def softplus(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class Conditioner:
    """Scalar map applied to the diagonal pre-parameters of the scale.

    ``clipped-softplus`` is ``S * tanh(softplus(x) / S)``: smooth, strictly
    below ``S``, and 1-Lipschitz since its derivative is
    ``sech^2(softplus(x)/S) * sigmoid(x) <= 1``.
    """

    kind: str = "softplus"
    S: float = None

    def __post_init__(self):
        if self.kind not in CONDITIONERS:
            raise ValueError(f"unknown conditioner {self.kind!r}")
        if self.kind == "clipped-softplus" and not (self.S is not None and self.S > 0):
            raise ValueError("clipped-softplus needs a positive scale cap S")

    @property
    def lipschitz(self):
        return self.kind != "exp"

    def __call__(self, x):
        """Return ``(phi(x), phi'(x))`` elementwise."""
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x.copy(), np.ones_like(x)
        if self.kind == "exp":
            e = np.exp(x)
            return e, e
        sp = softplus(x)
        if self.kind == "softplus":
            return sp, expit(x)
        a = sp / self.S
        e = np.exp(-2.0 * a)
        # sech^2(a) written so it stays positive long after 1 - tanh^2 rounds to zero
        sech2 = 4.0 * e / (1.0 + e) ** 2
        return self.S * np.tanh(a), sech2 * expit(x)

    def value(self, x):
        return self(x)[0]

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            return y.copy()
        if np.any(y <= 0):
            raise ValueError("unrepresentable scale: conditioner output must be positive")
        if self.kind == "exp":
            return np.log(y)
        if self.kind == "clipped-softplus":
            if np.any(y >= self.S):
                raise ValueError(
                    f"unrepresentable scale: clipped conditioner output must be < S={self.S}"
                )
            y = self.S * np.arctanh(y / self.S)
        return inverse_softplus(y)


def inverse_softplus(y, tol=1e-14, max_iter=400):
    """Solve ``softplus(x) = y`` by bisection on ``[log y, y]``.

    Avoids ``log(expm1(y))``, which overflows for large ``y``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo = np.log(y)
    hi = y.copy()
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        above = softplus(mid) > y
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def parameter_count(family, d):
    if family == "mean-field":
        return 2 * d
    if family == "cholesky":
        return d + d * (d + 1) // 2
    if family == "square-root":
        return d + d * d
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True, eq=False)
class VariationalParams:
    family: str
    m: np.ndarray
    s: np.ndarray = None
    L: np.ndarray = None
    C_full: np.ndarray = None
    conditioner: Conditioner = field(default_factory=Conditioner)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        m = np.asarray(self.m, dtype=float)
        object.__setattr__(self, "m", m)
        d = m.shape[0]
        if self.family == "square-root":
            C = np.asarray(self.C_full, dtype=float)
            if C.shape != (d, d):
                raise ValueError(f"C_full must be {d}x{d}")
            object.__setattr__(self, "C_full", C)
        else:
            s = np.asarray(self.s, dtype=float)
            if s.shape != (d,):
                raise ValueError(f"s must have length {d}")
            object.__setattr__(self, "s", s)
            if self.family == "cholesky":
                L = np.zeros(d * (d - 1) // 2) if self.L is None else self.L
                L = np.asarray(L, dtype=float)
                if L.shape != (d * (d - 1) // 2,):
                    raise ValueError(f"L must have length {d * (d - 1) // 2}")
                object.__setattr__(self, "L", L)
        if not np.all(np.isfinite(self.flat())):
            raise ValueError("variational parameters must be finite")

    @property
    def d(self):
        return self.m.shape[0]

    @property
    def p(self):
        return parameter_count(self.family, self.d)

    def flat(self):
        if self.family == "mean-field":
            return np.concatenate([self.m, self.s])
        if self.family == "cholesky":
            return np.concatenate([self.m, self.s, self.L])
        return np.concatenate([self.m, self.C_full.ravel()])

    def with_flat(self, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.p,):
            raise ValueError(f"flat vector must have length {self.p}")
        d = self.d
        if self.family == "square-root":
            return replace(self, m=vec[:d], C_full=vec[d:].reshape(d, d))
        if self.family == "mean-field":
            return replace(self, m=vec[:d], s=vec[d:])
        return replace(self, m=vec[:d], s=vec[d:2 * d], L=vec[2 * d:])

    def scale(self):
        return build_scale(self)

    def __repr__(self):
        return f"VariationalParams({self.family}, d={self.d}, {self.conditioner.kind})"


def mean_field(m, s, conditioner=None):
    return VariationalParams("mean-field", m, s=s, conditioner=conditioner or Conditioner())


def cholesky(m, s, L=None, conditioner=None):
    return VariationalParams("cholesky", m, s=s, L=L, conditioner=conditioner or Conditioner())


def square_root(m, C):
    return VariationalParams("square-root", m, C_full=C, conditioner=Conditioner("identity"))


def build_scale(params):
    d = params.d
    if params.family == "square-root":
        return params.C_full.copy()
    C = np.diag(params.conditioner.value(params.s))
    if params.family == "cholesky" and d > 1:
        C[np.tril_indices(d, -1)] = params.L
    return C


def transform(params, u):
    """``C u + m``; ``u`` may be a single vector or a batch of row vectors."""
    u = np.asarray(u, dtype=float)
    return u @ build_scale(params).T + params.m


def scale_pullback(params, G):
    """Chain a gradient w.r.t. the scale matrix (``...x d x d``) back to the scale parameters."""
    G = np.asarray(G, dtype=float)
    d = params.d
    if params.family == "square-root":
        return G.reshape(G.shape[:-2] + (d * d,))
    diag = np.diagonal(G, axis1=-2, axis2=-1) * params.conditioner(params.s)[1]
    if params.family == "mean-field":
        return diag
    rows, cols = np.tril_indices(d, -1)
    return np.concatenate([diag, G[..., rows, cols]], axis=-1)


def pullback(params, u, g_f):
    """Gradient of ``lambda -> f(t_lambda(u))`` given ``g_f = grad f(t_lambda(u))``.

    Works on single vectors or on batches (rows).
    """
    u = np.asarray(u, dtype=float)
    g_f = np.asarray(g_f, dtype=float)
    d = params.d
    if params.family == "square-root":
        outer = g_f[..., :, None] * u[..., None, :]
        return np.concatenate([g_f, outer.reshape(g_f.shape[:-1] + (d * d,))], axis=-1)
    dphi = params.conditioner(params.s)[1]
    blocks = [g_f, g_f * u * dphi]
    if params.family == "cholesky":
        rows, cols = np.tril_indices(d, -1)
        blocks.append(g_f[..., rows] * u[..., cols])
    return np.concatenate(blocks, axis=-1)


def _cumulative_sq(u):
    # Sigma_ii = sum_{j <= i} u_j^2
    return np.cumsum(u * u, axis=-1)


def pullback_sqnorm_identity(params, u, g_f):
    """Squared norm of :func:`pullback` computed from the diagonal-matrix identity."""
    u = np.asarray(u, dtype=float)
    g_f = np.asarray(g_f, dtype=float)
    g2 = g_f * g_f
    base = np.sum(g2, axis=-1)
    if params.family == "square-root":
        return base * (1.0 + np.sum(u * u, axis=-1))
    U = u * u
    Phi = params.conditioner(params.s)[1] ** 2
    if params.family == "mean-field":
        return base + np.sum(g2 * U * Phi, axis=-1)
    return base + np.sum(g2 * _cumulative_sq(u), axis=-1) + np.sum(g2 * U * (Phi - 1.0), axis=-1)


def entropy(params, dist=GAUSSIAN):
    """Differential entropy ``d * H(phi) + log|det C|`` of ``q_lambda``."""
    return params.d * dist.entropy_per_dim() + linalg.logabsdet(build_scale(params))


def entropy_gradient(params):
    """Gradient of :func:`entropy` with respect to the flat parameters."""
    d = params.d
    out = np.zeros(params.p)
    if params.family == "square-root":
        linalg.logabsdet(params.C_full)  # raises when singular
        out[d:] = np.linalg.inv(params.C_full).T.ravel()
        return out
    phi, dphi = params.conditioner(params.s)
    if np.any(phi == 0):
        raise linalg.SingularMatrixError("conditioned diagonal has a zero entry")
    out[d:2 * d] = dphi / phi
    return out


def match_parameterizations(m, C, conditioner=None):
    """Parameters of every family that realize the same ``(m, C)``.

    ``C`` must be lower triangular with a diagonal inside the conditioner's
    range. The mean-field entry keeps only ``diag(C)``.
    """
    conditioner = conditioner or Conditioner()
    C = np.asarray(C, dtype=float)
    d = C.shape[0]
    if np.any(np.triu(C, 1)):
        raise ValueError("C must be lower triangular")
    s = conditioner.inverse(np.diag(C))
    return {
        "mean-field": mean_field(m, s, conditioner),
        "cholesky": cholesky(m, s, C[np.tril_indices(d, -1)], conditioner),
        "square-root": square_root(m, np.tril(C)),
    }
