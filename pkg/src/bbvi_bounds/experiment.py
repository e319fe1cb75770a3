"""SGD driver, bound traces, dataset ingestion and the table/comparison commands."""

import csv
import io
import warnings
from dataclasses import astuple, dataclass, fields, replace

import numpy as np

from . import bounds
from .basedist import GAUSSIAN, RngStream
from .estimator import empirical_sqnorm, grad_estimate
from .reparam import Conditioner, VariationalParams, build_scale, match_parameterizations
from .targets import exact_elbo, kl_to_prior, linreg_target, quadratic_target, target_constants

TRACE_HEADER = (
    "t,F_gap,grad_F_sqnorm,gvar_emp,gvar_se,bound_rhs,"
    "bound_A_term,bound_B_term,bound_C_const,kl_qp"
)
CONSTANTS_HEADER = "dataset,d,N,L_H,mu_KL,kappa_cond,statdist_sq,A,C"
COMPARE_COLUMNS = ("mean_field", "cholesky_linear", "cholesky_softplus", "square_root")
DIVERGENCE_LIMIT = 1e12

# first element of every stream index, so experiment stages never share draws
STREAM_ZSTAR, STREAM_DATA, STREAM_SGD, STREAM_VARIANCE, STREAM_COMPARE = range(5)


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrajectoryRecord:
    t: int
    F_gap: float
    grad_F_sqnorm: float
    gvar_emp: float
    gvar_se: float
    bound_rhs: float
    bound_A_term: float
    bound_B_term: float
    bound_C_const: float
    kl_qp: float


def fmt(x):
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def make_conditioner(cfg):
    return Conditioner(cfg.conditioner, cfg.S if cfg.conditioner == "clipped-softplus" else None)


def synthetic_regression(N, d, seed, noise=1.0):
    """Gaussian design, standard-normal weights and Gaussian noise."""
    gen = RngStream(seed, (STREAM_DATA,)).generator()
    X = gen.standard_normal((N, d))
    w = gen.standard_normal(d)
    y = X @ w + noise * gen.standard_normal(N)
    return X, y


def _parse_row(row, rownum):
    out = []
    for col, cell in enumerate(row, 1):
        try:
            out.append(float(cell))
        except ValueError:
            raise ValueError(f"row {rownum}, column {col}: non-numeric cell {cell!r}") from None
    return out


def load_csv_dataset(path, standardize=False):
    """Read ``X`` (all but the last column) and ``y`` (last column) from a CSV file.

    A first line with no numeric cells is treated as a header.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    offset = 1
    if rows and not any(_is_number(c) for c in rows[0]):
        rows, offset = rows[1:], 2
    data = [_parse_row(r, i + offset) for i, r in enumerate(rows)]
    if not data:
        raise ValueError(f"{path}: no data rows")
    width = len(data[0])
    for i, r in enumerate(data):
        if len(r) != width:
            raise ValueError(f"row {i + offset}: expected {width} columns, got {len(r)}")
    if width < 2:
        raise ValueError(f"{path}: need at least two columns")
    arr = np.array(data)
    X, y = arr[:, :-1], arr[:, -1]
    if X.shape[0] < X.shape[1]:
        warnings.warn(f"{path}: fewer rows ({X.shape[0]}) than features ({X.shape[1]})")
    if standardize:
        X, y = zscore(X), zscore(y)
    return X, y


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def zscore(a):
    a = np.asarray(a, dtype=float)
    sd = a.std(axis=0)
    if np.any(sd == 0):
        raise ValueError("cannot standardize a constant column")
    return (a - a.mean(axis=0)) / sd


def write_dataset_csv(X, y, out):
    lines = [",".join(fmt(v) for v in (*x, t)) for x, t in zip(X, y)]
    _emit("\n".join(lines) + "\n", out)


def build_target(cfg):
    """The target model and a short dataset label for ``cfg``."""
    if cfg.target == "quadratic":
        zstar = GAUSSIAN.sample((cfg.d,), RngStream(cfg.seed, (STREAM_ZSTAR,)))
        return quadratic_target(cfg.N, cfg.sigma, cfg.lam, zstar), "quadratic"
    if cfg.dataset_path:
        X, y = load_csv_dataset(cfg.dataset_path, cfg.standardize)
        name = cfg.dataset_path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    else:
        X, y = synthetic_regression(cfg.N, cfg.d, cfg.seed)
        name = "synthetic"
    return linreg_target(X, y, cfg.sigma, cfg.lam), name


def initial_params(family, d, conditioner):
    """``m = 0`` and ``C = I``."""
    m = np.zeros(d)
    if family == "square-root":
        return VariationalParams(family, m, C_full=np.eye(d), conditioner=Conditioner("identity"))
    s = conditioner.inverse(np.ones(d))
    return VariationalParams(family, m, s=s, conditioner=conditioner)


def resolve_stepsize(cfg, consts):
    """Configured stepsize, else ``min(1 / (B L_H), 1 / A)`` with the entropy-form ``A``.

    ``1 / (B L_H)`` alone lets the multiplicative noise in the scale blow up
    whenever ``L_H (d + kappa) / M`` is large.
    """
    if cfg.stepsize is not None:
        return cfg.stepsize
    A = bounds.entropy_form_A(consts.L_H, consts.mu_KL, consts.zeta_H.shape[0], cfg.M, cfg.family)
    return min(1.0 / consts.L_H, 1.0 / A)


def sgd_run(cfg, target=None):
    """Fixed-stepsize SGD; returns the ``T + 1`` iterates."""
    if target is None:
        target, _ = build_target(cfg)
    conditioner = make_conditioner(cfg)
    step = resolve_stepsize(cfg, target_constants(target))
    params = initial_params(cfg.family, target.d, conditioner)
    trajectory = [params]
    for t in range(cfg.T):
        g = grad_estimate(target, cfg.form, params, cfg.M, RngStream(cfg.seed, (STREAM_SGD, t)))
        lam = params.flat() - step * g
        norm = np.linalg.norm(lam)
        if not np.isfinite(norm) or norm > DIVERGENCE_LIMIT:
            raise DivergenceError(f"SGD diverged at iteration {t + 1}: |lambda| = {norm:.3e}")
        params = params.with_flat(lam)
        trajectory.append(params)
    return trajectory


def build_bound(cfg, target, consts, theorem=None):
    theorem = theorem or cfg.theorem
    cond = make_conditioner(cfg)
    args = (consts, target.d, cfg.M, cfg.family, GAUSSIAN, cond)
    if theorem == "entropy":
        return bounds.abc_entropy_form(*args)
    if theorem == "kl":
        return bounds.abc_kl_form(*args)
    return bounds.abc_bounded_entropy(*args)


def trace_bounds(cfg, trajectory, target=None, theorem=None):
    """Exact gap, empirical second moment and bound terms at every ``eval_every``-th iterate."""
    if target is None:
        target, _ = build_target(cfg)
    consts = target_constants(target, GAUSSIAN, make_conditioner(cfg))
    bound = build_bound(cfg, target, consts, theorem)
    records = []
    for t in range(0, len(trajectory), cfg.eval_every):
        params = trajectory[t]
        F, gradF = exact_elbo(target, params, GAUSSIAN, cfg.form)
        gap = F - consts.F_star
        grad_sq = float(gradF @ gradF)
        est = empirical_sqnorm(target, cfg.form, params, cfg.M, cfg.R, cfg.seed,
                               stream=(STREAM_VARIANCE, t))
        a_term, b_term, c_term = bound.terms(gap, grad_sq)
        records.append(TrajectoryRecord(
            t=t, F_gap=gap, grad_F_sqnorm=grad_sq,
            gvar_emp=est.second_moment, gvar_se=est.std_error,
            bound_rhs=a_term + b_term + c_term,
            bound_A_term=a_term, bound_B_term=b_term, bound_C_const=c_term,
            kl_qp=kl_to_prior(params, target.prior_var),
        ))
    return records


def _emit(text, out):
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def format_csv(header, rows):
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_trace_csv(records, out=None):
    return _emit(format_csv(TRACE_HEADER, (astuple(r) for r in records)), out)


def read_trace_csv(path_or_text):
    text = path_or_text
    if "\n" not in text:
        with open(path_or_text) as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if ",".join(header) != TRACE_HEADER:
        raise ValueError("not a trace CSV")
    types = [f.type for f in fields(TrajectoryRecord)]
    return [TrajectoryRecord(*(tp(v) for tp, v in zip(types, row))) for row in reader]


def constants_row(name, target, M=10, family="cholesky", dist=GAUSSIAN):
    consts = target_constants(target, dist)
    bound = bounds.abc_entropy_form(consts, target.d, M, family, dist)
    return dict(
        dataset=name, d=target.d, N=target.hyper.get("N"),
        L_H=consts.L_H, mu_KL=consts.mu_KL, kappa_cond=consts.L_H / consts.mu_KL,
        statdist_sq=consts.statdist_sq, A=bound.A, C=bound.C,
    )


def cmd_constants(cfg, out=None):
    """One row of the dataset constants table for a linear-regression config."""
    if cfg.target != "linreg":
        raise ValueError("constants table needs target = linreg")
    target, name = build_target(cfg)
    row = constants_row(name, target, cfg.M, cfg.family)
    _emit(format_csv(CONSTANTS_HEADER, [row.values()]), out)
    return row


def cmd_compare_parameterizations(cfg, out=None):
    """Second moment per family along one softplus-Cholesky trajectory, with shared draws.

    Every family is evaluated at parameters realizing the same ``(m, C)``
    (mean-field keeps only the diagonal of ``C``).
    """
    softplus = Conditioner("softplus")
    ref_cfg = replace(cfg, family="cholesky", conditioner="softplus")
    target, _ = build_target(ref_cfg)
    trajectory = sgd_run(ref_cfg, target)
    rows = []
    for t in range(0, len(trajectory), cfg.eval_every):
        ref = trajectory[t]
        C = build_scale(ref)
        matched = match_parameterizations(ref.m, C, softplus)
        linear = match_parameterizations(ref.m, C, Conditioner("identity"))
        family_params = dict(
            mean_field=matched["mean-field"],
            cholesky_linear=linear["cholesky"],
            cholesky_softplus=matched["cholesky"],
            square_root=matched["square-root"],
        )
        row = [t]
        ses = []
        for col in COMPARE_COLUMNS:
            est = empirical_sqnorm(target, cfg.form, family_params[col], cfg.M, cfg.R,
                                   cfg.seed, stream=(STREAM_COMPARE, t))
            row.append(est.second_moment)
            ses.append(est.std_error)
        rows.append(row + ses)
    header = ",".join(["t"] + [f"gvar_{c}" for c in COMPARE_COLUMNS]
                      + [f"se_{c}" for c in COMPARE_COLUMNS])
    _emit(format_csv(header, rows), out)
    return [dict(zip(header.split(","), r)) for r in rows]

