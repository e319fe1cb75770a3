"""Experiment configuration: a dataclass plus a ``key = value`` file format."""

from dataclasses import dataclass, fields, replace

from .reparam import CONDITIONERS, FAMILIES
from .targets import FORMS

TARGETS = ("quadratic", "linreg")
THEOREMS = ("entropy", "kl", "bounded_entropy")

# config-file key -> dataclass field
_ALIASES = {"lambda": "lam"}


@dataclass(frozen=True)
class ExperimentConfig:
    target: str = "quadratic"
    family: str = "cholesky"
    conditioner: str = "softplus"
    S: float = None
    form: str = "entropy"
    d: int = 20
    N: int = 100
    sigma: float = 0.3
    lam: float = 8.0
    M: int = 10
    T: int = 500
    stepsize: float = None  # None -> min(1 / L_H, 1 / A)
    R: int = 1000
    eval_every: int = 10
    seed: int = 0
    dataset_path: str = None
    standardize: bool = True
    theorem: str = "entropy"

    def __post_init__(self):
        checks = [
            (self.target in TARGETS, f"target must be one of {TARGETS}"),
            (self.family in FAMILIES, f"family must be one of {FAMILIES}"),
            (self.conditioner in CONDITIONERS, f"conditioner must be one of {CONDITIONERS}"),
            (self.form in FORMS, f"form must be one of {FORMS}"),
            (self.theorem in THEOREMS, f"theorem must be one of {THEOREMS}"),
            (self.M >= 1 and self.T >= 1, "M and T must be at least 1"),
            (self.R >= 2, "R must be at least 2"),
            (self.eval_every >= 1, "eval_every must be at least 1"),
            (self.d >= 1 and self.N >= 1, "d and N must be at least 1"),
            (self.conditioner != "clipped-softplus" or self.S is not None,
             "clipped-softplus needs S"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"invalid config: {msg}")

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _coerce(name, raw):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    kind = kinds[name]
    if raw.lower() in ("none", ""):
        return None
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    return raw


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[name] = _coerce(name, raw)
    return ExperimentConfig(**values)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def format_config(cfg):
    inverse = {v: k for k, v in _ALIASES.items()}
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        lines.append(f"{inverse.get(f.name, f.name)} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
