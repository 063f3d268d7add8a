"""INI experiment configs: parsing, validation, and object building.

One file describes one experiment.  Every malformed field is collected
before raising so a config with three typos reports three problems, not
one per run attempt.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import BoundReport, clt_bounds, lln_bounds, nisio_bounds
from .convex_expectation import growth_certificate, load_scenarios
from .core import DomainError, Grid, GridFunction, WeightFunction
from .iterate import StepOperator
from .nisio import NisioFamily
from .reference import OracleResult, fine_oracle, heat_exact


class ConfigError(ValueError):
    """Carries every invalid field found in a config file."""

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


_DYADIC = re.compile(r"^2\^(-?\d+)$")


def parse_step(token: str) -> float:
    token = token.strip()
    m = _DYADIC.match(token)
    if m:
        return 2.0 ** int(m.group(1))
    return float(token)


def parse_h_list(text: str) -> tuple[float, ...]:
    """Either a dyadic range like 2^-3..2^-9 or a comma list of steps."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        ma, mb = _DYADIC.match(lo.strip()), _DYADIC.match(hi.strip())
        if not (ma and mb):
            raise DomainError("a step range needs dyadic endpoints like 2^-3..2^-9")
        a, b = int(ma.group(1)), int(mb.group(1))
        if a < b:
            raise DomainError("a step range must refine, e.g. 2^-3..2^-9")
        return tuple(2.0**k for k in range(a, b - 1, -1))
    steps = tuple(parse_step(tok) for tok in text.split(",") if tok.strip())
    if not steps:
        raise DomainError("empty step list")
    if any(s <= 0 for s in steps) or any(
        b >= a for a, b in zip(steps, steps[1:])
    ):
        raise DomainError("steps must be positive and strictly decreasing")
    return steps


_PAYOFFS = {
    "cos": lambda v, p: p["scale"] * np.cos(v),
    "abs": lambda v, p: p["scale"] * np.abs(v),
    "capped_abs": lambda v, p: p["scale"] * np.minimum(np.abs(v), p["cap"]),
    "gaussian_bump": lambda v, p: p["scale"] * np.exp(-0.5 * v * v),
    "linear": lambda v, p: p["scale"] * v,
}

_KNOWN_KEYS = {
    "grid": {"low", "high", "points"},
    "weight": {"kind", "q"},
    "operator": {"type", "controls", "scenarios", "smooth", "cut"},
    "payoff": {"kind", "scale", "cap"},
    "experiment": {"t", "h", "reference", "h_fine", "sigma", "mean", "seed"},
    "rate": {"slope_tolerance", "noise_floor", "symmetric", "margin"},
    "tolerances": {"property", "pairs"},
}


@dataclass(frozen=True)
class Experiment:
    """Everything a run needs, already validated and built."""

    grid: Grid
    weight: WeightFunction | None
    payoff: GridFunction
    payoff_name: str
    operator: StepOperator
    model_kind: str  # nisio | lln | clt
    model: object
    smooth: bool | None
    symmetric: bool
    t: float
    h_list: tuple[float, ...]
    reference_kind: str  # oracle | exact
    h_fine: float
    exact_sigma: float
    exact_mean: float
    seed: int
    slope_tolerance: float
    noise_floor: float
    margin: float | None
    property_tol: float
    n_pairs: int
    cut: float
    raw_text: str

    @property
    def radius(self) -> float:
        """Smallest r with the payoff r-Lipschitz and r-bounded."""
        return max(self.payoff.sup_norm, self.payoff.lipschitz)

    def build_bounds(self, r: float | None = None) -> tuple[BoundReport, ...]:
        r = self.radius if r is None else r
        if self.model_kind == "nisio":
            return (nisio_bounds(self.model.bounds, r, self.t, smooth=self.smooth),)
        if self.model_kind == "lln":
            return (
                lln_bounds(self.model, r, self.t, "minus"),
                lln_bounds(self.model, r, self.t, "plus"),
            )
        cert = growth_certificate(self.model)
        reports = [
            clt_bounds(self.model, cert, r, self.t, "minus"),
            clt_bounds(self.model, cert, r, self.t, "plus"),
        ]
        if self.symmetric:
            reports.append(
                clt_bounds(self.model, cert, r, self.t, "minus", symmetric=True)
            )
            reports.append(
                clt_bounds(self.model, cert, r, self.t, "plus", symmetric=True)
            )
        return tuple(reports)

    def build_reference(self, admitted_op: StepOperator) -> OracleResult:
        if self.reference_kind == "exact":
            values = heat_exact(self.payoff, self.exact_sigma, self.exact_mean, self.t)
            return OracleResult(values=values, uncertainty=0.0, h_fine=None)
        return fine_oracle(
            admitted_op,
            self.payoff,
            self.t,
            self.h_fine,
            weight=self.weight,
            margin=self.margin,
        )


class _Reader:
    """Typed access to one section, collecting problems instead of raising."""

    def __init__(self, parser: configparser.ConfigParser, problems: list):
        self.parser = parser
        self.problems = problems

    def flag(self, section: str, key: str, message: str):
        self.problems.append(f"[{section}] {key}: {message}")

    def raw(self, section: str, key: str, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                self.flag(section, key, "missing")
            return default
        return self.parser.get(section, key)

    def number(self, section, key, default=None, required=False, check=None):
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        try:
            value = parse_step(text) if text.strip().startswith("2^") else float(text)
        except ValueError:
            self.flag(section, key, f"not a number: {text!r}")
            return default
        if check is not None and not check(value):
            self.flag(section, key, f"out of range: {text!r}")
            return default
        return value

    def integer(self, section, key, default=None, required=False, check=None):
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        try:
            value = int(text)
        except ValueError:
            self.flag(section, key, f"not an integer: {text!r}")
            return default
        if check is not None and not check(value):
            self.flag(section, key, f"out of range: {text!r}")
            return default
        return value

    def boolean(self, section, key, default=None):
        text = self.raw(section, key)
        if text is None:
            return default
        low = text.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        self.flag(section, key, f"not a boolean: {text!r}")
        return default

    def choice(self, section, key, options, default=None, required=False):
        text = self.raw(section, key, None, required)
        if text is None:
            return default
        text = text.strip()
        if text not in options:
            self.flag(section, key, f"expected one of {sorted(options)}, got {text!r}")
            return default
        return text


def _parse_controls(text: str) -> tuple[tuple[float, float], ...]:
    controls = []
    for chunk in text.split(","):
        parts = chunk.split()
        if len(parts) != 2:
            raise DomainError(f"control {chunk.strip()!r} is not 'sigma m'")
        controls.append((float(parts[0]), float(parts[1])))
    if not controls:
        raise DomainError("empty control list")
    return tuple(controls)


def load_config(path) -> Experiment:
    path = Path(path)
    try:
        raw_text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"])
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(raw_text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"])

    problems: list[str] = []
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            problems.append(f"[{section}]: unknown section")
            continue
        for key in parser.options(section):
            if key not in _KNOWN_KEYS[section]:
                problems.append(f"[{section}] {key}: unknown key")
    for section in ("grid", "operator", "payoff", "experiment"):
        if not parser.has_section(section):
            problems.append(f"[{section}]: missing section")
    if problems:
        raise ConfigError(problems)

    r = _Reader(parser, problems)

    low = r.number("grid", "low", required=True)
    high = r.number("grid", "high", required=True)
    points = r.integer("grid", "points", required=True, check=lambda n: n >= 3)
    grid = None
    if not problems and low is not None and high is not None:
        try:
            grid = Grid((low,), (high,), (points,))
        except DomainError as exc:
            r.flag("grid", "low/high/points", str(exc))

    weight = None
    kind = r.choice("weight", "kind", {"constant", "inverse_poly"}, default="constant")
    if kind == "inverse_poly":
        q = r.number("weight", "q", required=True, check=lambda v: v > 0)
        if q is not None and grid is not None:
            weight = WeightFunction(grid, "inverse_poly", q=q)

    op_type = r.choice("operator", "type", {"nisio", "lln", "clt"}, required=True)
    cut = r.number("operator", "cut", default=8.0, check=lambda v: v > 0)
    smooth = r.boolean("operator", "smooth", default=None)
    model = None
    operator = None
    if op_type == "nisio":
        text = r.raw("operator", "controls", required=True)
        if text is not None:
            try:
                model = NisioFamily(_parse_controls(text))
                operator = StepOperator.from_nisio(model, cut=cut)
            except (DomainError, ValueError) as exc:
                r.flag("operator", "controls", str(exc))
    elif op_type in ("lln", "clt"):
        name = r.raw("operator", "scenarios", required=True)
        if name is not None:
            try:
                model = load_scenarios(path.parent / name.strip())
                build = StepOperator.from_lln if op_type == "lln" else StepOperator.from_clt
                operator = build(model, cut=cut)
            except (DomainError, OSError) as exc:
                r.flag("operator", "scenarios", str(exc))

    payoff_name = r.choice("payoff", "kind", set(_PAYOFFS), required=True)
    payoff_params = {
        "scale": r.number("payoff", "scale", default=1.0, check=lambda v: v > 0),
        "cap": r.number("payoff", "cap", default=1.0, check=lambda v: v > 0),
    }
    payoff = None
    if payoff_name is not None and grid is not None and None not in payoff_params.values():
        fn = _PAYOFFS[payoff_name]
        payoff = GridFunction.from_callable(grid, lambda v: fn(v, payoff_params))

    t = r.number("experiment", "t", required=True, check=lambda v: v > 0)
    h_text = r.raw("experiment", "h", required=True)
    h_list = ()
    if h_text is not None:
        try:
            h_list = parse_h_list(h_text)
        except (DomainError, ValueError) as exc:
            r.flag("experiment", "h", str(exc))
    reference = r.choice(
        "experiment", "reference", {"oracle", "exact"}, default="oracle"
    )
    h_fine = r.number("experiment", "h_fine", default=2.0**-13, check=lambda v: v > 0)
    exact_sigma = r.number("experiment", "sigma", default=1.0, check=lambda v: v > 0)
    exact_mean = r.number("experiment", "mean", default=0.0)
    seed = r.integer("experiment", "seed", default=0, check=lambda n: n >= 0)

    slope_tolerance = r.number(
        "rate", "slope_tolerance", default=0.05, check=lambda v: v >= 0
    )
    noise_floor = r.number("rate", "noise_floor", default=10.0, check=lambda v: v >= 1)
    symmetric = r.boolean("rate", "symmetric", default=False)
    margin = r.number("rate", "margin", default=None, check=lambda v: v > 0)
    property_tol = r.number("tolerances", "property", default=1e-9, check=lambda v: v > 0)
    n_pairs = r.integer("tolerances", "pairs", default=1000, check=lambda n: n >= 1)

    if h_list and reference == "oracle" and h_fine is not None:
        if h_fine > min(h_list) / 8:
            r.flag("experiment", "h_fine", "must be at least 8x finer than min(h)")
    if symmetric and op_type != "clt":
        r.flag("rate", "symmetric", "only meaningful for clt operators")

    if problems:
        raise ConfigError(problems)

    return Experiment(
        grid=grid,
        weight=weight,
        payoff=payoff,
        payoff_name=payoff_name,
        operator=operator,
        model_kind=op_type,
        model=model,
        smooth=smooth,
        symmetric=bool(symmetric),
        t=t,
        h_list=h_list,
        reference_kind=reference,
        h_fine=h_fine,
        exact_sigma=exact_sigma,
        exact_mean=exact_mean,
        seed=seed,
        slope_tolerance=slope_tolerance,
        noise_floor=noise_floor,
        margin=margin,
        property_tol=property_tol,
        n_pairs=n_pairs,
        cut=cut,
        raw_text=raw_text,
    )
