"""Experiment runner: named experiments driven by declarative YAML/JSON configs.

Usage::

    heavytail <experiment> --config <file> [--out <dir>] [--format csv|json] [--seed N]

Exit code 0 when every check passes, 2 when some check is inconclusive and
none fails, 1 on failure or error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata as importlib_metadata
from pathlib import Path
from typing import Any, Callable, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from . import cevm, rv_core, tail_models, weighted_sums
from ._common import HeavyTailDomainError, Verdict, combine, format_float, limit_verdict
from .free_prob import convolution, measure, remainders, stieltjes, transforms

EXPERIMENTS = (
    "rv-check", "class-report", "series-tail", "breiman", "mellin", "counterexample",
    "cevm-product", "cevm-example", "free-convolve", "remainder-equiv", "free-subexp",
    "stieltjes-karamata",
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# -- config schema ---------------------------------------------------------
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridRange(_Strict):
    start: float
    stop: float
    num: PositiveInt
    spacing: Literal["log", "linear", "chebyshev"] = "log"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.num)
        if self.spacing == "chebyshev":
            return convolution.chebyshev_nodes(self.start, self.stop, self.num)
        return np.linspace(self.start, self.stop, self.num)


Grid = Union[list[float], GridRange]


def grid_values(g: Grid | None) -> np.ndarray | None:
    if g is None:
        return None
    if isinstance(g, GridRange):
        return g.values()
    return np.asarray(g, dtype=float)


class WeightSpec(_Strict):
    kind: Literal["geometric", "deterministic", "uniform", "sparse_example", "mellin_zero", "atomic"]
    ratio: float | None = None
    values: list | None = None
    probs: list | None = None
    alpha: float | None = None
    beta0: float | None = None
    T: PositiveInt | None = None

    def build(self) -> weighted_sums.WeightSequence:
        k = self.kind
        need = {"geometric": ["ratio"], "deterministic": ["values"], "sparse_example": ["alpha"],
                "mellin_zero": ["alpha", "beta0"], "atomic": ["values", "probs"]}.get(k, [])
        missing = [n for n in need if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"weights of kind {k!r} need: {', '.join(missing)}")
        if k == "geometric":
            return weighted_sums.geometric_weights(self.ratio, self.T)
        if k == "deterministic":
            return weighted_sums.deterministic_weights(self.values)
        if k == "uniform":
            return weighted_sums.uniform_weight()
        if k == "sparse_example":
            return weighted_sums.sparse_example_weights(self.alpha, self.T)
        if k == "mellin_zero":
            return weighted_sums.mellin_zero_weights(self.alpha, self.beta0)
        return weighted_sums.atomic_weights(self.values, self.probs)


class RvCheckParams(_Strict):
    index: float
    sv: Literal["constant", "log", "log_shift", "inverse_log"] = "constant"
    c: PositiveFloat = 1.0
    t_values: list[PositiveFloat] = [2.0]
    x_grid: Grid
    karamata_x0: PositiveFloat | None = None


class ClassReportParams(_Strict):
    models: list[dict[str, Any]]
    gamma_grid: list[float] = [0.0]


class SeriesTailParams(_Strict):
    weights: WeightSpec
    innovations: dict[str, Any]
    alpha: PositiveFloat
    n_samples: PositiveInt
    level: PositiveFloat = 1e-3
    x_factors: list[PositiveFloat] = [0.1, 1.0, 10.0]
    T: PositiveInt | None = None
    audit_eps: list[PositiveFloat] | None = None
    expect_rw: Literal["pass", "fail"] | None = None
    expected_constant: float | None = None


class BreimanParams(_Strict):
    mode: Literal["mixture", "product"] = "mixture"
    theta: WeightSpec | None = None
    x_model: dict[str, Any] | None = None
    x_grid: Grid | None = None
    log_x_grid: Grid | None = None
    alpha: PositiveFloat | None = None
    c: PositiveFloat = 1.0
    n: int = 2
    t: PositiveInt = 1


class MellinParams(_Strict):
    weights: WeightSpec
    alpha: PositiveFloat
    beta_grid: Grid
    expect: Literal["nonvanishing", "vanishing"] = "nonvanishing"


class CounterexampleParams(_Strict):
    beta0: PositiveFloat
    a: float
    b: float
    alpha: PositiveFloat
    min_spread: PositiveFloat = 0.5
    x_grid: Grid | None = None


class CaseRow(_Strict):
    rho: float
    gamma: float
    beta_inf: float | None = None
    b_inf: float | None = None
    tilde_ratio_bounded: bool | None = None
    psi_nonzero: bool = False
    expected_case: str
    expected_index: float


class CevmProductParams(_Strict):
    mode: Literal["table", "simulate"]
    cases: list[CaseRow] | None = None
    reference: Literal["case_one", "case_four"] | None = None
    rho: float | None = None
    gamma: float | None = None
    beta_inf: float = 2.0
    degenerate: bool = False
    t_grid: list[PositiveFloat] | None = None
    z_grid: Grid | None = None
    n_samples: PositiveInt | None = None


class CevmExampleParams(_Strict):
    mode: Literal["beta-min", "gev"]
    a: PositiveFloat = 1.0
    b: PositiveFloat = 1.0
    t: PositiveFloat = 1e5
    y_grid: Grid | None = None
    n_samples: PositiveInt | None = None
    gammas: Grid | None = None
    model: dict[str, Any] | None = None
    gamma: float | None = None
    n: PositiveInt | None = None
    x_grid: Grid | None = None


class FreeConvolveParams(_Strict):
    mu: dict[str, Any]
    nu: dict[str, Any] | None = None
    power: int | None = Field(default=None, ge=2)
    reference: Literal["none", "shift", "arcsine", "semicircle"] = "none"
    window: tuple[float, float] | None = None
    x_grid: Grid | None = None
    # nodes on which the output density is recovered; default is adaptive
    recovery_grid: Grid | None = None
    eps: list[PositiveFloat] | None = None
    phi_check: bool = False

    @model_validator(mode="after")
    def _one_operation(self):
        if (self.nu is None) == (self.power is None):
            raise ValueError("give exactly one of 'nu' or 'power'")
        return self


class RemainderParams(_Strict):
    measure: dict[str, Any]
    p: int = Field(ge=0)
    alpha: PositiveFloat
    y_grid: Grid
    phi_at: PositiveFloat | None = None
    beta_sweep: list[PositiveFloat] = [0.25]
    constants: Literal["stated", "corrected"] = "stated"


class FreeSubexpParams(_Strict):
    measure: dict[str, Any]
    n: int = Field(ge=1, le=4)
    survival_window: tuple[PositiveFloat, PositiveFloat] = (1e-4, 1e-3)
    n_points: PositiveInt = 9


class StieltjesParams(_Strict):
    measure: dict[str, Any]
    alpha: float = Field(ge=0.0, lt=2.0)
    which: Literal["prop51", "prop52"] = "prop51"
    y_grid: Grid
    exact: bool = False


PARAMS: dict[str, type[_Strict]] = {
    "rv-check": RvCheckParams,
    "class-report": ClassReportParams,
    "series-tail": SeriesTailParams,
    "breiman": BreimanParams,
    "mellin": MellinParams,
    "counterexample": CounterexampleParams,
    "cevm-product": CevmProductParams,
    "cevm-example": CevmExampleParams,
    "free-convolve": FreeConvolveParams,
    "remainder-equiv": RemainderParams,
    "free-subexp": FreeSubexpParams,
    "stieltjes-karamata": StieltjesParams,
}

# Default tolerances per experiment; configs may override known keys only.
TOLERANCES: dict[str, dict[str, float]] = {
    "rv-check": {"slope": 1e-2, "karamata": 1e-2},
    "class-report": {"dominated": 1e-2},
    "series-tail": {"ratio": 0.10, "constant": 1e-6},
    "breiman": {"ratio": 1e-6},
    "mellin": {},
    "counterexample": {"conv": 1e-2},
    "cevm-product": {"index": 0.07},
    "cevm-example": {"ratio": 0.15, "gev": 1e-12, "doa": 2e-4},
    "free-convolve": {"cdf": 1e-6, "density": 1e-3, "variance": 1e-4, "phi": 1e-8},
    "remainder-equiv": {"const": 0.02, "phi": 0.05},
    "free-subexp": {"band": 0.15, "mass_defect": 1e-4},
    "stieltjes-karamata": {"ratio": 0.02},
}


def _samples(experiment: str, params: _Strict) -> bool:
    """Whether the run draws random numbers (and so needs a seed)."""
    if experiment == "series-tail":
        return True
    if experiment == "cevm-product":
        return params.mode == "simulate"
    if experiment == "cevm-example":
        return params.mode == "beta-min"
    return False


class OutputSpec(_Strict):
    dir: str | None = None
    format: Literal["csv", "json"] = "csv"


class ExperimentConfig(_Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    seed: int | None = Field(default=None, ge=0)
    params: dict[str, Any]
    tolerances: dict[str, PositiveFloat] = {}
    output: OutputSpec = OutputSpec()
    name: str | None = None

    @model_validator(mode="after")
    def _check(self):
        allowed = TOLERANCES[self.experiment]
        unknown = sorted(set(self.tolerances) - set(allowed))
        if unknown:
            raise ValueError(f"unknown tolerance keys for {self.experiment}: {unknown}")
        typed = PARAMS[self.experiment].model_validate(self.params)
        if _samples(self.experiment, typed) and self.seed is None:
            raise ValueError(f"missing required key 'seed' for sampling experiment {self.experiment}")
        return self

    @property
    def typed_params(self):
        return PARAMS[self.experiment].model_validate(self.params)

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, TOLERANCES[self.experiment][key]))

    def config_hash(self) -> str:
        canon = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_config(path: str | Path, seed: int | None = None, experiment: str | None = None) -> ExperimentConfig:
    """Read a YAML (or JSON) config; a CLI seed overrides the file's."""
    text = Path(path).read_text()
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if experiment is not None:
        if "experiment" in raw and raw["experiment"] != experiment:
            raise ConfigError(f"config is for {raw['experiment']!r}, not {experiment!r}")
        raw["experiment"] = experiment
    if seed is not None:
        raw["seed"] = seed
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    exp = raw.get("experiment")
    if exp is not None and exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


# -- result table ----------------------------------------------------------
@dataclass
class Check:
    name: str
    value: float
    target: float
    tol: float
    verdict: Verdict
    note: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": _enc(self.value), "target": _enc(self.target),
                "tol": _enc(self.tol), "verdict": str(self.verdict), "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "Check":
        return cls(d["name"], _dec(d["value"]), _dec(d["target"]), _dec(d["tol"]),
                   Verdict(d["verdict"]), d.get("note", ""))

    def line(self) -> str:
        return (f"{self.verdict.value.upper():<12} {self.name}: value={format_float(self.value)} "
                f"target={format_float(self.target)} tol={format_float(self.tol)}"
                + (f" ({self.note})" if self.note else ""))


def _enc(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else format_float(v)
    return v


def _dec(v):
    return float(v) if isinstance(v, str) else v


@dataclass
class ResultTable:
    experiment: str
    schema: str
    columns: list[str]
    rows: list[list]
    checks: list[Check] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def verdict(self) -> Verdict:
        return combine(c.verdict for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def nonfinite_cells(self) -> list:
        out = []
        for i, r in enumerate(self.rows):
            for j, v in enumerate(r):
                if isinstance(v, float) and not math.isfinite(v):
                    out.append([i, j])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_float(v) if isinstance(v, float) else v for v in r])
        return buf.getvalue()

    def to_dict(self, include_runtime: bool = True) -> dict:
        meta = dict(self.metadata)
        if not include_runtime:
            meta.pop("runtime_s", None)
        return {
            "experiment": self.experiment,
            "schema": self.schema,
            "columns": list(self.columns),
            "rows": [[_enc(v) for v in r] for r in self.rows],
            "checks": [c.to_dict() for c in self.checks],
            "verdict": str(self.verdict),
            "metadata": meta,
        }

    def to_json(self, include_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=1, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        d = json.loads(text)
        rows = [list(r) for r in d["rows"]]
        for i, j in d["metadata"].get("nonfinite_cells", []):
            rows[i][j] = float(rows[i][j])
        return cls(d["experiment"], d["schema"], d["columns"], rows,
                   [Check.from_dict(c) for c in d["checks"]], d["metadata"])


def emit(table: ResultTable, fmt: str, path: str | Path) -> list[Path]:
    """Write the table. CSV writes the rows plus a JSON sidecar with checks and metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(table.to_json())
        return [path]
    if fmt != "csv":
        raise ConfigError(f"unknown format {fmt!r}")
    path.write_text(table.to_csv(), newline="")
    side = path.with_suffix(".meta.json")
    d = table.to_dict()
    d.pop("rows")
    side.write_text(json.dumps(d, indent=1, allow_nan=False))
    return [path, side]


# -- helpers ---------------------------------------------------------------
def _band(name, value, target, tol, note="", relative=False) -> Check:
    value = float(value)
    if not math.isfinite(value):
        return Check(name, value, target, tol, Verdict.FAIL, note or "non-finite")
    err = abs(value - target) / (abs(target) if relative else 1.0)
    return Check(name, value, target, tol, Verdict.PASS if err <= tol else Verdict.FAIL, note)


def _flag(name, ok: bool, note="") -> Check:
    return Check(name, 1.0 if ok else 0.0, 1.0, 0.5, Verdict.PASS if ok else Verdict.FAIL, note)


def _model_name(spec: dict) -> str:
    rest = ",".join(f"{k}={v}" for k, v in spec.items() if k != "family")
    return f"{spec['family']}({rest})"


SV_FAMILIES: dict[str, Callable] = {
    "constant": lambda c: rv_core.constant_sv(c),
    "log": lambda c: rv_core.log_sv(),
    "log_shift": lambda c: rv_core.log_shift_sv(),
    "inverse_log": lambda c: rv_core.inverse_log_sv(),
}


# -- experiments -----------------------------------------------------------
def _rv_check(cfg, P: RvCheckParams):
    spec = rv_core.RegVarSpec(P.index, SV_FAMILIES[P.sv](P.c))
    xs = grid_values(P.x_grid)
    rows, checks = [], []
    kar = np.full(xs.size, math.nan)
    if P.karamata_x0 is not None and P.index != -1.0:
        kar = np.array([rv_core.karamata_integral_ratio(spec, P.karamata_x0, x) for x in xs])
        v = limit_verdict(kar, 1.0, cfg.tolerance("karamata"))
        checks.append(Check("karamata", float(kar[-1]), 1.0, cfg.tolerance("karamata"), v))
    for t in P.t_values:
        ratio = np.array([spec(t * x) / spec(x) for x in xs])
        target = t ** P.index
        v = limit_verdict(ratio, target, cfg.tolerance("slope"))
        checks.append(Check(f"slope[t={t:g}]", float(ratio[-1]), target, cfg.tolerance("slope"), v))
        for x, r, k in zip(xs, ratio, kar):
            rows.append([float(x), float(t), float(r), float(target), float(k), 1.0])
    cols = ["x", "t", "slope_ratio", "slope_target", "karamata_ratio", "karamata_target"]
    return "rv-check", cols, rows, checks, {}


def _class_report(cfg, P: ClassReportParams):
    rows, checks, violations = [], [], []
    tol = cfg.tolerance("dominated")
    for spec in P.models:
        model = tail_models.build_model(spec)
        name = _model_name(spec)
        rep = tail_models.class_report(model, tuple(P.gamma_grid), name=name)
        bad = tail_models.containment_violations(rep)
        violations += [f"{name}: {b}" for b in bad]
        sup = float(rep.diagnostics["dominated_sup"])
        target = 2.0 ** model.tail_index if model.family == "Pareto" else math.nan
        if model.family == "Pareto":
            checks.append(_band(f"dominated_sup[{name}]", sup, target, tol, relative=True))
        long0 = rep.long_gamma.get(0.0, Verdict.INCONCLUSIVE)
        rows.append([name, str(rep.heavy), str(long0), str(rep.subexp), str(rep.dominated),
                     sup, target, ";".join(bad)])
    checks.insert(0, _flag("containment", not violations, "; ".join(violations)))
    cols = ["model", "heavy", "long", "subexp", "dominated", "dominated_sup", "dominated_target",
            "violations"]
    return "class-report", cols, rows, checks, {}


def _series_tail(cfg, P: SeriesTailParams):
    W = P.weights.build()
    spec = weighted_sums.SeriesSpec(W, tail_models.build_model(P.innovations), P.alpha)
    checks = []
    const = weighted_sums.series_constant(spec)
    if P.expected_constant is not None:
        checks.append(_band("series_constant", const, P.expected_constant, cfg.tolerance("constant")))
    if P.audit_eps:
        audits = [weighted_sums.rw_condition_audit(W, P.alpha, e) for e in P.audit_eps]
        if P.expect_rw is not None:
            want = Verdict(P.expect_rw)
            got = [a.rw for a in audits]
            checks.append(_flag("rw", all(g == want for g in got),
                                "per eps: " + ",".join(str(g) for g in got)))
        checks.append(_flag("rw_prime", all(a.rw_prime == Verdict.PASS for a in audits)))
    x_star = weighted_sums.x_for_predicted_tail(spec, P.level)
    xs = x_star * np.asarray(P.x_factors, dtype=float)
    rep = weighted_sums.simulate_series_tail(spec, xs, P.n_samples, cfg.seed, T=P.T)
    k = int(np.argmin(np.abs(np.log(xs / x_star))))
    checks.append(_band("ratio_at_level", rep.ratio[k], 1.0, cfg.tolerance("ratio"),
                        f"x={x_star:.6g}, T={rep.T}"))
    rows = [[float(a), float(b), float(c), float(d), float(e), float(f)] for a, b, c, d, e, f in
            zip(rep.x, rep.empirical, rep.predicted, rep.ratio, rep.mc_stderr, rep.bias_bound)]
    cols = ["x", "empirical", "predicted", "ratio", "mc_stderr", "bias_bound"]
    return "series-tail", cols, rows, checks, {"T": rep.T, "series_constant": const}


def _breiman(cfg, P: BreimanParams):
    tol = cfg.tolerance("ratio")
    if P.mode == "mixture":
        if P.theta is None or P.x_model is None or P.x_grid is None:
            raise ConfigError("mixture mode needs theta, x_model and x_grid")
        rep = weighted_sums.breiman_tail(P.theta.build(), tail_models.build_model(P.x_model),
                                         grid_values(P.x_grid), P.t)
        err = float(np.max(np.abs(rep.value - 1.0)))
        checks = [Check("breiman_ratio", err, 0.0, tol, Verdict.PASS if err <= tol else Verdict.FAIL,
                        "max |ratio - 1|")]
        rows = [[float(x), float(v), 1.0, float(abs(v - 1.0))] for x, v in zip(rep.x, rep.value)]
        return "breiman/mixture", ["x", "ratio", "target", "abs_error"], rows, checks, {}
    if P.alpha is None or (P.x_grid is None and P.log_x_grid is None):
        raise ConfigError("product mode needs alpha and x_grid or log_x_grid")
    xs = grid_values(P.x_grid) if P.x_grid is not None else np.exp(grid_values(P.log_x_grid))
    rows, worst = [], 0.0
    for x in xs:
        pt = weighted_sums.product_power_tail(P.alpha, P.c, P.n, float(x))
        if P.n == 2:
            s = math.log(x) - 2.0 * math.log(P.c)
            target = (1.0 + P.alpha * s) / (P.alpha * math.log(x))
            worst = max(worst, abs(pt.ratio - target))
        else:
            target = math.nan
        rows.append([float(x), float(math.log(x)), pt.value, pt.predicted, pt.ratio, target])
    checks = []
    if P.n == 2:
        checks.append(Check("product_ratio", worst, 0.0, tol, Verdict.PASS if worst <= tol else Verdict.FAIL,
                            "max |ratio - closed form|"))
    else:
        r = np.array([row[4] for row in rows])
        checks.append(Check("product_ratio", float(r[-1]), 1.0, tol, limit_verdict(r, 1.0, tol)))
    cols = ["x", "log_x", "exact", "predicted", "ratio", "closed_form_ratio"]
    return "breiman/product", cols, rows, checks, {}


def _mellin(cfg, P: MellinParams):
    scan = weighted_sums.mellin_nonvanishing(P.weights.build(), P.alpha, grid_values(P.beta_grid))
    want = P.expect == "nonvanishing"
    ok = scan.nonvanishing == want
    checks = [Check("mellin", scan.min_modulus, 0.0, 10 * scan.tail_error + 1e-12,
                    Verdict.PASS if ok else Verdict.FAIL,
                    f"expected {P.expect}; minimum at beta={scan.argmin_beta:.6g}")]
    rows = [[float(b), float(m)] for b, m in zip(scan.beta, scan.modulus)]
    return "mellin", ["beta", "modulus"], rows, checks, {"bound": scan.bound}


def _counterexample(cfg, P: CounterexampleParams):
    rep = weighted_sums.converse_counterexample(P.beta0, P.a, P.b, P.alpha, grid_values(P.x_grid))
    tol = cfg.tolerance("conv")
    checks = [
        Check("nu_not_rv", rep.spread, P.min_spread, P.min_spread,
              Verdict.PASS if rep.spread >= P.min_spread else Verdict.FAIL,
              "spread of x^alpha nu(x,inf) along x = exp(k pi / beta0)"),
    ]
    dev = float(np.max(np.abs(rep.scaled_conv / rep.rho_norm - 1.0)))
    checks.append(Check("conv_rv", dev, 0.0, tol, Verdict.PASS if rep.conv_constant_within(tol) else Verdict.FAIL,
                        "max relative deviation of x^alpha (nu * rho)(x,inf) from its constant"))
    rows = [[float(x), float(c), float(c / rep.rho_norm), float(m)]
            for x, c, m in zip(rep.x_grid, rep.scaled_conv, rep.scaled_mu_conv)]
    meta = {"witness_x": rep.x_witness.tolist(), "witness_scaled_nu": rep.scaled_nu_witness.tolist(),
            "rho_norm": rep.rho_norm}
    return "counterexample", ["x", "scaled_conv", "scaled_conv_normalised", "scaled_mu_conv"], rows, checks, meta


def _dummy_sampler(n, rng):
    raise HeavyTailDomainError("classification-only spec")


def _cevm_product(cfg, P: CevmProductParams):
    if P.mode == "table":
        if not P.cases:
            raise ConfigError("table mode needs cases")
        rows, bad = [], []
        for c in P.cases:
            spec = cevm.CEVMSpec(c.gamma, c.rho, lambda t: 1.0, lambda t: 1.0, _dummy_sampler,
                                 beta_inf=c.beta_inf, b_inf=c.b_inf, psi_nonzero=c.psi_nonzero,
                                 tilde_ratio_bounded=c.tilde_ratio_bounded)
            recipe = cevm.classify_case(spec)
            idx = cevm.product_tail_index(recipe.case, c.rho, c.gamma)
            ok = recipe.case == c.expected_case and abs(idx - c.expected_index) <= 1e-12
            if not ok:
                bad.append(f"rho={c.rho},gamma={c.gamma}")
            rows.append([c.rho, c.gamma, _f(c.beta_inf), _f(c.b_inf), recipe.case, c.expected_case,
                         float(idx), c.expected_index, recipe.description])
        checks = [_flag("table", not bad, "; ".join(bad))]
        cols = ["rho", "gamma", "beta_inf", "b_inf", "case", "expected_case", "index", "expected_index",
                "quantity"]
        return "cevm-product/table", cols, rows, checks, {}
    if P.reference is None or P.t_grid is None or P.z_grid is None or P.n_samples is None:
        raise ConfigError("simulate mode needs reference, t_grid, z_grid and n_samples")
    if P.reference == "case_one":
        spec = cevm.case_one_reference(P.rho, P.gamma)
    else:
        spec = cevm.case_four_reference(P.gamma, P.beta_inf, P.degenerate)
    zs = grid_values(P.z_grid)
    rep = cevm.simulate_product_tail(spec, P.t_grid, zs, P.n_samples, cfg.seed, tol=cfg.tolerance("index"))
    if P.reference == "case_one":
        exact = cevm.case_one_limit(P.rho, P.gamma, zs)
    else:
        exact = rep.exact_limit
    checks = [Check(f"slope[{rep.case}]", rep.empirical_index, rep.predicted_index, cfg.tolerance("index"),
                    rep.verdict, "; ".join(rep.notes))]
    t = rep.t_used
    curve = rep.curves[t] if t is not None else np.full(zs.size, math.nan)
    cnt = rep.counts[t] if t is not None else np.zeros(zs.size, dtype=int)
    rows = [[float(z), float(c), float(e), int(k)] for z, c, e, k in zip(zs, curve, exact, cnt)]
    meta = {"case": rep.case, "t_used": t, "quantity": rep.transformed_quantity}
    return "cevm-product/simulate", ["z", "estimate", "limit", "exceedances"], rows, checks, meta


def _f(v):
    return math.nan if v is None else float(v)


def _cevm_example(cfg, P: CevmExampleParams):
    if P.mode == "beta-min":
        if P.y_grid is None or P.n_samples is None:
            raise ConfigError("beta-min mode needs y_grid and n_samples")
        rep = cevm.beta_min_example_mc(P.a, P.b, P.t, grid_values(P.y_grid), P.n_samples, cfg.seed)
        tol = cfg.tolerance("ratio")
        checks = [_band(f"ratio[y={y:g}]", r, 1.0, tol) for y, r in zip(rep.y, rep.ratio)]
        rows = [[float(y), float(e), float(l), float(r), float(s), int(c)] for y, e, l, r, s, c in
                zip(rep.y, rep.estimate, rep.limit, rep.ratio, rep.stderr, rep.plain_counts)]
        return "cevm-example/beta-min", ["y", "estimate", "limit", "ratio", "stderr", "plain_count"], rows, checks, {}
    if P.gammas is None:
        raise ConfigError("gev mode needs gammas")
    rows, checks = [], []
    e1 = math.exp(-1.0)
    errs = []
    for g in grid_values(P.gammas):
        v = float(cevm.gev_cdf(float(g), 0.0))
        errs.append(abs(v - e1))
        rows.append(["gev_cdf_at_zero", float(g), v, e1, abs(v - e1)])
    worst = max(errs)
    checks.append(Check("gev_at_zero", worst, 0.0, cfg.tolerance("gev"),
                        Verdict.PASS if worst <= cfg.tolerance("gev") else Verdict.FAIL))
    if P.model is not None:
        if P.gamma is None or P.n is None or P.x_grid is None:
            raise ConfigError("normalizer check needs gamma, n and x_grid")
        F = tail_models.build_model(P.model)
        err = cevm.doa_max_error(F, P.gamma, P.n, grid_values(P.x_grid))
        nz = cevm.doa_normalizers(F, P.gamma, P.n)
        rows.append(["doa_max_error", float(P.n), err, 0.0, err])
        checks.append(Check("doa_max_error", err, 0.0, cfg.tolerance("doa"),
                            Verdict.PASS if err < cfg.tolerance("doa") else Verdict.FAIL,
                            f"a_n={nz.a_n:.6g}, b_n={nz.b_n:.6g}"))
    return "cevm-example/gev", ["quantity", "parameter", "value", "target", "abs_error"], rows, checks, {}


def _arcsine_density(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 2, 1.0 / (math.pi * np.sqrt(np.maximum(4.0 - x * x, 1e-300))), 0.0)


def _is_point_mass(m: measure.SpectralMeasure) -> bool:
    return not m.has_body and m.tail is None and len(m.atom_loc) == 1


def _variance(m: measure.SpectralMeasure) -> float:
    return m.moment(2) - m.moment(1) ** 2


def _free_convolve(cfg, P: FreeConvolveParams):
    mu = measure.build_measure(P.mu)
    nu = measure.build_measure(P.nu) if P.nu is not None else None
    eps = tuple(P.eps) if P.eps else convolution.DEFAULT_EPS
    grid = grid_values(P.recovery_grid)
    if nu is not None:
        out = convolution.free_convolve(mu, nu, grid=grid, eps=eps)
    else:
        out = convolution.free_convolution_power(mu, P.power, grid=grid, eps=eps)
    diag = out.meta["diagnostics"]
    xs = grid_values(P.x_grid)
    if xs is None:
        lo = out.support_min
        hi = out.support_max if math.isfinite(out.support_max) else lo + 100.0
        xs = np.linspace(lo, hi, 401)
    dens = out.density_at(xs)
    cdf = out.cdf(xs)
    ref_d = np.full(xs.size, math.nan)
    ref_c = np.full(xs.size, math.nan)
    checks = []
    if P.reference == "shift":
        if nu is None:
            raise ConfigError("shift reference needs two measures")
        if _is_point_mass(mu):
            a, other = float(mu.atom_loc[0]), nu
        elif _is_point_mass(nu):
            a, other = float(nu.atom_loc[0]), mu
        else:
            raise ConfigError("shift reference needs one point mass")
        ref_c = other.cdf(xs - a)
        ref_d = other.density_at(xs - a)
        err = float(np.max(np.abs(cdf - ref_c)))
        checks.append(Check("shift_cdf", err, 0.0, cfg.tolerance("cdf"),
                            Verdict.PASS if err < cfg.tolerance("cdf") else Verdict.FAIL, "sup |F - F_shift|"))
    elif P.reference == "arcsine":
        lo, hi = P.window or (-1.9, 1.9)
        ref_d = _arcsine_density(xs)
        w = np.linspace(lo, hi, 2001)
        err = float(np.max(np.abs(out.density_at(w) - _arcsine_density(w))))
        checks.append(Check("arcsine_density", err, 0.0, cfg.tolerance("density"),
                            Verdict.PASS if err < cfg.tolerance("density") else Verdict.FAIL,
                            f"sup error on [{lo:g}, {hi:g}]"))
    elif P.reference == "semicircle":
        want = _variance(mu) + _variance(nu) if nu is not None else P.power * _variance(mu)
        checks.append(_band("variance", _variance(out), want, cfg.tolerance("variance")))
    if P.phi_check:
        cone = transforms.calibrate_cone(out)
        z = cone.grid()
        rhs = (transforms.voiculescu_transform(mu, z) + transforms.voiculescu_transform(nu, z)
               if nu is not None else P.power * transforms.voiculescu_transform(mu, z))
        res = float(np.max(np.abs(transforms.voiculescu_transform(out, z) - rhs)))
        checks.append(Check("phi_additivity", res, 0.0, cfg.tolerance("phi"),
                            Verdict.PASS if res < cfg.tolerance("phi") else Verdict.FAIL,
                            f"cone radius {cone.bound:g}"))
    rows = [[float(a), float(b), float(c), float(d), float(e)] for a, b, c, d, e in zip(xs, dens, cdf, ref_d, ref_c)]
    meta = {"mass_defect": diag.mass_defect, "max_residual": diag.max_residual,
            "richardson_gap": diag.richardson_gap, "eps": list(diag.eps)}
    return "free-convolve", ["x", "density", "cdf", "reference_density", "reference_cdf"], rows, checks, meta


def _remainder_equiv(cfg, P: RemainderParams):
    mu = measure.build_measure(P.measure)
    consts = (remainders.asymptotic_constants(P.alpha, P.p) if P.constants == "stated"
              else remainders.corrected_constants(P.alpha, P.p))
    ys = grid_values(P.y_grid)
    rep = remainders.verify_remainder_equivalence(mu, P.p, P.alpha, ys, beta=P.beta_sweep[0],
                                                  tol_const=cfg.tolerance("const"),
                                                  tol_phi=cfg.tolerance("phi"), constants=consts)
    checks = []
    gap = rep.phi_ratio
    k = len(rep.y_grid) - 1 if P.phi_at is None else int(np.argmin(np.abs(np.log(rep.y_grid / P.phi_at))))
    checks.append(_band("phi_equiv", gap[k], 0.0, cfg.tolerance("phi"), f"|r_phi/r_G - 1| at y={rep.y_grid[k]:g}"))
    checks.append(Check("lower_bound", float(rep.y_grid[-1] * abs(rep.rG_values[-1])), math.nan, math.nan,
                        rep.checks["lower_bound"], "y |r_G(iy)| increasing"))
    for key, target, fitted in (("imag_const", consts.imag, rep.fitted_imag),
                                ("real_const", consts.real, rep.fitted_real)):
        if target is not None:
            checks.append(_band(key, fitted, target, cfg.tolerance("const"), f"at y={rep.y_grid[-1]:g}",
                                relative=True))
    if consts.regime == "upper_edge":
        for b in P.beta_sweep:
            dec = np.abs(rep.rG_values) * rep.y_grid ** b
            ok = bool(np.all(np.diff(dec) < 0))
            checks.append(Check(f"upper_bound[beta={b:g}]", float(dec[-1]), math.nan, math.nan,
                                Verdict.PASS if ok else Verdict.FAIL, "|r_G(iy)| y^beta decreasing"))
    rows = []
    for j, y in enumerate(rep.y_grid):
        rg, rp, s = rep.rG_values[j], rep.rphi_values[j], rep.scale[j]
        rows.append([float(y), rg.real, rg.imag, rp.real, rp.imag, float(s), rg.real / s, rg.imag / s,
                     float(gap[j]), float(rep.route_gap[j])])
    cols = ["y", "re_rG", "im_rG", "re_rphi", "im_rphi", "scale", "re_rG_scaled", "im_rG_scaled",
            "phi_ratio_gap", "route_gap"]
    meta = {"regime": consts.regime, "constants": P.constants, "warnings": rep.warnings}
    return "remainder-equiv", cols, rows, checks, meta


def survival_quantile(mu: measure.SpectralMeasure, level: float) -> float:
    """x with mu(x, inf) = level, by bisection in log x."""
    lo = max(mu.support_min, 1e-12)
    hi = lo * 2.0
    while float(mu.survival(hi)) > level:
        hi *= 2.0
    a, b = math.log(lo), math.log(hi)
    for _ in range(200):
        m = 0.5 * (a + b)
        if float(mu.survival(math.exp(m))) > level:
            a = m
        else:
            b = m
    return math.exp(0.5 * (a + b))


def _free_subexp(cfg, P: FreeSubexpParams):
    mu = measure.build_measure(P.measure)
    s_lo, s_hi = sorted(P.survival_window)
    xs = np.geomspace(survival_quantile(mu, s_hi), survival_quantile(mu, s_lo), P.n_points)
    band = cfg.tolerance("band")
    curve = convolution.free_subexp_ratio(mu, P.n, xs, max_defect=cfg.tolerance("mass_defect"))
    worst = int(np.argmax(np.abs(curve.ratio - 1.0)))
    worst_j = int(np.argmax(np.abs(curve.jump_ratio - 1.0)))
    checks = [
        _band("ratio_band", curve.ratio[worst], 1.0, band, f"worst at x={xs[worst]:.6g}"),
        _band("jump_band", curve.jump_ratio[worst_j], 1.0, band, f"worst at x={xs[worst_j]:.6g}"),
        _flag("monotone_toward_one", curve.monotone_toward_one()),
        Check("mass_defect", abs(curve.mass_defect), 0.0, cfg.tolerance("mass_defect"),
              Verdict.PASS if abs(curve.mass_defect) < cfg.tolerance("mass_defect") else Verdict.FAIL),
    ]
    rows = [[float(a), float(b), float(c), float(d), float(e)] for a, b, c, d, e in
            zip(xs, curve.survival_1, curve.survival_n, curve.ratio, curve.jump_ratio)]
    return "free-subexp", ["x", "survival_1", "survival_n", "ratio", "jump_ratio"], rows, checks, {}


def _stieltjes(cfg, P: StieltjesParams):
    spec = dict(P.measure)
    if spec.get("family") == "lebesgue":
        rho = stieltjes.LebesgueMeasure(float(spec.get("upper", math.inf)))
    else:
        rho = stieltjes.measure_from_model(tail_models.build_model(spec))
    ys = grid_values(P.y_grid)
    rep = stieltjes.stieltjes_karamata(rho, P.alpha, ys, P.which)
    tol = cfg.tolerance("ratio")
    if P.exact:
        err = float(np.max(np.abs(rep.value - 1.0)))
        checks = [Check("ratio_exact", err, 0.0, tol, Verdict.PASS if err <= tol else Verdict.FAIL,
                        "max |ratio - 1| over the grid")]
    else:
        checks = [_band("ratio_limit", rep.value[-1], 1.0, tol, f"at y={ys[-1]:g}")]
    rows = [[float(y), float(v), 1.0] for y, v in zip(rep.x, rep.value)]
    return "stieltjes-karamata", ["y", "ratio", "target"], rows, checks, {"c_alpha": rep.meta["c_alpha"]}


RUNNERS: dict[str, Callable] = {
    "rv-check": _rv_check,
    "class-report": _class_report,
    "series-tail": _series_tail,
    "breiman": _breiman,
    "mellin": _mellin,
    "counterexample": _counterexample,
    "cevm-product": _cevm_product,
    "cevm-example": _cevm_example,
    "free-convolve": _free_convolve,
    "remainder-equiv": _remainder_equiv,
    "free-subexp": _free_subexp,
    "stieltjes-karamata": _stieltjes,
}


def _versions() -> dict:
    out = {}
    for pkg in ("artifact", "numpy", "scipy"):
        try:
            out[pkg] = importlib_metadata.version(pkg)
        except importlib_metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def run(config: ExperimentConfig) -> ResultTable:
    """Dispatch a validated config to its experiment and collect the result table."""
    params = config.typed_params
    t0 = time.perf_counter()
    try:
        schema, cols, rows, checks, extra = RUNNERS[config.experiment](config, params)
    except (HeavyTailDomainError, ArithmeticError, RuntimeError) as exc:
        raise type(exc)(f"{config.experiment}: {exc}") from exc
    runtime = time.perf_counter() - t0
    table = ResultTable(config.experiment, schema, cols, rows, checks)
    nonfinite = table.nonfinite_cells()
    table.metadata = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "versions": _versions(),
        "nonfinite": bool(nonfinite),
        "nonfinite_cells": nonfinite,
        **{k: _jsonable(v) for k, v in extra.items()},
        "runtime_s": runtime,
    }
    return table


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return _enc(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


EXIT_CODES = {Verdict.PASS: 0, Verdict.INCONCLUSIVE: 2, Verdict.FAIL: 1}


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="heavytail", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, experiment=args.experiment)
        table = run(cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (HeavyTailDomainError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    fmt = args.format or cfg.output.format
    out_dir = args.out or cfg.output.dir
    stem = cfg.name or Path(args.config).stem
    if out_dir is not None:
        for p in emit(table, fmt, Path(out_dir) / f"{stem}.{fmt}"):
            print(f"wrote {p}")
    else:
        sys.stdout.write(table.to_csv() if fmt == "csv" else table.to_json() + "\n")
    for c in table.checks:
        print(c.line())
    print(f"verdict: {table.verdict}")
    return EXIT_CODES[table.verdict]


if __name__ == "__main__":
    sys.exit(main())
