"""Acceptance suite: each criterion runs its committed config through the CLI runner.

Tolerances are restated here rather than read back from the configs, so a
loosened config cannot turn a criterion green.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from heavytail import cli
from heavytail._common import Verdict

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(name):
    cfg = cli.load_config(CONFIGS / f"{name}.yaml")
    t0 = time.perf_counter()
    table = cli.run(cfg)
    return table, time.perf_counter() - t0


def finish(record, key, parts):
    """parts: list of (label, ok, detail); records and asserts them together."""
    ok = all(p[1] for p in parts)
    record(key, ok, "; ".join(f"{label}{'' if good else ' FAIL'} {detail}" for label, good, detail in parts))
    failed = [f"{label}: {detail}" for label, good, detail in parts if not good]
    assert ok, "; ".join(failed)


def test_criterion_01_breiman_exact(record_criterion):
    t, dt = run("c01_breiman")
    x = t.column("x")
    err = float(np.max(np.abs(t.column("ratio") - 1.0)))
    finish(record_criterion, "criterion 1", [
        ("grid", x.min() == 10.0 and x.max() == 1e4, f"[{x.min():g}, {x.max():g}]"),
        ("ratio", err <= 1e-6, f"max |ratio-1|={err:.2e}"),
        ("runtime", dt < 1.0, f"{dt:.2f}s"),
    ])


def test_criterion_02_series_tail(record_criterion):
    t, dt = run("c02_series_tail")
    c = t.check("series_constant").value
    k = int(np.argmin(np.abs(t.column("predicted") - 1e-3)))
    r = float(t.column("ratio")[k])
    finish(record_criterion, "criterion 2", [
        ("constant", abs(c - (math.sqrt(2) + 1)) < 1e-6, f"{c:.6f}"),
        ("ratio", 0.90 <= r <= 1.10, f"{r:.4f} at x={t.column('x')[k]:.3g} T={t.metadata['T']}"),
        ("runtime", dt < 60.0, f"{dt:.1f}s"),
    ])


def test_criterion_03_modified_rw(record_criterion):
    t, dt = run("c03_modified_rw")
    c = t.check("series_constant").value
    k = int(np.argmin(np.abs(t.column("predicted") - 1e-3)))
    r = float(t.column("ratio")[k])
    finish(record_criterion, "criterion 3", [
        ("rw fails for every eps", t.check("rw").verdict == Verdict.PASS, t.check("rw").note),
        ("rw' holds", t.check("rw_prime").verdict == Verdict.PASS, ""),
        ("sum", abs(c - math.pi ** 2 / 6) < 1e-6, f"{c:.9f}"),
        ("ratio", 0.85 <= r <= 1.15, f"{r:.4f}"),
        ("runtime", dt < 120.0, f"{dt:.1f}s"),
    ])


def test_criterion_04_counterexample(record_criterion):
    t, dt = run("c04_counterexample")
    w = np.array(t.metadata["witness_scaled_nu"], dtype=float)
    spread = float(w.max() - w.min())
    conv = t.check("conv_rv").value
    finish(record_criterion, "criterion 4", [
        ("nu not RV", spread >= 0.5, f"spread={spread:.3f}"),
        ("conv RV", conv < 1e-2, f"deviation={conv:.2e}"),
        ("runtime", dt < 10.0, f"{dt:.2f}s"),
    ])


def test_criterion_05_product_of_n(record_criterion):
    t, dt = run("c05_product_tail")
    k = int(np.argmin(np.abs(t.column("log_x") - 10.0)))
    r = float(t.column("ratio")[k])
    finish(record_criterion, "criterion 5", [
        ("ratio at e^10", abs(r - 1.1) < 1e-9, f"{r:.12f}"),
        ("runtime", dt < 1.0, f"{dt:.3f}s"),
    ])


def test_criterion_06_cevm_table(record_criterion):
    t, dt0 = run("c06_cevm_table")
    cases = list(t.column("case"))
    same = cases == list(t.column("expected_case"))
    idx = np.allclose(t.column("index"), t.column("expected_index"), rtol=0, atol=1e-12)
    parts = [("table", len(cases) == 12 and same and idx, f"{len(cases)} rows")]
    total = dt0
    for name, target in (("c06_cevm_case1", -0.5), ("c06_cevm_case4", -1.0)):
        s, dt = run(name)
        total += dt
        slope = s.checks[0].value
        parts.append((f"slope {s.metadata['case']}", abs(slope - target) <= 0.07, f"{slope:.4f} vs {target}"))
    parts.append(("runtime", total < 180.0, f"{total:.1f}s"))
    finish(record_criterion, "criterion 6", parts)


def test_criterion_07_beta_min(record_criterion):
    t, dt = run("c07_beta_min")
    ys, rs = t.column("y"), t.column("ratio")
    parts = [(f"y={y:g}", 0.85 <= r <= 1.15, f"{r:.4f}") for y, r in zip(ys, rs)]
    parts.append(("grid", sorted(ys.tolist()) == [1.0, 2.0, 4.0], ""))
    parts.append(("runtime", dt < 120.0, f"{dt:.1f}s"))
    finish(record_criterion, "criterion 7", parts)


def test_criterion_08_gev(record_criterion):
    t, dt = run("c08_gev")
    rows = [r for r in t.rows if r[0] == "gev_cdf_at_zero"]
    gev_err = max(abs(r[2] - math.exp(-1)) for r in rows)
    doa = t.check("doa_max_error").value
    finish(record_criterion, "criterion 8", [
        ("gev", len(rows) == 21 and gev_err <= 1e-12, f"{len(rows)} gammas, max err {gev_err:.1e}"),
        ("doa", doa < 2e-4, f"{doa:.2e}"),
        ("runtime", dt < 1.0, f"{dt:.3f}s"),
    ])


def test_criterion_09_transform_identities(record_criterion):
    shift, d1 = run("c09_shift")
    arc, d2 = run("c09_arcsine")
    sc, d3 = run("c09_semicircle")
    cdf = shift.check("shift_cdf").value
    dens = arc.check("arcsine_density").value
    var = sc.check("variance")
    phis = {n: t.check("phi_additivity").value for n, t in (("shift", shift), ("arcsine", arc), ("semicircle", sc))}
    parts = [
        ("shift cdf", cdf < 1e-6, f"{cdf:.1e}"),
        ("arcsine density", dens < 1e-3, f"{dens:.1e}"),
        ("variance", abs(var.value - var.target) <= 1e-4, f"{var.value:.6f} vs {var.target:.6f}"),
    ]
    parts += [(f"phi {n}", v < 1e-8, f"{v:.1e}") for n, v in phis.items()]
    parts.append(("runtime", d1 + d2 + d3 < 60.0, f"{d1 + d2 + d3:.1f}s"))
    finish(record_criterion, "criterion 9", parts)


def _remainder_parts(t, label, const_checks):
    parts = []
    gap = t.check("phi_equiv").value
    parts.append((f"{label} phi", gap < 0.05, f"{gap:.3f}"))
    for key in const_checks:
        c = t.check(key)
        rel = abs(c.value / c.target - 1.0)
        parts.append((f"{label} {key}", rel < 0.02, f"{c.value:.4f} vs {c.target:.4f}"))
    return parts


def test_criterion_10_remainder_constants(record_criterion):
    p15, d1 = run("c10_pareto15")
    p05, d2 = run("c10_pareto05")
    p20, d3 = run("c10_pareto20")
    parts = _remainder_parts(p15, "pareto(1.5)", ["imag_const", "real_const"])
    parts += _remainder_parts(p05, "pareto(0.5)", ["imag_const", "real_const"])
    parts += _remainder_parts(p20, "pareto(2.0)", ["real_const"])
    sweep = [c for c in p20.checks if c.name.startswith("upper_bound")]
    parts.append(("pareto(2.0) beta sweep", len(sweep) == 3 and all(c.verdict == Verdict.PASS for c in sweep),
                  ",".join(c.name[12:-1] for c in sweep)))
    parts.append(("runtime", d1 + d2 + d3 < 120.0, f"{d1 + d2 + d3:.1f}s"))
    finish(record_criterion, "criterion 10", parts)


def test_criterion_11_stieltjes(record_criterion):
    leb, d1 = run("c11_lebesgue")
    par, d2 = run("c11_pareto1")
    err = float(np.max(np.abs(leb.column("ratio") - 1.0)))
    k = int(np.argmin(np.abs(par.column("y") - 1e3)))
    r = float(par.column("ratio")[k])
    finish(record_criterion, "criterion 11", [
        ("lebesgue", err <= 1e-10, f"{err:.1e}"),
        ("pareto(1) prop52", abs(r - 1.0) < 0.02, f"{r:.5f}"),
        ("runtime", d1 + d2 < 5.0, f"{d1 + d2:.2f}s"),
    ])


def test_criterion_12_free_subexp(record_criterion):
    t, dt = run("c12_free_subexp")
    s1, ratio, jump = t.column("survival_1"), t.column("ratio"), t.column("jump_ratio")
    in_window = bool(np.all((s1 >= 1e-4 * (1 - 1e-12)) & (s1 <= 1e-3 * (1 + 1e-12))))
    worst = float(np.max(np.abs(ratio - 1.0)))
    worst_j = float(np.max(np.abs(jump - 1.0)))
    dist = np.abs(ratio - 1.0)
    defect = abs(t.check("mass_defect").value)
    finish(record_criterion, "criterion 12", [
        ("window", in_window, f"{s1.max():.1e}..{s1.min():.1e}"),
        ("ratio band", worst <= 0.15, f"ratio in [{ratio.min():.3f}, {ratio.max():.3f}]"),
        ("jump band", worst_j <= 0.15, f"[{jump.min():.3f}, {jump.max():.3f}]"),
        ("monotone", bool(np.all(np.diff(dist) <= 0)), ""),
        ("mass defect", defect < 1e-4, f"{defect:.1e}"),
        ("runtime", dt < 300.0, f"{dt:.1f}s"),
    ])


def test_criterion_13_class_containment(record_criterion):
    from heavytail import tail_models
    t, dt = run("c13_classes")
    families = {m.split("(")[0] for m in t.column("model")}
    builtin = set(tail_models.FAMILIES) - {"grid_density"} | {"uniform"}
    parts = [
        ("containment", t.check("containment").verdict == Verdict.PASS, t.check("containment").note or "no violations"),
        ("coverage", builtin <= families, ",".join(sorted(families))),
    ]
    for c in t.checks:
        if c.name.startswith("dominated_sup"):
            parts.append((c.name[14:-1], abs(c.value / c.target - 1.0) < 0.01, f"{c.value:.6f} vs {c.target:.6f}"))
    parts.append(("runtime", dt < 60.0, f"{dt:.1f}s"))
    finish(record_criterion, "criterion 13", parts)
