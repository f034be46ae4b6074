"""Report assembly (full-precision JSON) and text rendering.

The text report is rendered from the JSON-compatible dict alone, so a saved
report re-renders to identical text.  Display rounding: values with
magnitude >= 1 get two decimals, smaller nonzero values three significant
figures, p-values three significant figures.
"""

from __future__ import annotations

import json
from collections import Counter

from .anova import Analysis
from .ingest import TransformSpec

SCHEMA_VERSION = 1

FACTOR_LABELS = {
    "A": "Intercept: A",
    "B": "Slope: B",
    "L": "Between-laboratory: L",
    "R": "Regression: R",
    "E": "Residual: E",
    "T": "Total: T",
}


class ReportError(ValueError):
    """A report file is missing or malformed."""


def fmt(v) -> str:
    if v is None:
        return ""
    if v == 0:
        return "0"
    if abs(v) >= 1:
        return f"{v:.2f}"
    return f"{v:#.3g}"


def fmt_p(p) -> str:
    return "" if p is None else f"{p:#.3g}"


def _rows(table):
    return [{"factor": r.factor, "S": r.S, "phi": r.phi, "V": r.V} for r in table.rows]


def build_report(analysis: Analysis, spec: TransformSpec, source: str | None = None) -> dict:
    a = analysis
    vc = a.components
    neg = vc.negative
    intercepts = a.effects.intercepts(a.overall)
    slopes = a.effects.slopes(a.overall)
    return {
        "schema": SCHEMA_VERSION,
        "study": {
            "source": source,
            "m": a.data.m,
            "n": a.data.n,
            "labs": list(a.data.labs),
            "x": a.design.x.tolist(),
            "S_xxL": a.design.S_xxL,
            "S_xxT": a.design.S_xxT,
            "transforms": spec.as_dict(),
        },
        "overall": {"a0_hat": a.overall.a0_hat, "b0_hat": a.overall.b0_hat},
        "labs": [
            {
                "lab": lab,
                "alpha": float(a.effects.alpha[i]),
                "beta": float(a.effects.beta[i]),
                "intercept": float(intercepts[i]),
                "slope": float(slopes[i]),
            }
            for i, lab in enumerate(a.data.labs)
        ],
        "alpha": a.detailed.alpha,
        "basic": _rows(a.basic),
        "detailed": _rows(a.detailed),
        "tests": [
            {
                "name": t.name,
                "numerator": t.numerator,
                "denominator": t.denominator,
                "F0": t.F0,
                "df1": t.df1,
                "df2": t.df2,
                "p_value": t.p_value,
                "significant": t.significant,
                "undefined_reason": t.undefined_reason,
            }
            for t in a.detailed.tests
        ],
        "components": {
            "sigma2_r": vc.sigma2_r,
            "sigma2_A": {"raw": vc.sigma2_A_raw, "truncated": vc.sigma2_A, "negative": neg["sigma2_A"]},
            "sigma2_B": {"raw": vc.sigma2_B_raw, "truncated": vc.sigma2_B, "negative": neg["sigma2_B"]},
            "sigma2_L": {"raw": vc.sigma2_L_raw, "truncated": vc.sigma2_L, "negative": neg["sigma2_L"]},
            "sigma2_R_repro": vc.sigma2_R_repro,
        },
        "profile": [{"x": x, "tau2": t} for x, t in a.profile.points],
        "warnings": list(a.warnings),
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def load_report(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            report = json.load(fh)
    except OSError as exc:
        raise ReportError(f"{path}: cannot read report ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: not valid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(report, dict) or report.get("schema") != SCHEMA_VERSION:
        raise ReportError(f"{path}: not a schema-{SCHEMA_VERSION} report")
    try:
        report["study"]["x"], report["study"]["n"], report["study"]["S_xxL"]
        report["components"]["sigma2_A"]["truncated"]
        report["components"]["sigma2_B"]["truncated"]
        report["components"]["sigma2_L"]["truncated"]
    except (KeyError, TypeError):
        raise ReportError(f"{path}: report is missing required fields") from None
    return report


def _table(headers, rows, align):
    widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(headers)]

    def line(cells):
        out = []
        for cell, w, a in zip(cells, widths, align):
            out.append(cell.ljust(w) if a == "<" else cell.rjust(w))
        return "  ".join(out).rstrip()

    sep = "-" * len(line(headers))
    return [line(headers), sep] + [line(r) for r in rows]


def _design_summary(x) -> str:
    counts = Counter(x)
    return ", ".join(f"{fmt(v)} (x{c})" for v, c in sorted(counts.items()))


def render_text(report: dict) -> str:
    st = report["study"]
    tr = st["transforms"]
    alpha = report["alpha"]
    out = []
    if st.get("source"):
        out.append(f"Study: {st['source']}")
    out.append(f"Laboratories m = {st['m']}, observations per laboratory n = {st['n']}")
    centered = ", centered" if tr["center_doses"] else ""
    out.append(f"Transforms: dose {tr['dose_transform']}{centered}; response {tr['response_transform']}")
    out.append(f"Design doses: {_design_summary(st['x'])}")
    out.append(f"S_xxL = {fmt(st['S_xxL'])}, S_xxT = {fmt(st['S_xxT'])}")
    out.append("")

    out.append("Estimated lines per laboratory")
    rows = [[lab["lab"], fmt(lab["intercept"]), fmt(lab["slope"])] for lab in report["labs"]]
    ov = report["overall"]
    rows.append(["overall", fmt(ov["a0_hat"]), fmt(ov["b0_hat"])])
    out += _table(["Lab", "Intercept", "Slope"], rows, "<>>")
    out.append("")

    out.append("Basic ANOVA table")
    rows = [[FACTOR_LABELS[r["factor"]], fmt(r["S"]), str(r["phi"]), fmt(r["V"])] for r in report["basic"]]
    out += _table(["Factor", "S", "phi", "V"], rows, "<>>>")
    out.append("")

    tests = {t["numerator"]: t for t in report["tests"]}
    out.append("Detailed ANOVA table")
    rows = []
    for r in report["detailed"]:
        t = tests.get(r["factor"])
        f0 = ""
        if t is not None:
            f0 = "undefined" if t["F0"] is None else fmt(t["F0"]) + ("*" if t["significant"] else "")
        rows.append([FACTOR_LABELS[r["factor"]], fmt(r["S"]), str(r["phi"]), fmt(r["V"]), f0])
    out += _table(["Factor", "S", "phi", "V", "F0"], rows, "<>>>>")
    out.append(f"* indicates significance at the {alpha * 100:g}% level")
    out.append("")

    out.append("F-tests")
    rows = []
    for t in report["tests"]:
        stat = f"V_{t['numerator']}/V_{t['denominator']}"
        if t["F0"] is None:
            rows.append([t["name"], stat, f"({t['df1']}, {t['df2']})", "undefined", "", ""])
        else:
            rows.append([t["name"], stat, f"({t['df1']}, {t['df2']})", fmt(t["F0"]),
                         fmt_p(t["p_value"]), "yes" if t["significant"] else "no"])
    out += _table(["Test", "Statistic", "df", "F0", "p", "Significant"], rows, "<<<>><")
    out.append("")

    c = report["components"]
    out.append("Precision estimates")
    rows = [
        ["repeatability", "sigma2_r", fmt(c["sigma2_r"]), ""],
        ["between-laboratory", "sigma2_L", fmt(c["sigma2_L"]["truncated"]), fmt(c["sigma2_L"]["raw"])],
        ["  intercept part", "sigma2_A", fmt(c["sigma2_A"]["truncated"]), fmt(c["sigma2_A"]["raw"])],
        ["  slope part", "sigma2_B", fmt(c["sigma2_B"]["truncated"]), fmt(c["sigma2_B"]["raw"])],
        ["reproducibility", "sigma2_R", fmt(c["sigma2_R_repro"]), ""],
    ]
    out += _table(["Quantity", "Symbol", "Estimate", "Raw"], rows, "<<>>")
    out.append("")

    out.append("Between-laboratory variance by dose, tau2(x) = sigma2_A + x^2 sigma2_B")
    rows = [[fmt(p["x"]), fmt(p["tau2"])] for p in report["profile"]]
    out += _table(["x", "tau2"], rows, ">>")

    if report["warnings"]:
        out.append("")
        out.append("Warnings")
        out += [f"  {w}" for w in report["warnings"]]
    return "\n".join(out) + "\n"
