"""Command-line interface: ``taskmarket sweep|verify-prop1|classify|metrics|panel``.

Exit codes are 0 on success, 1 on runtime failure and 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import config as cfgmod
from .assignment import AllDigitalError, InfeasibleTaskError
from .classifier import (
    BatchPlan,
    Category,
    Lexicon,
    Method,
    ScriptedClassifier,
    classify_batch,
    evaluate_accuracy,
)
from .cutoff import PROP1_THETAS, sweep_theta, verify_proposition1
from .econometrics import (
    DesignSpec,
    EstimationError,
    PanelDataset,
    SpecError,
    estimate_spec,
    significance_stars,
)
from .emit import atomic_write, line_panel, svg_document, write_csv
from .metrics import TABLE3_ROWS, TASKS, NotDistribution, TaskWeights, hhi, lag_series, \
    leave_one_out_mean, task_scores, winsorize
from .model import DIGITAL, ConfigError, DomainError, Mode, Occupation, executor_label
from .synthgen import generate_panel, manifest_json


EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _out_dir(args, cfg) -> Path:
    return Path(args.out_dir or cfg.get("out_dir") or ".")


# sweep ---------------------------------------------------------------------

def sweep_rows(table):
    kinds = table.kinds
    executors = kinds + (DIGITAL,)
    header = (["theta"] + [f"cutoff_{k.label}" for k in kinds]
              + [f"mass_{executor_label(e)}" for e in executors] + [f"share_{k.label}" for k in kinds])
    rows = []
    for r in table.rows:
        rows.append([r.theta] + [r.cutoffs.get(k) for k in kinds] + [r.mass[e] for e in executors]
                    + [r.shares.get(k) for k in kinds])
    return header, rows


def sweep_svg(table) -> str:
    thetas = [r.theta for r in table.rows]
    cut = [(k.label, thetas, [r.cutoffs.get(k) for r in table.rows]) for k in table.kinds]
    shares = [(k.label, thetas, [r.shares.get(k) for r in table.rows]) for k in table.kinds]
    shares.append(("digital mass", thetas, [r.mass[DIGITAL] for r in table.rows]))
    elements = line_panel(0, 0, 480, 320, "Cutoff z* by theta", "theta", cut)
    elements += line_panel(480, 0, 480, 320, "Hiring shares and digital mass", "theta", shares)
    return svg_document(960, 320, elements)


def cmd_sweep(args) -> int:
    cfg = cfgmod.load_config(args.config)
    econ = cfgmod.build_economy(cfg)
    section = cfg.get("sweep", {})
    thetas = cfgmod.sweep_thetas(section)
    kwargs = {}
    if "scan_points" in section:
        kwargs["scan_points"] = int(section["scan_points"])
    table = sweep_theta(econ, thetas, strict=bool(section.get("strict_regularity", False)), **kwargs)
    out = _out_dir(args, cfg)
    header, rows = sweep_rows(table)
    write_csv(out / "sweep.csv", header, rows)
    atomic_write(out / "sweep.svg", sweep_svg(table))
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep.svg'} ({len(rows)} rows)")
    return EXIT_OK


# verify-prop1 --------------------------------------------------------------

PROP1_HEADER = ["index", "lambda_m", "lambda_r", "lambda_a", "wage", "kappa_bar", "gamma", "rental",
                "z_first", "z_last", "monotone", "derivative_ok", "max_rel_error", "passed"]


def cmd_verify_prop1(args) -> int:
    cfg = cfgmod.load_config(args.config)
    section = cfg.get("prop1", {})
    seed = cfgmod.resolve_seed(args.seed, cfg)
    draws = args.draws if args.draws is not None else int(section.get("draws", 200))
    if draws < 0:
        raise UsageError("--draws must be nonnegative")
    thetas = section.get("thetas", list(PROP1_THETAS))
    mode = Mode(section.get("composition_mode", "raw"))
    report = verify_proposition1(draws, seed, thetas, mode, until_kept=bool(section.get("until_kept", True)))
    rows = []
    for rec in report.records:
        o, d = rec.occupation, rec.digital
        rows.append([rec.index, o.lambda_m, o.lambda_r, o.lambda_a, o.wage, d.kappa_bar, d.gamma, d.rental,
                     rec.cutoffs[0] if rec.cutoffs else None, rec.cutoffs[-1] if rec.cutoffs else None,
                     rec.monotone, rec.derivative_ok, rec.max_rel_error, rec.passed])
    out = _out_dir(args, cfg)
    write_csv(out / "prop1_report.csv", PROP1_HEADER, rows)
    if report.kept == 0:
        warn("no instances kept; the check passes vacuously")
    rejected = ", ".join(f"{k}={v}" for k, v in report.rejected.items()) or "none"
    print(f"seed={seed} drawn={report.draws} kept={report.kept} passed={report.passed} "
          f"max_rel_error={report.max_rel_error():.3g} rejected: {rejected}")
    return EXIT_OK if report.ok else EXIT_RUNTIME


# classify ------------------------------------------------------------------

def _read_titles(path: str) -> tuple[list[str], list[Category | None]]:
    """Titles (and optional ``label`` codes) from a CSV with a ``title``
    column, or from a plain file with one title per line."""
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read input {path}: {exc}") from None
    lines = text.splitlines()
    if not lines:
        return [], []
    first = next(csv.reader([lines[0]]))
    if "title" not in [c.strip() for c in first]:
        titles = [ln for ln in lines if ln.strip()]
        return titles, [None] * len(titles)
    titles, labels = [], []
    reader = csv.DictReader(io.StringIO(text))
    reader.fieldnames = [c.strip() for c in reader.fieldnames]
    for n, row in enumerate(reader, 2):
        titles.append(row["title"] or "")
        raw = (row.get("label") or "").strip()
        if raw and raw not in ("1", "2", "3", "4", "5"):
            raise UsageError(f"{path}:{n}: label must be a code 1-5")
        labels.append(Category(int(raw)) if raw else None)
    return titles, labels


def cmd_classify(args) -> int:
    cfg = cfgmod.load_config(args.config)
    section = cfg.get("classifier", {})
    src = args.input or section.get("input")
    if not src:
        raise UsageError("classify needs --input or classifier.input")
    titles, labels = _read_titles(src)
    lex_path = args.lexicon or section.get("lexicon")
    try:
        lex = Lexicon.load(lex_path) if lex_path else Lexicon.default()
    except (OSError, ValueError) as exc:
        raise UsageError(f"lexicon: {exc}") from None
    stub = args.stub or section.get("stub")
    plan = BatchPlan(int(section.get("batch_size", 30)), int(section.get("max_concurrency", 4)))
    results = classify_batch(titles, ScriptedClassifier.from_file(stub), lex, plan)
    out = _out_dir(args, cfg)
    rows = [[r.title, int(r.category) if r.category else None, r.category.label if r.category else None,
             r.method.value] for r in results]
    write_csv(out / "classified.csv", ["title", "category_code", "category_name", "method"], rows)
    counts = {m: sum(r.method is m for r in results) for m in Method}
    print(" ".join(f"{m.value}={c}" for m, c in counts.items()), file=sys.stderr)
    if labels and all(lab is not None for lab in labels):
        acc = evaluate_accuracy(list(zip(titles, labels)), results)
        write_csv(out / "accuracy.csv", ["method", "n", "correct", "unresolved", "accuracy"],
                  [[a.method, a.n, a.correct, a.unresolved, a.accuracy] for a in acc])
    return EXIT_OK


# metrics -------------------------------------------------------------------

def cmd_metrics(args) -> int:
    cfg = cfgmod.load_config(args.config)
    section = cfg.get("metrics", {})
    src = args.input or section.get("input")
    if not src:
        raise UsageError("metrics needs --input or metrics.input")
    try:
        frame = pd.read_csv(src)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read input {src}: {exc}") from None
    rows_table = {**TABLE3_ROWS, **section.get("rows", {})}
    try:
        tw = TaskWeights.default(cfgmod.crosswalk_from_config(section), rows_table)
    except KeyError as exc:
        raise ConfigError(f"metrics.crosswalk: unknown task row {exc}") from None
    kinds = [k for k in Occupation if f"count_{k.label}" in frame.columns]
    if not kinds:
        raise UsageError(f"{src}: no count_<occupation> columns found")
    ids = [c for c in ("firm", "year", "city") if c in frame.columns]
    counts = frame[[f"count_{k.label}" for k in kinds]].to_numpy(dtype=float)
    if np.isnan(counts).any():
        raise UsageError(f"{src}: missing posting counts")
    out_cols: dict[str, list] = {c: frame[c].tolist() for c in ids}
    total = counts.sum(axis=1)
    out_cols["total"] = total.tolist()
    for j, k in enumerate(kinds):
        out_cols[f"share_{k.label}"] = [c / t if t > 0 else None for c, t in zip(counts[:, j], total)]
    out_cols["hhi"] = [hhi(row / t) if t > 0 else None for row, t in zip(counts, total)]
    scores = [task_scores(tw, dict(zip(kinds, row))) for row in counts]
    for task in TASKS:
        out_cols[task] = [s[task] for s in scores]
    p_lo, p_hi = section.get("winsor", [0.01, 0.99])
    for col in section.get("winsorize_columns", []):
        if col not in out_cols:
            raise ConfigError(f"metrics.winsorize_columns: unknown column {col!r}")
        vals = out_cols[col]
        present = [v for v in vals if v is not None]
        clamped = iter(winsorize(present, p_lo, p_hi)) if present else iter(())
        out_cols[f"{col}_w"] = [next(clamped) if v is not None else None for v in vals]
    header = list(out_cols)
    out = _out_dir(args, cfg)
    write_csv(out / "metrics.csv", header, list(zip(*out_cols.values())))
    print(f"wrote {out / 'metrics.csv'} ({len(frame)} rows)")
    return EXIT_OK


# panel ---------------------------------------------------------------------

RESULT_HEADER = ["spec", "method", "term", "coef", "se", "t", "p", "stars", "n", "r2_within",
                 "first_stage_f", "weak_instrument", "dropped_rows"]


def add_instrument(frame: pd.DataFrame, inst: dict, source: str) -> str:
    """Append an instrument column and return its name."""
    kind = inst["type"]
    src = inst.get("source", source)
    if src not in frame.columns:
        raise SpecError(f"unknown column(s): {src}")
    if kind == "leave_one_out":
        group = inst.get("group", ["city", "year"])
        unit = inst.get("unit", "firm")
        for c in list(group) + [unit]:
            if c not in frame.columns:
                raise SpecError(f"unknown column(s): {c}")
        name = f"{src}_loo_{'_'.join(group)}"
        sub = frame[list(group) + [unit, src]].dropna()
        keys = list(zip(*(sub[g] for g in group))) if len(group) > 1 else list(sub[group[0]])
        loo = leave_one_out_mean(zip(keys, sub[unit], sub[src]))
        col = pd.Series(np.nan, index=frame.index)
        col.loc[sub.index] = [np.nan if v is None else v for _, _, v in loo]
        frame[name] = col
        return name
    lag = int(inst.get("lag", 1))
    unit, time = inst.get("unit", "firm"), inst.get("time", "year")
    for c in (unit, time):
        if c not in frame.columns:
            raise SpecError(f"unknown column(s): {c}")
    name = f"{src}_lag{lag}"
    values = {(u, int(t)): v for u, t, v in zip(frame[unit], frame[time], frame[src])}
    lagged = lag_series(values, lag)
    frame[name] = [lagged[(u, int(t))] for u, t in zip(frame[unit], frame[time])]
    frame[name] = frame[name].astype(float)
    return name


def build_specs(frame: pd.DataFrame, section: dict) -> list[DesignSpec]:
    specs = []
    for i, s in enumerate(section.get("specs", [])):
        name = s.get("name", f"spec{i + 1}")
        endog, instruments = None, ()
        if "instrument" in s:
            endog = s.get("endogenous", s["regressors"][0])
            instruments = (add_instrument(frame, s["instrument"], endog),)
        elif "endogenous" in s:
            raise SpecError(f"estimation.specs.{i}: endogenous given without instrument")
        specs.append(DesignSpec(s["outcome"], tuple(s["regressors"]), tuple(s.get("fe_factors", ())),
                                tuple(s.get("cluster", ())), endog, instruments, name))
    if not specs:
        raise ConfigError("estimation.specs: at least one spec is required")
    return specs


def cmd_panel_generate(args, cfg) -> int:
    seed = cfgmod.resolve_seed(args.seed, cfg, default=int(cfg.get("synth", {}).get("seed", 0)))
    synth = cfgmod.build_synth(cfg, seed)
    econ = cfgmod.build_economy(cfg) if "economy" in cfg else None
    frame, manifest = generate_panel(synth, econ)
    out = _out_dir(args, cfg)
    write_csv(out / "panel.csv", list(frame.columns), frame.itertuples(index=False, name=None))
    atomic_write(out / "manifest.json", manifest_json(manifest))
    print(f"wrote {out / 'panel.csv'} ({len(frame)} rows) and {out / 'manifest.json'}")
    return EXIT_OK


def cmd_panel_estimate(args, cfg) -> int:
    section = cfg.get("estimation", {})
    src = args.panel or section.get("panel")
    if not src:
        raise UsageError("panel estimate needs --panel or estimation.panel")
    try:
        panel = PanelDataset.read_csv(src)
    except (OSError, pd.errors.ParserError) as exc:
        raise UsageError(f"cannot read panel {src}: {exc}") from None
    frame = panel.frame.copy()
    specs = build_specs(frame, section)
    panel = PanelDataset(frame)
    rows = []
    for spec in specs:
        res = estimate_spec(panel, spec)
        pvals = res.pvalues()
        for term, b, se, p in zip(res.terms, res.coef, res.se, pvals):
            rows.append([spec.name, res.method, term, b, se, b / se if se > 0 else None, p,
                         significance_stars(p), res.n, res.r2_within, res.first_stage_f,
                         res.weak_instrument if res.method == "2sls" else None, res.dropped_rows])
        if res.weak_instrument:
            warn(f"{spec.name}: weak instrument (first-stage F={res.first_stage_f:.3g})")
    out = _out_dir(args, cfg)
    write_csv(out / "results.csv", RESULT_HEADER, rows)
    print(f"wrote {out / 'results.csv'} ({len(specs)} specs)")
    return EXIT_OK


def cmd_panel(args) -> int:
    cfg = cfgmod.load_config(args.config)
    if args.action == "generate":
        return cmd_panel_generate(args, cfg)
    return cmd_panel_estimate(args, cfg)


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taskmarket", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--out-dir", help="output directory (default: config out_dir or .)")

    p = sub.add_parser("sweep", help="cutoffs, demand and shares over a theta grid")
    common(p, config_required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-prop1", help="check the cutoff falls with theta on random instances")
    common(p)
    p.add_argument("--seed", type=int, help=f"RNG seed (fallback: ${cfgmod.SEED_ENV})")
    p.add_argument("--draws", type=int, help="instances to keep (default 200)")
    p.set_defaults(func=cmd_verify_prop1)

    p = sub.add_parser("classify", help="classify job titles (one per line, or CSV with a 'title' column)")
    common(p)
    p.add_argument("--input", help="titles file")
    p.add_argument("--stub", help="scripted external responses, one line per batch")
    p.add_argument("--lexicon", help="keyword lexicon file of code,phrase lines")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("metrics", help="shares, HHI and task scores from posting counts")
    common(p)
    p.add_argument("--input", help="CSV with count_<occupation> columns")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("panel", help="generate or estimate synthetic panels")
    p.add_argument("action", choices=["generate", "estimate"])
    common(p)
    p.add_argument("--seed", type=int, help=f"RNG seed for generate (fallback: ${cfgmod.SEED_ENV})")
    p.add_argument("--panel", help="panel CSV for estimate")
    p.set_defaults(func=cmd_panel)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, ConfigError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EstimationError, DomainError, AllDigitalError, InfeasibleTaskError, NotDistribution,
            RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
