"""Command-line front end: scenario runs, convergence studies, plots.

Subcommands
    run <config>                 evaluate the configured problem, verify
                                 residual verdicts, write CSV + manifest
    converge <config> <check>    refinement trace (h, sup-residual, order)
    plot <csv[,csv...]> <out>    |residual| vs t on a log axis, SVG output
    mlf <alpha> <beta> <re> <im> evaluate E_{alpha,beta} by both algorithms

Configs are strict JSON: unknown keys are errors, complex numbers are
written as [re, im] pairs.  Identical configs produce byte-identical CSV
files; wall-clock data goes only to the manifest.  The environment
variable FRACIMPULSE_OUTPUT_DIR overrides the configured output
directory.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .caputo import Convention
from .errors import (
    CheckFailed,
    CheckUnknown,
    ConfigInvalid,
    DataMalformed,
    FracimpulseError,
    PoleProximity,
)
from .mlf import MLArgs, contour_params_for, mlf_contour, mlf_series
from .resolvent import OperatorSpec
from .solutions import (
    AffineImpulse,
    CallbackForcing,
    ConstantJump,
    ImpulsiveProblem,
    PolynomialForcing,
    eval_pullback_solution,
    eval_restart_solution,
    eval_shifted_solution,
)
from .verifier import check_generator_identities, residual_report

CSV_HEADER = "t,piece,re_x,im_x,re_res,im_res,convention"

_EVALUATORS = {
    "restart": eval_restart_solution,
    "shifted": eval_shifted_solution,
    "pullback": eval_pullback_solution,
}
_CONVENTIONS = {c.value: c for c in Convention}
_VERDICTS = ("vanishes_under_refinement", "bounded_away_from_zero",
             "inconclusive")

# names accepted by `converge`; generator checks ignore the impulses
_CONVERGE_CHECKS = ("state", "forcing", "restart", "shifted", "pullback")


# ---------------------------------------------------------------------------
# strict config parsing
# ---------------------------------------------------------------------------

def _require_keys(obj, where, required, optional=()):
    if not isinstance(obj, dict):
        raise ConfigInvalid(f"{where}: expected an object")
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigInvalid(f"{where}.{key}: unknown key")
    for key in required:
        if key not in obj:
            raise ConfigInvalid(f"{where}.{key}: missing required key")


def _as_real(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigInvalid(f"{where}: expected a number")
    return float(value)


def _as_complex(value, where) -> complex:
    # plain reals are accepted; complex values are [re, im] pairs
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in value)):
        return complex(value[0], value[1])
    raise ConfigInvalid(f"{where}: expected a number or [re, im] pair")


def _as_int(value, where, lo, hi) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigInvalid(f"{where}: expected an integer")
    if not lo <= value <= hi:
        raise ConfigInvalid(f"{where}: must be in [{lo}, {hi}]")
    return value


def _as_state(value, where, dim):
    """A state vector: scalar-shaped for dim 1, else a list of dim entries."""
    if dim == 1:
        return _as_complex(value, where)
    if not isinstance(value, list) or len(value) != dim:
        raise ConfigInvalid(f"{where}: expected a list of {dim} entries")
    return np.array([_as_complex(v, f"{where}[{i}]")
                     for i, v in enumerate(value)])


def _parse_operator(value, where):
    if isinstance(value, dict):
        _require_keys(value, where, required=("matrix",))
        rows = value["matrix"]
        if not isinstance(rows, list) or not rows:
            raise ConfigInvalid(f"{where}.matrix: expected a list of rows")
        mat = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != len(rows):
                raise ConfigInvalid(f"{where}.matrix[{i}]: expected "
                                    f"{len(rows)} entries")
            mat.append([_as_complex(v, f"{where}.matrix[{i}][{j}]")
                        for j, v in enumerate(row)])
        op = OperatorSpec.from_matrix(np.array(mat))
        if not op.diagonalizable:
            raise ConfigInvalid(f"{where}.matrix: not diagonalizable within "
                                "tolerance; the evaluators require a "
                                "diagonalizable operator")
        return op
    return OperatorSpec.from_scalar(_as_complex(value, where))


# restricted namespace for expression forcings; numpy functions keep the
# callable vectorizable over node arrays
_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "sinh": np.sinh,
    "cosh": np.cosh, "tanh": np.tanh, "arctan": np.arctan, "pi": math.pi,
    "e": math.e,
}


def _parse_forcing(value, where, dim):
    _require_keys(value, where, required=("kind",),
                  optional=("value", "slope", "offset", "coeffs", "expr"))
    kind = value.get("kind")
    allowed = {"zero": (), "constant": ("value",), "linear": ("slope", "offset"),
               "polynomial": ("coeffs",), "expression": ("expr",)}
    if not isinstance(kind, str) or kind not in allowed:
        raise ConfigInvalid(f"{where}.kind: expected one of "
                            f"{sorted(allowed)}, got {kind!r}")
    for key in value:
        if key != "kind" and key not in allowed[kind]:
            raise ConfigInvalid(f"{where}.{key}: not a field of "
                                f"kind {kind!r}")
    if kind == "zero":
        return PolynomialForcing.zero(dim)
    if kind == "constant":
        if "value" not in value:
            raise ConfigInvalid(f"{where}.value: missing required key")
        return PolynomialForcing.constant(_as_state(value["value"],
                                                    f"{where}.value", dim))
    if kind == "linear":
        if "slope" not in value:
            raise ConfigInvalid(f"{where}.slope: missing required key")
        slope = _as_state(value["slope"], f"{where}.slope", dim)
        offset = (_as_state(value["offset"], f"{where}.offset", dim)
                  if "offset" in value else (0j if dim == 1
                                             else np.zeros(dim, dtype=complex)))
        return PolynomialForcing.linear(slope=slope, offset=offset)
    if kind == "polynomial":
        coeffs = value.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigInvalid(f"{where}.coeffs: expected a nonempty list")
        rows = [_as_state(c, f"{where}.coeffs[{q}]", dim)
                for q, c in enumerate(coeffs)]
        return PolynomialForcing(np.array(rows))
    # expression
    expr = value.get("expr")
    if not isinstance(expr, str) or not expr:
        raise ConfigInvalid(f"{where}.expr: expected a nonempty string")
    if dim != 1:
        raise ConfigInvalid(f"{where}.expr: expression forcing supports "
                            "scalar problems only")
    try:
        code = compile(expr, where, "eval")
    except SyntaxError as exc:
        raise ConfigInvalid(f"{where}.expr: {exc.msg}") from exc
    for name in code.co_names:
        if name not in _EXPR_NAMES and name != "t":
            raise ConfigInvalid(f"{where}.expr: unknown name {name!r}")

    def fn(t, _code=code):
        return eval(_code, {"__builtins__": {}},
                    dict(_EXPR_NAMES, t=t))

    return CallbackForcing(fn)


def _parse_impulse(value, where, dim):
    if not isinstance(value, dict) or len(value) != 1:
        raise ConfigInvalid(f"{where}: expected an object with exactly one "
                            "of the keys 'jump' or 'affine'")
    if "jump" in value:
        return ConstantJump(_as_state(value["jump"], f"{where}.jump", dim))
    if "affine" in value:
        spec = value["affine"]
        _require_keys(spec, f"{where}.affine", required=("matrix",),
                      optional=("offset",))
        b = spec["matrix"]
        if dim == 1:
            bmat = _as_complex(b, f"{where}.affine.matrix")
        else:
            if not isinstance(b, list) or len(b) != dim:
                raise ConfigInvalid(f"{where}.affine.matrix: expected "
                                    f"{dim} rows")
            bmat = np.array([[_as_complex(v, f"{where}.affine.matrix[{i}][{j}]")
                              for j, v in enumerate(row)]
                             for i, row in enumerate(_check_rows(b, dim, where))])
        offset = (_as_state(spec["offset"], f"{where}.affine.offset", dim)
                  if "offset" in spec else (0j if dim == 1
                                            else np.zeros(dim, dtype=complex)))
        return AffineImpulse(bmat, offset)
    raise ConfigInvalid(f"{where}: expected 'jump' or 'affine'")


def _check_rows(rows, dim, where):
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise ConfigInvalid(f"{where}.affine.matrix[{i}]: expected "
                                f"{dim} entries")
    return rows


class ScenarioConfig:
    """Validated run description: the problem plus run/output options."""

    def __init__(self, problem, evaluators, conventions, expect, grid,
                 base, levels, tolerance, outdir, formats):
        self.problem = problem
        self.evaluators = evaluators
        self.conventions = conventions
        self.expect = expect
        self.grid = grid
        self.base = base
        self.levels = levels
        self.tolerance = tolerance
        self.outdir = outdir
        self.formats = formats


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigInvalid(f"{path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") \
            from exc

    _require_keys(doc, "config", required=("problem",),
                  optional=("run", "output"))
    prob = doc["problem"]
    _require_keys(prob, "problem",
                  required=("alpha", "operator", "x0", "horizon"),
                  optional=("forcing", "impulse_times", "impulses"))

    alpha = _as_real(prob["alpha"], "problem.alpha")
    if not 0.0 < alpha < 1.0:
        raise ConfigInvalid("problem.alpha: must satisfy 0 < alpha < 1")
    op = _parse_operator(prob["operator"], "problem.operator")
    dim = op.dim
    x0 = _as_state(prob["x0"], "problem.x0", dim)
    horizon = _as_real(prob["horizon"], "problem.horizon")
    if horizon <= 0.0:
        raise ConfigInvalid("problem.horizon: must be positive")

    times_raw = prob.get("impulse_times", [])
    if not isinstance(times_raw, list):
        raise ConfigInvalid("problem.impulse_times: expected a list")
    times = tuple(_as_real(t, f"problem.impulse_times[{k}]")
                  for k, t in enumerate(times_raw))
    for k, t in enumerate(times):
        if not 0.0 < t < horizon:
            raise ConfigInvalid(f"problem.impulse_times[{k}]: must lie "
                                "strictly between 0 and the horizon")
        if k and t <= times[k - 1]:
            raise ConfigInvalid(f"problem.impulse_times[{k}]: must be "
                                "strictly increasing")
    maps_raw = prob.get("impulses", [])
    if not isinstance(maps_raw, list):
        raise ConfigInvalid("problem.impulses: expected a list")
    if len(maps_raw) != len(times):
        raise ConfigInvalid("problem.impulses: need exactly one map per "
                            f"impulse time ({len(times)}), got {len(maps_raw)}")
    maps = tuple(_parse_impulse(m, f"problem.impulses[{k}]", dim)
                 for k, m in enumerate(maps_raw))

    forcing = (_parse_forcing(prob["forcing"], "problem.forcing", dim)
               if "forcing" in prob else PolynomialForcing.zero(dim))

    try:
        problem = ImpulsiveProblem(alpha=alpha, op=op, forcing=forcing,
                                   x0=x0, impulse_times=times,
                                   impulse_maps=maps, horizon=horizon)
    except ValueError as exc:
        raise ConfigInvalid(f"problem: {exc}") from exc

    run = doc.get("run", {})
    _require_keys(run, "run", required=(),
                  optional=("evaluators", "conventions", "expect", "grid",
                            "base", "levels", "tolerance"))
    ev_names = run.get("evaluators", ["restart", "shifted", "pullback"])
    if not isinstance(ev_names, list) or not ev_names:
        raise ConfigInvalid("run.evaluators: expected a nonempty list")
    for i, name in enumerate(ev_names):
        if name not in _EVALUATORS:
            raise ConfigInvalid(f"run.evaluators[{i}]: expected one of "
                                f"{sorted(_EVALUATORS)}, got {name!r}")
    if len(set(ev_names)) != len(ev_names):
        raise ConfigInvalid("run.evaluators: duplicate entries")
    evaluators = tuple(ev_names)
    conv_names = run.get("conventions", ["formula_extension"])
    if not isinstance(conv_names, list) or not conv_names:
        raise ConfigInvalid("run.conventions: expected a nonempty list")
    conventions = []
    for i, name in enumerate(conv_names):
        if name not in _CONVENTIONS:
            raise ConfigInvalid(f"run.conventions[{i}]: expected one of "
                                f"{sorted(_CONVENTIONS)}, got {name!r}")
        conventions.append(_CONVENTIONS[name])
    if len(set(conv_names)) != len(conv_names):
        raise ConfigInvalid("run.conventions: duplicate entries")
    expect = run.get("expect", {})
    if not isinstance(expect, dict):
        raise ConfigInvalid("run.expect: expected an object")
    for name, verdict in expect.items():
        if name not in _EVALUATORS:
            raise ConfigInvalid(f"run.expect.{name}: not an evaluator name")
        if name not in evaluators:
            raise ConfigInvalid(f"run.expect.{name}: evaluator not in "
                                "run.evaluators")
        if verdict not in _VERDICTS:
            raise ConfigInvalid(f"run.expect.{name}: expected one of "
                                f"{_VERDICTS}, got {verdict!r}")
    grid = _as_int(run.get("grid", 48), "run.grid", 2, 100000)
    base = _as_int(run.get("base", 128), "run.base", 8, 1 << 20)
    levels = _as_int(run.get("levels", 4), "run.levels", 2, 10)
    tolerance = _as_real(run.get("tolerance", 1e-10), "run.tolerance")
    if tolerance <= 0.0:
        raise ConfigInvalid("run.tolerance: must be positive")

    out = doc.get("output", {})
    _require_keys(out, "output", required=(), optional=("directory",
                                                        "formats"))
    outdir = out.get("directory", "runs")
    if not isinstance(outdir, str) or not outdir:
        raise ConfigInvalid("output.directory: expected a nonempty string")
    fmt_names = out.get("formats", ["csv"])
    if not isinstance(fmt_names, list):
        raise ConfigInvalid("output.formats: expected a list")
    for i, fmt in enumerate(fmt_names):
        if fmt not in ("csv", "svg"):
            raise ConfigInvalid(f"output.formats[{i}]: expected 'csv' or "
                                f"'svg', got {fmt!r}")
    if "csv" not in fmt_names:
        raise ConfigInvalid("output.formats: 'csv' is required")
    formats = tuple(fmt_names)

    return ScenarioConfig(problem, evaluators, conventions, expect, grid,
                          base, levels, tolerance, outdir, formats)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    # write-to-temp then rename so readers never see partial files
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _resolve_outdir(cfg: ScenarioConfig) -> str:
    return os.environ.get("FRACIMPULSE_OUTPUT_DIR", cfg.outdir)


def _csv_text(times, pieces, xs, res, convention: str) -> str:
    lines = [CSV_HEADER]
    for t, p, x, r in zip(times, pieces, xs, res):
        lines.append(",".join((_fmt(t), str(int(p)), _fmt(x.real),
                               _fmt(x.imag), _fmt(r.real), _fmt(r.imag),
                               convention)))
    return "\n".join(lines) + "\n"


def _grid_times(problem, grid: int) -> np.ndarray:
    """Per-piece sample times: the right-closed uniform grid, so each
    impulse time appears once, carrying the left-limit values."""
    edges = (0.0,) + tuple(problem.impulse_times) + (problem.horizon,)
    blocks = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        js = np.arange(1, grid + 1) / grid
        blocks.append(lo + js * (hi - lo))
    return np.concatenate(blocks)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def run_scenario(path: str) -> int:
    cfg = load_config(path)
    problem = cfg.problem
    outdir = _resolve_outdir(cfg)
    os.makedirs(outdir, exist_ok=True)
    with open(path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()

    times = _grid_times(problem, cfg.grid)
    trajectories = {}
    for name in cfg.evaluators:
        trajectories[name] = _EVALUATORS[name](problem)

    checks = []
    failures = []
    for name in cfg.evaluators:
        traj = trajectories[name]
        for conv in cfg.conventions:
            started = time.perf_counter()
            rep = residual_report(problem, traj, conv, check_times=times,
                                  base=cfg.base, levels=cfg.levels)
            elapsed = time.perf_counter() - started
            nodes = np.asarray(rep.nodes, dtype=float)
            pieces = [traj.piece_index(t) for t in nodes]
            xs = np.array([traj.value(t) for t in nodes])
            res = np.asarray(rep.residuals)
            written = []
            if xs.ndim == 1:
                fname = f"{name}_{conv.value}.csv"
                _atomic_write(os.path.join(outdir, fname),
                              _csv_text(nodes, pieces, xs, res, conv.value))
                written.append(fname)
            else:
                # one file per component keeps the flat CSV layout
                for j in range(xs.shape[1]):
                    fname = f"{name}_{conv.value}_c{j}.csv"
                    _atomic_write(os.path.join(outdir, fname),
                                  _csv_text(nodes, pieces, xs[:, j],
                                            res[:, j], conv.value))
                    written.append(fname)
            checks.append({"name": f"{name}_{conv.value}",
                           "files": written,
                           "seconds": round(elapsed, 6),
                           "verdict": rep.verdict.value,
                           "sup_norm": rep.sup_norm,
                           "err_estimate": rep.err_estimate})
            print(f"{name} {conv.value}: {rep.verdict.value} "
                  f"sup={rep.sup_norm:.3e} err={rep.err_estimate:.3e}")
        expected = cfg.expect.get(name)
        if expected is not None:
            got = next(c["verdict"] for c in checks
                       if c["name"] == f"{name}_{cfg.conventions[0].value}")
            if got != expected:
                failures.append(f"{name}: expected {expected}, got {got}")

    # jump-condition audit: exact by construction, so any gap above the
    # configured tolerance is a real defect
    jump_gaps = {}
    for name in cfg.evaluators:
        traj = trajectories[name]
        worst = 0.0
        for k, tk in enumerate(problem.impulse_times):
            jump = (np.asarray(traj.right_values[k])
                    - np.asarray(traj.left_values[k]))
            applied = problem.impulse_maps[k](traj.left_values[k])
            gap = np.max(np.abs(np.atleast_1d(jump - np.asarray(applied))))
            worst = max(worst, float(gap))
        jump_gaps[name] = worst
        if worst > cfg.tolerance:
            failures.append(f"{name}: jump gap {worst:.3e} above tolerance "
                            f"{cfg.tolerance:.3e}")

    if "svg" in cfg.formats:
        for conv in cfg.conventions:
            suffix = f"_{conv.value}.csv"
            fnames = [f for c in checks for f in c["files"]
                      if f.endswith(suffix) or f"_{conv.value}_c" in f]
            if fnames:
                out = os.path.join(outdir, f"residuals_{conv.value}.svg")
                export_plot([os.path.join(outdir, f) for f in fnames], out)

    manifest = {
        "config_sha256": digest,
        "version": __version__,
        "checks": checks,
        "jump_gaps": jump_gaps,
        "expect_ok": not failures,
    }
    _atomic_write(os.path.join(outdir, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    if failures:
        for line in failures:
            print(f"check failed: {line}", file=sys.stderr)
        raise CheckFailed("; ".join(failures))
    print(f"manifest: {os.path.join(outdir, 'manifest.json')}")
    return 0


# ---------------------------------------------------------------------------
# converge
# ---------------------------------------------------------------------------

def convergence_study(path: str, check: str) -> int:
    cfg = load_config(path)
    problem = cfg.problem
    if check not in _CONVERGE_CHECKS:
        raise CheckUnknown(f"unknown check {check!r}; expected one of "
                           f"{_CONVERGE_CHECKS}")
    if check in ("state", "forcing"):
        state_rep, forcing_rep = check_generator_identities(
            problem.alpha, problem.op, problem.x0_vector(),
            horizon=problem.horizon, base=cfg.base, levels=cfg.levels)
        rep = state_rep if check == "state" else forcing_rep
    else:
        traj = _EVALUATORS[check](problem)
        rep = residual_report(problem, traj, Convention.FORMULA_EXTENSION,
                              base=cfg.base, levels=cfg.levels)

    # sup-norms at roundoff level carry no rate information
    floor = 64.0 * np.finfo(float).eps * max(rep.scale, 1e-300)
    rows = []
    prev = None
    for h, sup in rep.trace:
        if prev is None or sup <= floor or prev <= floor or sup == 0.0:
            order = None
        else:
            order = math.log2(prev / sup)
        rows.append((h, sup, order))
        prev = sup

    print(f"check {check}: verdict {rep.verdict.value}")
    print(f"{'h':>14} {'sup_residual':>16} {'order':>8}")
    for h, sup, order in rows:
        tail = "n/a" if order is None else f"{order:.3f}"
        print(f"{h:14.6e} {sup:16.6e} {tail:>8}")

    outdir = _resolve_outdir(cfg)
    os.makedirs(outdir, exist_ok=True)
    lines = ["h,sup_residual,observed_order"]
    lines += [f"{_fmt(h)},{_fmt(sup)},"
              f"{'' if order is None else _fmt(order)}"
              for h, sup, order in rows]
    out = os.path.join(outdir, f"converge_{check}.csv")
    _atomic_write(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def _read_csv(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataMalformed(f"{path}: {exc.strerror or exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise DataMalformed(f"{path}:1: header must be '{CSV_HEADER}'")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise DataMalformed(f"{path}:{i}: expected 7 fields")
        try:
            rows.append((float(parts[0]), int(parts[1]), float(parts[2]),
                         float(parts[3]), float(parts[4]), float(parts[5]),
                         parts[6]))
        except ValueError as exc:
            raise DataMalformed(f"{path}:{i}: {exc}") from exc
    return rows


def export_plot(csv_paths, out_path: str) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    impulse_marks = set()
    any_curve = False
    for path in csv_paths:
        rows = _read_csv(path)
        if not rows:
            continue
        ts = np.array([r[0] for r in rows])
        mags = np.array([math.hypot(r[4], r[5]) for r in rows])
        # log axis cannot show exact zeros; clip at a representable floor
        mags = np.maximum(mags, 1e-300)
        label = os.path.splitext(os.path.basename(path))[0]
        ax.semilogy(ts, mags, label=label, linewidth=1.2)
        any_curve = True
        pieces = [r[1] for r in rows]
        for i in range(len(rows) - 1):
            if pieces[i + 1] != pieces[i]:
                impulse_marks.add(ts[i])
    for t in sorted(impulse_marks):
        ax.axvline(t, color="0.4", linestyle="--", linewidth=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("|residual|")
    if any_curve:
        ax.legend(fontsize=8)
    else:
        print("warning: no residual data to plot", file=sys.stderr)
    fig.tight_layout()
    directory = os.path.dirname(out_path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".svg")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg")
        os.replace(tmp, out_path)
    except BaseException:
        os.unlink(tmp)
        raise
    finally:
        plt.close(fig)
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# mlf
# ---------------------------------------------------------------------------

def mlf_query(alpha: float, beta: float, re: float, im: float) -> int:
    args = MLArgs(alpha, beta)
    z = complex(re, im)
    series = mlf_series(args, z)
    print(f"series  = {series.real:.15e} {series.imag:+.15e}j")
    try:
        params = contour_params_for(args, z)
        try:
            contour = mlf_contour(args, params, z)
        except PoleProximity:
            params = replace(params, node_count=2 * params.node_count)
            contour = mlf_contour(args, params, z)
    except FracimpulseError as exc:
        print(f"contour = failed ({exc})")
        return 1
    print(f"contour = {contour.real:.15e} {contour.imag:+.15e}j")
    print(f"|series - contour| = {abs(series - contour):.3e}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracimpulse",
        description="Evaluate and verify mild-solution formulas for "
                    "impulsive fractional evolution equations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured scenario")
    p_run.add_argument("config", help="path to a JSON scenario config")

    p_conv = sub.add_parser("converge", help="refinement trace for a check")
    p_conv.add_argument("config", help="path to a JSON scenario config")
    p_conv.add_argument("check", help="one of %s" % (_CONVERGE_CHECKS,))

    p_plot = sub.add_parser("plot", help="plot |residual| vs t from CSV")
    p_plot.add_argument("csv", help="CSV file, or comma-separated list")
    p_plot.add_argument("out", help="output SVG path")

    p_mlf = sub.add_parser("mlf", help="evaluate E_{alpha,beta}(z) twice")
    p_mlf.add_argument("alpha", type=float)
    p_mlf.add_argument("beta", type=float)
    p_mlf.add_argument("re", type=float)
    p_mlf.add_argument("im", type=float)

    ns = parser.parse_args(argv)
    try:
        if ns.command == "run":
            return run_scenario(ns.config)
        if ns.command == "converge":
            return convergence_study(ns.config, ns.check)
        if ns.command == "plot":
            return export_plot([p for p in ns.csv.split(",") if p], ns.out)
        return mlf_query(ns.alpha, ns.beta, ns.re, ns.im)
    except (ConfigInvalid, CheckUnknown, DataMalformed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CheckFailed:
        return 1
    except FracimpulseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
