"""Command-line experiment driver.

Verbs:
    gen     build a model file from a topology spec
    run     run an algorithm on a model, writing trace/state/summary artifacts
    exact   exact enumeration reference for a small model
    report  turn trace CSVs into a residual/bound report with invariant checks

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 size-guard error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bp as bp_mod
from . import meanfield as mf_mod
from .ellipsoid import (FeasibilityError, ellipsoid_progress_csv,
                        solve_bethe_exponential, solve_mf_exponential)
from .model import (DomainError, IsingModel, ModelError, generate_topology,
                    load_model, model_hash, save_model, validate_ferromagnetic)
from .oracle import (SizeGuardError, exact_log_z, exact_result_from_csv,
                     exact_result_to_csv, transfer_matrix_log_z)
from .svgplot import plot_lines
from .trace import trace_from_csv, trace_meta, trace_to_csv

_ALGOS = ("mf", "bp", "ellipsoid_bethe", "ellipsoid_mf", "exact", "transfer_matrix")
_MONOTONE_SLACK = 1e-11
_BOUND_SLACK = 1e-9


class ConfigError(ValueError):
    """Bad command-line arguments or experiment configuration."""


@dataclass
class ExperimentConfig:
    """Fully specified experiment: model source, algorithm, and outputs."""

    model_path: str | None = None
    topology: str | None = None
    beta: float | None = None
    field: str = "0"
    seed: int = 0
    algo: str = "bp"
    init: str = "ones"
    steps: int = 10**6
    tol: float = 1e-10
    eps: float = 1e-8
    out: str | None = None
    plot: bool = False

    def validate(self):
        if (self.model_path is None) == (self.topology is None):
            raise ConfigError("provide exactly one of --model and --topology")
        if self.topology is not None and self.beta is None:
            raise ConfigError("--topology requires --beta")
        if self.algo not in _ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; choose from {_ALGOS}")
        if self.init not in ("ones", "zeros"):
            raise ConfigError("init must be 'ones' or 'zeros'")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be >= 0")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")


def _parse_field_spec(text: str):
    text = text.strip()
    if text.startswith("single:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("field spec 'single' needs single:<node>:<value>")
        try:
            return ("single", int(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"bad field spec {text!r}: {exc}") from exc
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad field spec {text!r} (use a number or single:i:v)") from exc


def _topology_kwargs(spec: str) -> dict:
    parts = spec.strip().split(":")
    kind = parts[0]
    try:
        if kind == "cycle" and len(parts) == 2:
            return {"kind": "cycle", "n": int(parts[1])}
        if kind == "grid" and len(parts) == 2:
            rows, cols = parts[1].lower().split("x")
            return {"kind": "grid", "rows": int(rows), "cols": int(cols)}
        if kind == "regular" and len(parts) == 3:
            return {"kind": "random_regular", "n": int(parts[1]), "degree": int(parts[2])}
        if kind == "tree" and len(parts) == 2:
            return {"kind": "random_tree", "n": int(parts[1])}
        if kind == "star" and len(parts) == 2:
            return {"kind": "star", "n": int(parts[1])}
    except ValueError as exc:
        raise ConfigError(f"bad topology spec {spec!r}: {exc}") from exc
    raise ConfigError(
        f"bad topology spec {spec!r} (use cycle:N, grid:RxC, regular:N:D, "
        "tree:N, or star:N)")


def build_model(config: ExperimentConfig) -> IsingModel:
    if config.model_path is not None:
        with open(config.model_path, encoding="utf-8") as fh:
            model = load_model(fh.read())
        return validate_ferromagnetic(model, allow_sign_flip=True)
    kwargs = _topology_kwargs(config.topology)
    return generate_topology(beta=config.beta, h_spec=_parse_field_spec(config.field),
                             seed=config.seed, **kwargs)


def _write(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _summary_text(pairs) -> str:
    return "\n".join(f"{k} {v}" for k, v in pairs) + "\n"


def _loglog_slope(ts, rs):
    """Least-squares slope of log r against log t; None with < 2 usable points."""
    xs, ys = [], []
    for t, r in zip(ts, rs):
        if t > 0 and r > 0 and math.isfinite(r):
            xs.append(math.log(t))
            ys.append(math.log(r))
    if len(xs) < 2:
        return None
    xs = np.array(xs)
    ys = np.array(ys)
    xc = xs - xs.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        return None
    return float(xc @ (ys - ys.mean()) / denom)


def _monotone_ok(values) -> bool:
    v = values[np.isfinite(values)]
    return bool(np.all(np.diff(v) >= -_MONOTONE_SLACK)) if v.size > 1 else True


def _bound_ok(trace, reference) -> bool:
    ok = True
    for k in range(len(trace.t)):
        t = int(trace.t[k])
        if t < 1 or not np.isfinite(trace.objective[k]):
            continue
        if reference - trace.objective[k] > trace.bound[k] + _BOUND_SLACK:
            ok = False
    return ok


def _run_iterative(config: ExperimentConfig, model: IsingModel, outdir: str) -> int:
    if config.algo == "mf":
        state, trace = mf_mod.mf_iterate(model, init=config.init,
                                         max_steps=config.steps, tol=config.tol)
        final_csv = "node,x\n" + "".join(
            f"{i},{state[i]:.17g}\n" for i in range(model.n))
        label = "objective"
    else:
        state, trace = bp_mod.bp_iterate(model, init=config.init,
                                         max_steps=config.steps, tol=config.tol)
        final_csv = bp_mod.messages_to_csv(model, state)
        label = "dual_bethe"
    meta = trace_meta(model, config.algo, config.init, config.tol)
    _write(os.path.join(outdir, "trace.csv"), trace_to_csv(trace, meta))
    _write(os.path.join(outdir, "final_state.csv"), final_csv)

    finite = np.isfinite(trace.objective)
    final_obj = float(trace.objective[finite][-1]) if finite.any() else float("nan")
    best_obj = float(trace.objective[finite].max()) if finite.any() else float("nan")
    pairs = [("model_hash", meta["model_hash"]), ("algo", config.algo),
             ("init", config.init), ("n", model.n), ("m", model.m),
             ("steps_used", trace.steps), ("converged", trace.converged),
             ("final_objective", f"{final_obj:.17g}"),
             ("objective_monotone", _monotone_ok(trace.objective)),
             ("bound_dominates", _bound_ok(trace, best_obj))]

    if config.algo == "bp":
        exact_path = os.path.join(outdir, "exact.csv")
        if os.path.exists(exact_path):
            with open(exact_path, encoding="utf-8") as fh:
                result, emeta = exact_result_from_csv(fh.read())
            if emeta.get("model_hash") == meta["model_hash"]:
                gap = abs(final_obj - result.log_z)
                pairs.append(("exact_log_z", f"{result.log_z:.17g}"))
                pairs.append(("dual_minus_log_z", f"{gap:.17g}"))

    if config.plot:
        _write(os.path.join(outdir, "objective.svg"), plot_lines(
            [(label, trace.t, trace.objective)],
            title=f"{config.algo} objective", xlabel="iteration", ylabel=label))
        ref_steps = max(2 * config.steps, 200000)
        if config.algo == "mf":
            x_ref, _ = mf_mod.mf_iterate(model, init=config.init,
                                         max_steps=ref_steps, tol=1e-13, record=False)
            ref_value = mf_mod.mf_objective(model, x_ref)
        else:
            nu_ref, _ = bp_mod.bp_iterate(model, init=config.init,
                                          max_steps=ref_steps, tol=1e-13, record=False)
            ref_value = bp_mod.dual_bethe(model, nu_ref)
        residual = ref_value - trace.objective
        _write(os.path.join(outdir, "residual.svg"), plot_lines(
            [("residual", trace.t, residual)],
            title=f"{config.algo} residual vs reference (long run, tol 1e-13)",
            xlabel="iteration", ylabel="objective residual", xlog=True, ylog=True))
        lo_t = max(1, trace.steps // 10)
        window = [(int(trace.t[k]), float(residual[k])) for k in range(len(trace.t))
                  if trace.t[k] >= lo_t]
        slope = _loglog_slope([w[0] for w in window], [w[1] for w in window])
        pairs.append(("reference_value", f"{ref_value:.17g}"))
        pairs.append(("reference_source", f"long_run(tol=1e-13,max_steps={ref_steps})"))
        if slope is not None:
            pairs.append(("residual_loglog_slope", f"{slope:.6g}"))

    _write(os.path.join(outdir, "summary.txt"), _summary_text(pairs))
    return 0


def _run_exact(model: IsingModel, outdir: str) -> int:
    result = exact_log_z(model)
    _write(os.path.join(outdir, "exact.csv"), exact_result_to_csv(result, model))
    _write(os.path.join(outdir, "summary.txt"), _summary_text([
        ("model_hash", model_hash(model)), ("algo", "exact"),
        ("n", model.n), ("m", model.m),
        ("log_z", f"{result.log_z:.17g}")]))
    print(f"log_z {result.log_z:.17g}")
    return 0


def _run_ellipsoid(config: ExperimentConfig, model: IsingModel, outdir: str) -> int:
    if config.algo == "ellipsoid_bethe":
        point, value, state = solve_bethe_exponential(model, config.eps,
                                                      full_output=True)
        final_csv = bp_mod.messages_to_csv(model, point)
    else:
        point, value, state = solve_mf_exponential(model, config.eps,
                                                   full_output=True)
        final_csv = "node,x\n" + "".join(
            f"{i},{point[i]:.17g}\n" for i in range(model.n))
    _write(os.path.join(outdir, "final_state.csv"), final_csv)
    steps = state.step if state is not None else 0
    if state is not None:
        _write(os.path.join(outdir, "progress.csv"), ellipsoid_progress_csv(state))
        if config.plot:
            rows = [(s, b) for s, _f, b, _v in state.progress if math.isfinite(b)]
            _write(os.path.join(outdir, "objective.svg"), plot_lines(
                [("best feasible", [r[0] for r in rows], [r[1] for r in rows])],
                title=f"{config.algo} incumbent", xlabel="step",
                ylabel="objective best"))
    _write(os.path.join(outdir, "summary.txt"), _summary_text([
        ("model_hash", model_hash(model)), ("algo", config.algo),
        ("eps", f"{config.eps:g}"), ("steps_used", steps),
        ("final_objective", f"{value:.17g}")]))
    print(f"value {value:.17g}")
    return 0


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment; writes artifacts into config.out and returns 0."""
    config.validate()
    if config.out is None:
        raise ConfigError("run needs --out <directory>")
    model = build_model(config)
    os.makedirs(config.out, exist_ok=True)
    if config.algo in ("mf", "bp"):
        return _run_iterative(config, model, config.out)
    if config.algo == "exact":
        return _run_exact(model, config.out)
    if config.algo == "transfer_matrix":
        value = transfer_matrix_log_z(model)
        _write(os.path.join(config.out, "summary.txt"), _summary_text([
            ("model_hash", model_hash(model)), ("algo", "transfer_matrix"),
            ("log_z", f"{value:.17g}")]))
        print(f"log_z {value:.17g}")
        return 0
    return _run_ellipsoid(config, model, config.out)


def emit_report(trace_texts, references=None) -> str:
    """Build a report from trace CSV texts sharing one model.

    The report contains per-iteration free-energy-density residuals against a
    per-algorithm reference (given, else the max recorded objective), theorem
    bound columns recomputed from the model norms in the trace headers, and a
    pass/fail matrix of the invariant checks. Deterministic for fixed inputs.
    """
    trace_texts = list(trace_texts)
    if not trace_texts:
        raise DomainError("report needs at least one trace")
    parsed = [trace_from_csv(text) for text in trace_texts]
    hashes = {meta.get("model_hash") for _, meta in parsed}
    if len(hashes) != 1 or None in hashes:
        raise DomainError(f"traces disagree on the model hash: {sorted(map(str, hashes))}")
    metas = [meta for _, meta in parsed]
    try:
        n = int(metas[0]["n"])
        norms_kw = {k: float(metas[0][k]) for k in ("j_l1", "h_l1", "j_linf")}
        norms_kw.update(m=int(metas[0]["m"]), n=n)
    except KeyError as exc:
        raise DomainError(f"trace header missing model metadata: {exc}") from exc
    from .model import ModelNorms

    norms = ModelNorms(**norms_kw)
    refs = {}
    for trace, _meta in parsed:
        vals = trace.objective[np.isfinite(trace.objective)]
        if vals.size:
            refs[trace.algo] = max(refs.get(trace.algo, -np.inf), float(vals.max()))
    ref_src = {algo: "trace_max" for algo in refs}
    for algo, value in (references or {}).items():
        refs[algo] = float(value)
        ref_src[algo] = "given"
    lines = [f"# model_hash {sorted(hashes)[0]}", f"# n {norms.n}", f"# m {norms.m}"]
    for algo in sorted(refs):
        lines.append(f"# reference {algo} {refs[algo]:.17g} source={ref_src[algo]}")
    body = []
    for k, (trace, _meta) in enumerate(parsed):
        tag = f"trace{k}({trace.algo})"
        if trace.algo == "mf":
            bound = mf_mod._bound_array(norms, trace.t)
        else:
            bound = bp_mod._bound_array(norms, trace.t)
        ref = refs.get(trace.algo)
        finite = np.isfinite(trace.objective)
        if not finite.any() or ref is None:
            lines.append(f"# check {tag} objective_monotone SKIP")
            lines.append(f"# check {tag} bound_dominates SKIP")
            continue
        mono = _monotone_ok(trace.objective)
        bok = True
        for i in range(len(trace.t)):
            if trace.t[i] < 1 or not finite[i]:
                continue
            if ref - trace.objective[i] > bound[i] + _BOUND_SLACK:
                bok = False
        lines.append(f"# check {tag} objective_monotone {'PASS' if mono else 'FAIL'}")
        lines.append(f"# check {tag} bound_dominates {'PASS' if bok else 'FAIL'}")
        lines.append(f"# check {tag} converged {'PASS' if trace.converged else 'FAIL'}")
        for i in range(len(trace.t)):
            if not finite[i]:
                continue
            resid = (ref - trace.objective[i]) / norms.n
            body.append(f"{k},{trace.algo},{int(trace.t[i])},"
                        f"{trace.objective[i]:.17g},{resid:.17g},{bound[i]:.17g}")
    lines.append("trace,algo,t,objective,density_residual,bound")
    lines.extend(body)
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_model_source(p):
    p.add_argument("--model", help="model file path")
    p.add_argument("--topology",
                   help="cycle:N | grid:RxC | regular:N:D | tree:N | star:N")
    p.add_argument("--beta", type=float, help="uniform coupling for --topology")
    p.add_argument("--field", default="0", help="field: a number or single:i:v")
    p.add_argument("--seed", type=int, default=0)


def _build_parser():
    parser = _Parser(prog="isingvi", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")

    p_gen = sub.add_parser("gen", help="generate a model file")
    _add_model_source(p_gen)
    p_gen.add_argument("--out", help="output model file (default stdout)")

    p_run = sub.add_parser("run", help="run an algorithm")
    _add_model_source(p_run)
    p_run.add_argument("--algo", default="bp", help="|".join(_ALGOS))
    p_run.add_argument("--init", default="ones", help="ones | zeros")
    p_run.add_argument("--steps", type=int, default=10**6)
    p_run.add_argument("--tol", type=float, default=1e-10)
    p_run.add_argument("--eps", type=float, default=1e-8)
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--plot", action="store_true",
                       help="write objective and residual SVG plots")

    p_exact = sub.add_parser("exact", help="exact enumeration reference")
    _add_model_source(p_exact)
    p_exact.add_argument("--out", help="output directory")

    p_rep = sub.add_parser("report", help="summarize trace CSVs")
    p_rep.add_argument("traces", nargs="*", help="trace CSV files")
    p_rep.add_argument("--out", help="output report file (default stdout)")
    return parser


def _config_from_args(args, algo=None) -> ExperimentConfig:
    return ExperimentConfig(
        model_path=args.model, topology=args.topology, beta=args.beta,
        field=args.field, seed=args.seed, algo=algo or args.algo,
        init=getattr(args, "init", "ones"), steps=getattr(args, "steps", 10**6),
        tol=getattr(args, "tol", 1e-10), eps=getattr(args, "eps", 1e-8),
        out=args.out, plot=getattr(args, "plot", False))


def _dispatch(args) -> int:
    if args.command == "gen":
        config = _config_from_args(args, algo="bp")
        if (config.model_path is None) == (config.topology is None):
            raise ConfigError("gen needs exactly one of --model and --topology")
        model = build_model(config)
        text = save_model(model)
        if args.out:
            _write(args.out, text)
        else:
            sys.stdout.write(text)
        return 0
    if args.command == "run":
        return run_experiment(_config_from_args(args))
    if args.command == "exact":
        config = _config_from_args(args, algo="exact")
        config.validate()
        if config.out is None:
            raise ConfigError("exact needs --out <directory>")
        model = build_model(config)
        os.makedirs(config.out, exist_ok=True)
        return _run_exact(model, config.out)
    if args.command == "report":
        if not args.traces:
            raise DomainError("report needs at least one trace file")
        texts = []
        for path in args.traces:
            with open(path, encoding="utf-8") as fh:
                texts.append(fh.read())
        text = emit_report(texts)
        if args.out:
            _write(args.out, text)
        for line in text.splitlines():
            if line.startswith("# check") or line.startswith("# reference"):
                print(line[2:])
        if not args.out:
            sys.stdout.write(text)
        return 0
    raise ConfigError("missing command (gen, run, exact, report)")


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return _dispatch(args)
    except SizeGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ModelError, DomainError, FeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
