"""Per-iteration traces of the variational iterations and their CSV form.

Trace CSVs carry a commented header with the model hash, sizes, and norms so
that downstream reports can recompute theorem bounds without the model file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DomainError


@dataclass
class IterationTrace:
    """Recorded trajectory of mf_iterate or bp_iterate, starting at t = 0.

    objective holds the mean-field objective (algo "mf") or the message-space
    dual (algo "bp"); step_inf is nan at t = 0; bound is the theorem error
    bound as a function of t alone (inf at t = 0). grad_l1 is mf-only.
    """

    algo: str
    t: np.ndarray
    objective: np.ndarray
    step_inf: np.ndarray
    bound: np.ndarray
    converged: bool
    grad_l1: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return int(self.t[-1])


_COLUMNS = {
    "mf": ("t", "objective", "step_inf", "grad_l1", "bound"),
    "bp": ("t", "dual_bethe", "step_inf", "bound_thm2"),
}


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def trace_to_csv(trace: IterationTrace, meta: dict | None = None) -> str:
    """Serialize a trace; meta entries become leading '# key value' lines."""
    if trace.algo not in _COLUMNS:
        raise DomainError(f"unknown trace algo {trace.algo!r}")
    lines = []
    meta = dict(meta or {})
    meta.setdefault("algo", trace.algo)
    meta.setdefault("converged", trace.converged)
    for key in sorted(meta):
        lines.append(f"# {key} {meta[key]}")
    lines.append(",".join(_COLUMNS[trace.algo]))
    if trace.algo == "mf":
        grad = trace.grad_l1 if trace.grad_l1 is not None else np.full(len(trace.t), np.nan)
        cols = (trace.objective, trace.step_inf, grad, trace.bound)
    else:
        cols = (trace.objective, trace.step_inf, trace.bound)
    for k in range(len(trace.t)):
        row = [str(int(trace.t[k]))] + [_fmt(c[k]) for c in cols]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str) -> tuple[IterationTrace, dict]:
    """Parse trace_to_csv output; returns the trace and its meta dict."""
    meta = {}
    rows = []
    header = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].strip().split(None, 1)
            if len(parts) == 2:
                meta[parts[0]] = parts[1]
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(line.split(","))
    if header is None:
        raise DomainError("trace CSV has no header row")
    algo = meta.get("algo")
    if algo is None:
        algo = "mf" if "objective" in header else "bp"
    if algo not in _COLUMNS or tuple(header) != _COLUMNS[algo]:
        raise DomainError(f"unexpected trace columns {header} for algo {algo!r}")
    if not rows:
        raise DomainError("trace CSV has no data rows")
    data = np.array([[float(v) for v in r] for r in rows])
    t = data[:, 0].astype(np.int64)
    if algo == "mf":
        trace = IterationTrace(algo="mf", t=t, objective=data[:, 1],
                               step_inf=data[:, 2], bound=data[:, 4],
                               converged=meta.get("converged", "") == "True",
                               grad_l1=data[:, 3])
    else:
        trace = IterationTrace(algo="bp", t=t, objective=data[:, 1],
                               step_inf=data[:, 2], bound=data[:, 3],
                               converged=meta.get("converged", "") == "True")
    return trace, meta


def trace_meta(model, algo: str, init, tol) -> dict:
    """Standard comment-header entries for a trace produced on this model."""
    from .model import model_hash

    norms = model.norms()
    init_label = init if isinstance(init, str) else "custom"
    return {
        "model_hash": model_hash(model),
        "n": model.n,
        "m": model.m,
        "j_l1": _fmt(norms.j_l1),
        "h_l1": _fmt(norms.h_l1),
        "j_linf": _fmt(norms.j_linf),
        "algo": algo,
        "init": init_label,
        "tol": _fmt(tol),
    }
