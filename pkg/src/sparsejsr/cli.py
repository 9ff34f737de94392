"""Command line entry point: bound, lower, generate, table, graph-dump.

Exit codes: 0 ok, 1 run failed (e.g. bound above the doubling cap, or no
table cell finished), 2 bad configuration or input, 3 solver indeterminate.

Suite files for ``table`` are JSON objects such as

    {"generator": "random", "sizes": [10, 20], "seeds": [1, 2, 3],
     "modes": ["sparse", "dense"], "d": 1, "m": 2, "edges_offset": 10}

Each instance is generated with seed mix_seed(--seed, n, replicate), so one
--seed value fixes the whole table.
"""

from __future__ import annotations

import argparse
import json
import logging
import multiprocessing as mp
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

from .driver import BisectionError, BoundOptions, SolverIndeterminateError, compute_bound, sparsejsr
from .matio import (
    BoundReport,
    MatrixSet,
    MatrixSetError,
    control_set,
    dump_matrix_set,
    load_matrix_set,
    mix_seed,
    random_sparse_set,
    save_report,
)
from .sdpsolve import SolverOptions
from .sosprog import MODES, JsrProgram
from .spectral import product_lower_bound
from .tsgraph import graph_dump

log = logging.getLogger("sparsejsr")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INDETERMINATE = 3

DEFAULT_WALL_CAP = 3600.0
TIMEOUT_MARK = "-"
MEMORY_MARK = "*"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    d: int = 1
    s: int = 1
    s_max: int | None = None
    mode: str = "sparse"
    tol: float = 1e-5
    gamma_lo: float = 0.0
    gamma_hi: float = 2.0
    seed: int = 0
    lower_maxlen: int | None = 6
    output: str | None = None
    newton: bool = False
    numeric_support: bool = False
    dump_graphs: str | None = None
    dump_problem: str | None = None
    timing: bool = True
    extra: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.tol > 0:
            raise ConfigError("--tol must be positive")
        if not 0 <= self.gamma_lo < self.gamma_hi:
            raise ConfigError("need 0 <= --gamma-lo < --gamma-hi")
        if self.d < 1:
            raise ConfigError("--d must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"--mode must be one of {', '.join(MODES)}")
        if self.mode != "dense" and self.s < 1:
            raise ConfigError("--s must be >= 1")
        if self.s_max is not None and (self.s_max < 1 or self.mode != "sparse"):
            raise ConfigError("--s-max needs --mode sparse and a value >= 1")
        if self.lower_maxlen is not None and self.lower_maxlen < 0:
            raise ConfigError("--lower-maxlen must be >= 0")

    def bound_options(self) -> BoundOptions:
        return BoundOptions(
            tol=self.tol,
            gamma_lo=self.gamma_lo,
            gamma_hi=self.gamma_hi,
            lower_maxlen=self.lower_maxlen or None,
            newton=self.newton,
            hierarchy_mode="numeric" if self.numeric_support else "symbolic",
            seed=self.seed,
            solver=SolverOptions.from_env(),
        )


def _read_set(path: str | None) -> MatrixSet:
    if not path:
        raise ConfigError("--input is required")
    try:
        with open(path) as fh:
            return load_matrix_set(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except MatrixSetError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    with open(path, "w") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _summary(r: BoundReport) -> str:
    lb = "n/a" if r.lb is None else f"{r.lb:.6f}"
    t = "n/a" if r.time_s is None else f"{r.time_s:.2f}s"
    s = "" if r.s is None else f" s={r.s}"
    return f"{r.mode} d={r.d}{s}: lb={lb} ub={r.ub:.6f} mb={r.mb} time={t} status={r.status}"


def _say(cfg: RunConfig, line: str) -> None:
    # keep stdout clean when it carries the JSON
    print(line, file=sys.stdout if cfg.output not in (None, "-") else sys.stderr)


def cmd_bound(cfg: RunConfig) -> int:
    cfg.validate()
    ms = _read_set(cfg.input)
    opts = cfg.bound_options()
    if cfg.s_max is not None:
        reports = sparsejsr(ms, cfg.d, cfg.s_max, opts)
        if not cfg.timing:
            reports = [replace(r, time_s=None) for r in reports]
        _write(cfg.output, save_report(reports))
        for r in reports:
            _say(cfg, _summary(r))
        return _exit_for(reports)
    res = compute_bound(ms, cfg.mode, cfg.d, cfg.s, opts)
    report = res.report if cfg.timing else replace(res.report, time_s=None)
    if cfg.dump_graphs:
        _write(cfg.dump_graphs, json.dumps(_graph_doc(res.program), indent=1))
    if cfg.dump_problem:
        _write(cfg.dump_problem, res.program.problem(report.ub).to_text())
    _write(cfg.output, save_report(report))
    _say(cfg, _summary(report))
    return _exit_for([report])


def _exit_for(reports: list[BoundReport]) -> int:
    return EXIT_OK if all(r.status == "ok" for r in reports) else EXIT_INDETERMINATE


def _graph_doc(program: JsrProgram) -> list[dict[str, Any]]:
    groups = []
    for g in program.groups:
        st = g.structure
        if st.graph is None or st.decomposition is None:
            continue
        groups.append((g.name, st.graph, st.decomposition))
    return graph_dump(groups)


def cmd_graph_dump(cfg: RunConfig) -> int:
    cfg.validate()
    ms = _read_set(cfg.input)
    program = JsrProgram(
        ms,
        cfg.d,
        "sparse",
        cfg.s,
        hierarchy_mode="numeric" if cfg.numeric_support else "symbolic",
        seed=cfg.seed,
        newton=cfg.newton,
    )
    _write(cfg.output, json.dumps(_graph_doc(program), indent=1))
    return EXIT_OK


def cmd_lower(cfg: RunConfig) -> int:
    ms = _read_set(cfg.input)
    maxlen = cfg.lower_maxlen if cfg.lower_maxlen is not None else 6
    if maxlen < 1:
        raise ConfigError("--max-length must be >= 1")
    lb = product_lower_bound(ms, maxlen)
    doc = {
        "lb": lb.value,
        "witness_word": list(lb.witness_word),
        "max_length": lb.max_length,
        "words_evaluated": lb.words_evaluated,
        "truncated": lb.truncated,
    }
    _write(cfg.output, json.dumps(doc))
    return EXIT_OK


def _generate(kind: str, params: dict[str, Any]) -> MatrixSet:
    try:
        if kind == "random":
            return random_sparse_set(
                int(params["n"]), int(params["m"]), int(params["edges"]), int(params["seed"]), bool(params.get("loops"))
            )
        if kind == "control":
            return control_set(int(params["n_plant"]), int(params["m"]), int(params["seed"]))
    except KeyError as exc:
        raise ConfigError(f"generator {kind!r} needs parameter {exc.args[0]!r}") from exc
    except MatrixSetError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown generator {kind!r}")


def cmd_generate(cfg: RunConfig) -> int:
    ms = _generate(cfg.extra["generator"], dict(cfg.extra, seed=cfg.seed))
    _write(cfg.output, dump_matrix_set(ms))
    return EXIT_OK


# ---- table ---------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    row: int
    n: int
    replicate: int
    mode: str
    instance: dict[str, Any]


def _load_suite(path: str) -> dict[str, Any]:
    try:
        with open(path) as fh:
            suite = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read suite {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"suite {path} is not valid JSON: {exc}") from exc
    if not isinstance(suite, dict):
        raise ConfigError("suite must be a JSON object")
    for key in ("sizes", "seeds", "modes"):
        if not suite.get(key):
            raise ConfigError(f"suite has no {key}")
    bad = [m for m in suite["modes"] if m not in MODES]
    if bad:
        raise ConfigError(f"unknown modes in suite: {bad}")
    if suite.get("generator", "random") not in ("random", "control"):
        raise ConfigError("suite generator must be 'random' or 'control'")
    return suite


def _instances(suite: dict[str, Any], base_seed: int) -> list[tuple[int, int, dict[str, Any]]]:
    kind = suite.get("generator", "random")
    out = []
    for n in suite["sizes"]:
        for rep in suite["seeds"]:
            seed = mix_seed(base_seed, int(n), int(rep))
            if kind == "random":
                params = {"n": n, "m": suite.get("m", 2), "edges": int(n) + int(suite.get("edges_offset", 10)), "seed": seed}
            else:
                params = {"n_plant": n, "m": suite.get("m", 5), "seed": seed}
            out.append((int(n), int(rep), dict(params, generator=kind)))
    return out


def _cell_worker(task: dict[str, Any], queue, mem_cap: int | None) -> None:
    if mem_cap:
        import resource

        resource.setrlimit(resource.RLIMIT_AS, (mem_cap, mem_cap))
    try:
        ms = _generate(task["instance"]["generator"], task["instance"])
        if task["mode"] == "lower":
            lb = product_lower_bound(ms, task["lower_maxlen"])
            queue.put({"ok": True, "lb": lb.value})
            return
        opts = BoundOptions(**task["options"], solver=SolverOptions.from_env())
        res = compute_bound(ms, task["mode"], task["d"], task["s"], opts)
        r = res.report
        queue.put({"ok": True, "ub": r.ub, "mb": r.mb, "time": r.time_s, "status": r.status})
    except MemoryError:
        queue.put({"ok": False, "mark": MEMORY_MARK})
    except Exception as exc:  # reported per cell, never fatal for the table
        queue.put({"ok": False, "mark": "!", "error": f"{type(exc).__name__}: {exc}"})


def _run_pool(tasks: list[dict[str, Any]], workers: int, wall_cap: float, mem_cap: int | None) -> list[dict[str, Any]]:
    ctx = mp.get_context("fork" if sys.platform != "win32" else "spawn")
    results: list[dict[str, Any] | None] = [None] * len(tasks)
    pending = list(range(len(tasks)))
    running: dict[int, tuple[Any, Any, float]] = {}
    while pending or running:
        while pending and len(running) < workers:
            k = pending.pop(0)
            q = ctx.Queue()
            proc = ctx.Process(target=_cell_worker, args=(tasks[k], q, mem_cap), daemon=True)
            proc.start()
            running[k] = (proc, q, time.monotonic())
        time.sleep(0.05)
        for k, (proc, q, t0) in list(running.items()):
            if not q.empty():
                results[k] = q.get()
                proc.join()
                del running[k]
            elif not proc.is_alive():
                results[k] = q.get() if not q.empty() else {"ok": False, "mark": MEMORY_MARK if proc.exitcode == -9 else "!"}
                del running[k]
            elif time.monotonic() - t0 > wall_cap:
                proc.terminate()
                proc.join()
                results[k] = {"ok": False, "mark": TIMEOUT_MARK}
                del running[k]
    return [r or {"ok": False, "mark": "!"} for r in results]


def _fmt(v: Any, spec: str) -> str:
    return format(v, spec) if isinstance(v, (int, float)) else str(v)


def render_table(rows: list[dict[str, Any]], modes: Sequence[str]) -> str:
    head = ["n", "seed", "lb"]
    for m in modes:
        head += [f"{m}:time", f"{m}:ub", f"{m}:mb"]
    lines = [head]
    for row in rows:
        line = [str(row["n"]), str(row["seed"]), _fmt(row["lb"], ".4f")]
        for m in modes:
            c = row[m]
            if c.get("mark"):
                line += [c["mark"]] * 3
            else:
                line += [_fmt(c["time"], ".2f"), _fmt(c["ub"], ".4f"), str(c["mb"])]
        lines.append(line)
    widths = [max(len(l[i]) for l in lines) for i in range(len(head))]
    return "\n".join("  ".join(x.rjust(w) for x, w in zip(l, widths)) for l in lines)


def cmd_table(cfg: RunConfig) -> int:
    suite = _load_suite(cfg.extra["suite"])
    modes = list(suite["modes"])
    d = int(suite.get("d", cfg.d))
    s = int(suite.get("s", cfg.s))
    wall_cap = float(suite.get("wall_cap", cfg.extra.get("wall_cap") or DEFAULT_WALL_CAP))
    mem_cap = cfg.extra.get("mem_cap")
    lower_maxlen = int(suite.get("lower_maxlen", cfg.lower_maxlen or 6))
    options = {"tol": float(suite.get("tol", cfg.tol)), "lower_maxlen": None, "seed": cfg.seed}
    insts = _instances(suite, cfg.seed)
    tasks = []
    for n, rep, inst in insts:
        tasks.append({"instance": inst, "mode": "lower", "lower_maxlen": lower_maxlen})
        for m in modes:
            tasks.append({"instance": inst, "mode": m, "d": d, "s": s, "options": options})
    workers = int(cfg.extra.get("workers") or os.cpu_count() or 1)
    results = _run_pool(tasks, workers, wall_cap, mem_cap)
    rows = []
    k = 0
    for n, rep, inst in insts:
        lbres = results[k]
        k += 1
        row = {"n": n, "seed": rep, "instance_seed": inst["seed"], "lb": lbres.get("lb", lbres.get("mark"))}
        for m in modes:
            row[m] = results[k]
            k += 1
        rows.append(row)
    doc = {"suite": suite, "base_seed": cfg.seed, "d": d, "s": s, "rows": rows}
    text = render_table(rows, modes)
    if cfg.output and cfg.output != "-":
        _write(cfg.output, json.dumps(doc, indent=1))
        print(text)
    else:
        print(text, file=sys.stderr)
        _write(None, json.dumps(doc))
    if cfg.extra.get("text"):
        _write(cfg.extra["text"], text)
    ok = any(r[m].get("ok") for r in rows for m in modes)
    return EXIT_OK if ok else EXIT_FAILED


# ---- argument parsing ------------------------------------------------------


def _common(p: argparse.ArgumentParser, relax: bool = True) -> None:
    p.add_argument("--input", "-i")
    p.add_argument("--output", "-o", help="output file (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    if relax:
        p.add_argument("--d", type=int, default=1, help="relaxation order (p has degree 2d)")
        p.add_argument("--s", type=int, default=1, help="sparse order")
        p.add_argument("--newton", action="store_true", help="Newton polytope filter on the starting basis")
        p.add_argument("--numeric-support", action="store_true", help="support hierarchy from random coefficients")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsejsr", description="Upper bounds on the joint spectral radius via SOS relaxations.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="bisection upper bound")
    _common(b)
    b.add_argument("--mode", default="sparse", choices=MODES)
    b.add_argument("--s-max", type=int, help="run sparse orders 1..S_MAX (stops when the support stabilizes)")
    b.add_argument("--tol", type=float, default=1e-5)
    b.add_argument("--gamma-lo", type=float, default=0.0)
    b.add_argument("--gamma-hi", type=float, default=2.0)
    b.add_argument("--lower-maxlen", type=int, default=6, help="word length for the product lower bound (0 disables)")
    b.add_argument("--dump-graphs", metavar="FILE")
    b.add_argument("--dump-problem", metavar="FILE")
    b.add_argument("--no-timing", action="store_true", help="omit wall time so reports are reproducible")

    lo = sub.add_parser("lower", help="lower bound from products of bounded length")
    _common(lo, relax=False)
    lo.add_argument("--max-length", type=int, default=6)

    g = sub.add_parser("generate", help="write a generated matrix set")
    gsub = g.add_subparsers(dest="generator", required=True)
    gr = gsub.add_parser("random")
    _common(gr, relax=False)
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--m", type=int, default=2)
    gr.add_argument("--edges", type=int, help="nonzeros per matrix (default n + 10)")
    gr.add_argument("--loops", action="store_true", help="allow diagonal entries")
    gc = gsub.add_parser("control")
    _common(gc, relax=False)
    gc.add_argument("--n-plant", type=int, required=True)
    gc.add_argument("--m", type=int, default=5)

    t = sub.add_parser("table", help="run an experiment suite")
    t.add_argument("suite")
    t.add_argument("--output", "-o", help="JSON output (default stdout)")
    t.add_argument("--text", help="also write the aligned table here")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--workers", type=int)
    t.add_argument("--wall-cap", type=float, help=f"seconds per cell (default {DEFAULT_WALL_CAP:g})")
    t.add_argument("--mem-cap-mb", type=int, help="address-space cap per cell")

    gd = sub.add_parser("graph-dump", help="term sparsity graphs and cliques as JSON")
    _common(gd)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command, input=getattr(ns, "input", None), output=getattr(ns, "output", None), seed=ns.seed)
    for key in ("d", "s", "s_max", "mode", "tol", "gamma_lo", "gamma_hi", "newton", "numeric_support", "dump_graphs", "dump_problem"):
        if getattr(ns, key, None) is not None:
            setattr(cfg, key, getattr(ns, key))
    if ns.command == "bound":
        cfg.lower_maxlen = ns.lower_maxlen
        cfg.timing = not ns.no_timing
    elif ns.command == "lower":
        cfg.lower_maxlen = ns.max_length
    elif ns.command == "generate":
        extra = {"generator": ns.generator, "m": ns.m}
        if ns.generator == "random":
            extra.update(n=ns.n, edges=ns.edges if ns.edges is not None else ns.n + 10, loops=ns.loops)
        else:
            extra.update(n_plant=ns.n_plant)
        cfg.extra = extra
    elif ns.command == "table":
        cfg.extra = {
            "suite": ns.suite,
            "text": ns.text,
            "workers": ns.workers,
            "wall_cap": ns.wall_cap,
            "mem_cap": ns.mem_cap_mb * 2**20 if ns.mem_cap_mb else None,
        }
    return cfg


COMMANDS = {
    "bound": cmd_bound,
    "lower": cmd_lower,
    "generate": cmd_generate,
    "table": cmd_table,
    "graph-dump": cmd_graph_dump,
}


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](config_from_args(ns))
    except (ConfigError, ValueError) as exc:
        print(f"sparsejsr: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverIndeterminateError as exc:
        print(f"sparsejsr: solver indeterminate: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE
    except (BisectionError, ArithmeticError, MemoryError) as exc:
        print(f"sparsejsr: failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
