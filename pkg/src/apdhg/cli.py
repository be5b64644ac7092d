"""Command-line front end: ``solve`` one configured problem or ``bench`` the
four stepsize variants on it.

Configuration comes from ``key = value`` lines (``--config path``) and from
flags; flags win. Examples::

    apdhg solve --problem rof --mu 0.05 --policy adapt --size 64 --seed 7 --out-dir results/
    apdhg bench --problem tvl1 --mu 1 --size 64 --seed 7
"""

import argparse
import csv
import dataclasses
import math
import os
import sys
import time
import typing
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError
from .io import read_lp, read_pgm, write_pgm, write_trace_csv, write_vector
from .problems import (ImageSpec, build_compressed_sensing, build_linf_approx, build_lp,
                       build_rof, build_segmentation, build_tvl1, circles_phantom,
                       linf_split, make_noise, random_fourier_rows, random_signal,
                       sc50b_like, smooth_edges_image)
from .solver import SolverConfig, solve

__all__ = ["RunConfig", "BenchRow", "BenchmarkReport", "parse_config", "build_problem",
           "run", "bench", "main", "VARIANTS"]

PROBLEMS = ("rof", "tvl1", "segment", "cs", "linf", "lp")
VARIANTS = ("const_sqrtL", "const_taufinal", "adapt", "adapt_backtrack")
IMAGING = ("rof", "tvl1", "segment", "cs")

_CHOICES = {
    "problem": PROBLEMS,
    "policy": VARIANTS,
    "noise": ("gaussian", "salt_pepper"),
    "scaling": ("printed", "inverse"),
    "residual_norm": ("mean", "absolute"),
}

# per-problem default for ``mu`` when left unset
_DEFAULT_MU = {"rof": 0.05, "tvl1": 1.0, "segment": 0.5, "cs": 1.0}


@dataclass
class RunConfig:
    """Everything a ``solve`` or ``bench`` invocation needs.

    Unset optional fields fall back to problem-specific defaults: ``mu``
    (rof 0.05, tvl1 1, segment 0.5, cs 1) and the synthetic data generated
    from ``size`` and ``seed`` when no ``image`` or ``lp_file`` is given.
    """

    problem: str = "rof"
    policy: str = "adapt"
    # problem parameters
    mu: Optional[float] = None
    epsilon: float = 0.1
    rate: float = 0.1
    c1: float = 200.0
    c2: float = 25.0
    size: int = 64
    n: int = 512
    m: int = 100
    noise: str = "gaussian"
    noise_level: float = 10.0
    preconditioned: bool = False
    scaling: str = "printed"
    seed: int = 0
    # solver
    tol: float = 0.05
    max_iters: int = 10000
    alpha0: float = 0.5
    eta: float = 0.95
    delta: float = 1.5
    s: float = 1.0
    gamma: float = 0.75
    beta: float = 0.95
    residual_norm: str = "mean"
    tau: Optional[float] = None
    sigma: Optional[float] = None
    # inputs and outputs
    image: Optional[str] = None
    lp_file: Optional[str] = None
    out_dir: str = "results"

    def validate(self):
        for key, allowed in _CHOICES.items():
            if getattr(self, key) not in allowed:
                raise ConfigurationError(
                    f"{key}: expected one of {', '.join(allowed)}, got {getattr(self, key)!r}")
        for key in ("size", "n", "m", "max_iters"):
            if getattr(self, key) < 1:
                raise ConfigurationError(f"{key}: must be a positive integer")
        if self.mu is not None and not self.mu > 0:
            raise ConfigurationError("mu: must be positive")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon: must be positive")
        if not 0 < self.rate <= 1:
            raise ConfigurationError("rate: must lie in (0, 1]")
        if self.tol < 0:
            raise ConfigurationError("tol: must be nonnegative")
        if (self.tau is None) != (self.sigma is None):
            raise ConfigurationError("tau: give tau and sigma together")
        for key in ("image", "lp_file"):
            path = getattr(self, key)
            if path is not None and not os.path.isfile(path):
                raise ConfigurationError(f"{key}: file not found: {path}")
        return self

    def solver_config(self):
        return SolverConfig(tol=self.tol, max_iters=self.max_iters, alpha0=self.alpha0,
                            eta=self.eta, delta=self.delta, s=self.s, gamma=self.gamma,
                            beta=self.beta, seed=self.seed, residual_norm=self.residual_norm,
                            log_objective=True)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _base_type(tp):
    args = [a for a in typing.get_args(tp) if a is not type(None)]
    return args[0] if args else tp


def _coerce(key, text):
    tp = _base_type(_FIELDS[key].type)
    text = text.strip()
    if text.lower() in ("none", "") and type(None) in typing.get_args(_FIELDS[key].type):
        return None
    try:
        if tp is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigurationError(
            f"{key}: expected {tp.__name__}, got {text!r}") from None


def _normalize_key(key):
    return key.strip().replace("-", "_")


def _parse_lines(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = _normalize_key(key)
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown config key {key!r} (line {lineno})")
        values[key] = _coerce(key, value)
    return values


def parse_config(path=None, text=None, overrides=None):
    """Build a validated ``RunConfig``.

    ``path`` or ``text`` supply ``key = value`` lines; ``overrides`` maps
    keys to values (strings are coerced to the field type) and takes
    precedence.
    """
    values = {}
    if path is not None:
        with open(path) as fh:
            values.update(_parse_lines(fh.read()))
    if text is not None:
        values.update(_parse_lines(text))
    for key, value in (overrides or {}).items():
        key = _normalize_key(key)
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    return RunConfig(**values).validate()


def _image(cfg):
    if cfg.image is not None:
        return read_pgm(cfg.image)
    spec = ImageSpec(cfg.size, cfg.size, seed=cfg.seed)
    clean = circles_phantom(spec) if cfg.problem == "segment" else smooth_edges_image(spec)
    return make_noise(clean, cfg.noise, cfg.noise_level, seed=cfg.seed)


def build_problem(cfg):
    """Problem instance for ``cfg`` (deterministic in ``cfg.seed``)."""
    mu = cfg.mu if cfg.mu is not None else _DEFAULT_MU.get(cfg.problem)
    if cfg.problem == "rof":
        return build_rof(_image(cfg), mu, s=cfg.s)
    if cfg.problem == "tvl1":
        return build_tvl1(_image(cfg), mu, s=cfg.s)
    if cfg.problem == "segment":
        return build_segmentation(_image(cfg), cfg.c1, cfg.c2, mu, s=cfg.s)
    if cfg.problem == "cs":
        truth = read_pgm(cfg.image) if cfg.image is not None else None
        shape = truth.shape if truth is not None else (cfg.size, cfg.size)
        spec = ImageSpec(*shape, seed=cfg.seed)
        problem, _ = build_compressed_sensing(spec, cfg.rate, mu, seed=cfg.seed,
                                              truth=truth, s=cfg.s)
        return problem
    if cfg.problem == "linf":
        if cfg.m > cfg.n:
            raise ConfigurationError("m: cannot exceed n")
        D = random_fourier_rows(cfg.n, cfg.m, seed=cfg.seed)
        return build_linf_approx(D, random_signal(cfg.m, seed=cfg.seed), cfg.epsilon)
    instance = read_lp(cfg.lp_file) if cfg.lp_file is not None else sc50b_like(seed=cfg.seed)
    return build_lp(instance, cfg.preconditioned, cfg.scaling, s=cfg.s)


_SOLVER_POLICY = {"const_sqrtL": "constant", "const_taufinal": "constant",
                  "adapt": "adaptive", "adapt_backtrack": "adaptive_backtracking"}


def _solve_variant(problem, variant, cfg, steps=None):
    """Run one variant; ``steps`` overrides the initial ``(tau, sigma)``."""
    if steps is None and cfg.tau is not None:
        steps = (cfg.tau, cfg.sigma)
    tau, sigma = steps if steps is not None else (None, None)
    return solve(problem, _SOLVER_POLICY[variant], cfg.solver_config(), tau=tau, sigma=sigma)


def _final_steps(trace):
    st = trace.final_state
    return st.tau, st.sigma


def _write_solution(cfg, problem, iterate, stem):
    sol = problem.solution(iterate)
    if cfg.problem in IMAGING:
        img = sol.x.reshape(problem.meta["image_shape"])
        if cfg.problem == "segment":
            img = 255.0 * img
        path = os.path.join(cfg.out_dir, stem + ".pgm")
        write_pgm(path, img)
    else:
        x = linf_split(problem, sol.x)[0] if cfg.problem == "linf" else sol.x
        path = os.path.join(cfg.out_dir, stem + ".txt")
        write_vector(path, x)
    return path


def _summary(trace):
    bt = f" ({trace.backtracks} backtracks)" if trace.backtracks else ""
    if trace.status == "converged":
        return f"converged in {trace.iterations} iterations{bt}"
    if trace.status == "diverged":
        return f"diverged after {trace.iterations} iterations: {trace.error}"
    return f"not converged: max_iters reached after {trace.iterations} iterations{bt}"


EXIT_OK, EXIT_MAX_ITERS, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def run(cfg, stream=None):
    """Solve ``cfg`` and write the trace CSV and solution; returns an exit code.

    ``const_taufinal`` first runs ``adapt`` to obtain its stepsizes.
    """
    stream = stream or sys.stdout
    problem = build_problem(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    steps = None
    if cfg.policy == "const_taufinal" and cfg.tau is None:
        _, harvest = _solve_variant(problem, "adapt", cfg)
        steps = _final_steps(harvest)
    iterate, trace = _solve_variant(problem, cfg.policy, cfg, steps)
    stem = f"{cfg.problem}_{cfg.policy}"
    trace_path = os.path.join(cfg.out_dir, stem + "_trace.csv")
    write_trace_csv(trace_path, trace)
    print(f"trace: {trace_path}", file=stream)
    if trace.status != "diverged":
        print(f"solution: {_write_solution(cfg, problem, iterate, stem)}", file=stream)
    print(_summary(trace), file=stream)
    return {"converged": EXIT_OK, "max_iters": EXIT_MAX_ITERS}.get(trace.status, EXIT_DIVERGED)


@dataclass
class BenchRow:
    variant: str
    status: str
    iterations: Optional[int] = None
    backtracks: Optional[int] = None
    seconds: Optional[float] = None
    p: Optional[float] = None
    d: Optional[float] = None
    objective: Optional[float] = None
    tau: Optional[float] = None
    sigma: Optional[float] = None


@dataclass
class BenchmarkReport:
    problem: str
    rows: list

    def row(self, variant):
        return next(r for r in self.rows if r.variant == variant)

    COLUMNS = ("variant", "status", "iterations", "backtracks", "seconds", "p", "d",
               "objective")

    def _cells(self, r):
        def num(v, fmt):
            return "-" if v is None else format(v, fmt)
        return [r.variant, r.status, num(r.iterations, "d"), num(r.backtracks, "d"),
                num(r.seconds, ".3f"), num(r.p, ".4g"), num(r.d, ".4g"),
                num(r.objective, ".8g")]

    def table(self):
        lines = [list(self.COLUMNS)] + [self._cells(r) for r in self.rows]
        widths = [max(len(line[i]) for line in lines) for i in range(len(self.COLUMNS))]
        out = []
        for j, line in enumerate(lines):
            cells = [c.ljust(w) if i < 2 else c.rjust(w)
                     for i, (c, w) in enumerate(zip(line, widths))]
            out.append("  ".join(cells).rstrip())
            if j == 0:
                out.append("  ".join("-" * w for w in widths))
        return "\n".join(out)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([r.variant, r.status] + ["" if v is None else repr(v) for v in
                           (r.iterations, r.backtracks, r.seconds, r.p, r.d, r.objective)])


def _bench_row(problem, variant, cfg, steps=None):
    t0 = time.perf_counter()
    iterate, trace = _solve_variant(problem, variant, cfg, steps)
    seconds = time.perf_counter() - t0
    acc = trace.accepted
    last = acc[-1] if acc else None
    objective = None
    if trace.status != "diverged" and problem.objective is not None:
        objective = float(problem.objective(problem.solution(iterate).x))
    tau, sigma = _final_steps(trace)
    row = BenchRow(variant, trace.status, trace.iterations, trace.backtracks, seconds,
                   last.p if last else None, last.d if last else None, objective, tau, sigma)
    return row, trace


def bench(cfg, write=True):
    """Run all four variants on one problem instance.

    ``adapt`` runs first; ``const_taufinal`` reuses its final stepsizes
    exactly. Variants that need ``rho(A^T A)`` are skipped when the problem
    has no known bound. Divergence is reported in the table, not raised.
    """
    problem = build_problem(cfg)
    cfg = dataclasses.replace(cfg, tau=None, sigma=None)
    known = problem.rho_bound is not None
    results = {}
    traces = {}
    if known:
        results["adapt"], traces["adapt"] = _bench_row(problem, "adapt", cfg)
    for variant in ("const_sqrtL", "const_taufinal", "adapt_backtrack"):
        if variant == "const_sqrtL" and not known:
            continue
        if variant == "const_taufinal":
            if "adapt" not in results or results["adapt"].status == "diverged":
                continue
            steps = (results["adapt"].tau, results["adapt"].sigma)
            results[variant], traces[variant] = _bench_row(problem, variant, cfg, steps)
        else:
            results[variant], traces[variant] = _bench_row(problem, variant, cfg)
    rows = [results.get(v, BenchRow(v, "skipped")) for v in VARIANTS]
    report = BenchmarkReport(cfg.problem, rows)
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        report.write_csv(os.path.join(cfg.out_dir, f"{cfg.problem}_bench.csv"))
        for variant, trace in traces.items():
            write_trace_csv(os.path.join(cfg.out_dir, f"{cfg.problem}_{variant}_trace.csv"), trace)
    return report


def _build_parser():
    parser = argparse.ArgumentParser(prog="apdhg", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "solve one problem with one stepsize policy"),
                        ("bench", "compare the four stepsize variants")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", metavar="PATH", help="file of 'key = value' lines")
        for fname, f in _FIELDS.items():
            if name == "bench" and fname == "policy":
                continue
            flag = "--" + fname.replace("_", "-")
            tp = _base_type(f.type)
            meta = "|".join(_CHOICES[fname]) if fname in _CHOICES else tp.__name__.upper()
            # values stay strings so file and flag share one coercion path
            p.add_argument(flag, dest=fname, default=None, metavar=meta,
                           help=f"default: {f.default}")
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k in _FIELDS and v is not None}
    try:
        cfg = parse_config(path=args.config, overrides=overrides)
    except (ConfigurationError, OSError) as exc:
        parser.error(str(exc))
    try:
        if args.command == "solve":
            return run(cfg)
        report = bench(cfg)
    except ConfigurationError as exc:
        parser.error(str(exc))
    print(report.table())
    print(f"bench: {os.path.join(cfg.out_dir, cfg.problem + '_bench.csv')}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
