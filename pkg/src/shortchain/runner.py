"""End-to-end audit runs: initialize, adapt, step, diagnose, report.

A run draws N chains i.i.d. from the approximation, advances them T adapted
MH iterations toward the target, and turns the final ensemble into
per-functional error lower bounds plus a reliability verdict.  Results are
reproducible bit for bit from (config, target, approximation): every chain
owns its RNG stream, cross-chain reductions use exact summation, and the
fixed block schedule makes the report independent of the thread count.
"""

from __future__ import annotations

import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .adaptation import (AdaptationState, SizingPolicy, chain_count,
                         initial_step_size, iteration_count, target_acceptance)
from .approximations import Approximation
from .diagnostics import (MONOTONE_ERROR_CAVEAT, ConfidenceInterval,
                          LowerBoundResult, ReliabilityResult,
                          error_lower_bound, log_variance_ratio_ci,
                          mean_difference_ci, quantile_difference_ci,
                          reliability_check, scalar_functional_diagnostics)
from .kernels import KERNEL_KINDS, Preconditioner, step_batch
from .rng import RandomStream, chain_streams
from .stats import binomial_quantile, sample_quantile
from .targets import TargetModel

# chains are advanced in fixed blocks so the arithmetic (and therefore the
# report) is identical whether blocks run on one thread or many
_BLOCK = 64

_FUNCTIONAL_RE = re.compile(
    r"^\s*(mean|variance|quantile|scalar)\s*\(\s*([^)]*?)\s*\)\s*$")

BUILTIN_SCALAR_FUNCTIONS = ("target_log_density",)


@dataclass(frozen=True)
class FunctionalSpec:
    """One audited functional: a coordinate mean/variance/quantile or a scalar map."""
    kind: str
    coordinate: Optional[int] = None
    p: Optional[float] = None
    name: Optional[str] = None

    @property
    def tag(self) -> str:
        if self.kind == "mean":
            return f"mean({self.coordinate})"
        if self.kind == "variance":
            return f"log_variance({self.coordinate})"
        if self.kind == "quantile":
            return f"quantile({self.coordinate},{self.p:g})"
        return f"scalar({self.name})"


def parse_functional(text: str) -> FunctionalSpec:
    """Parses 'mean(i)', 'variance(i)', 'quantile(i,p)' or 'scalar(name)'."""
    m = _FUNCTIONAL_RE.match(text)
    if not m:
        raise ValueError(
            f"unrecognized functional {text!r}; expected mean(i), variance(i), "
            "quantile(i,p) or scalar(name)")
    kind, args = m.group(1), m.group(2)
    if kind == "scalar":
        if not args:
            raise ValueError(f"scalar functional needs a name: {text!r}")
        return FunctionalSpec("scalar", name=args)
    if kind == "quantile":
        parts = [a.strip() for a in args.split(",")]
        if len(parts) != 2:
            raise ValueError(f"quantile functional needs (coordinate, p): {text!r}")
        return FunctionalSpec("quantile", coordinate=int(parts[0]), p=float(parts[1]))
    return FunctionalSpec(kind, coordinate=int(args))


def default_functionals(dimension: int) -> list[FunctionalSpec]:
    """Means and variances of every coordinate."""
    specs = [FunctionalSpec("mean", coordinate=i) for i in range(dimension)]
    specs += [FunctionalSpec("variance", coordinate=i) for i in range(dimension)]
    return specs


@dataclass
class RunConfig:
    """Everything a run needs besides the target and the approximation.

    Attributes:
        kernel: One of "rwmh", "mala", "barker", "hmc".
        seed: Ensemble seed; with the config it fully determines the report.
        alpha: Miscoverage level for every interval.
        sizing: Tolerances behind the automatic N and T choices.
        functionals: Strings or FunctionalSpec items; None audits every
            coordinate's mean and variance.
        n_chains / n_iterations: Overrides for the sized N and T.
        step_size_scale: Multiplier on the initial step size (diagnostic
            tool; near-zero values freeze the chains on purpose).
        trace_every: Record bounds and reliability every trace_every
            iterations (0 disables tracing).
        threads: Worker cap for the block fan-out; never changes results.
        reliability_cutoff: Failure threshold for the reliability check.
        scalar_functions: Extra name -> callable scalar functionals; the
            callable maps an (N, d) batch to (N,) values.
    """
    kernel: str
    seed: int
    alpha: float = 0.05
    sizing: SizingPolicy = field(default_factory=SizingPolicy)
    functionals: Optional[Sequence] = None
    n_chains: Optional[int] = None
    n_iterations: Optional[int] = None
    step_size_scale: float = 1.0
    trace_every: int = 0
    threads: int = 1
    reliability_cutoff: float = 0.1
    scalar_functions: Optional[dict] = None

    @property
    def leapfrog_steps(self) -> int:
        return self.sizing.leapfrog_steps


@dataclass
class GradientBudget:
    initialization: int
    iterations: int

    @property
    def total(self) -> int:
        return self.initialization + self.iterations


@dataclass
class FunctionalResult:
    """Bound, interval and bookkeeping for one audited functional."""
    spec: FunctionalSpec
    result: LowerBoundResult
    initial_side: str
    initial_value: float
    normalized: dict = field(default_factory=dict)

    @property
    def tag(self) -> str:
        return self.result.functional_tag


@dataclass
class TraceRow:
    iteration: int
    rho2_max: float
    bounds: dict


@dataclass
class DiagnosticReport:
    """Full outcome of one audit run."""
    kernel: str
    dimension: int
    n_chains: int
    n_iterations: int
    alpha: float
    seed: int
    leapfrog_steps: int
    initial_step_size: float
    final_step_size: float
    step_size_scale: float
    target_acceptance_rate: float
    acceptance_history: list
    functionals: list
    reliability: ReliabilityResult
    gradient_budget: GradientBudget
    caveats: str
    wall_time: float
    traces: Optional[list] = None

    def to_json_dict(self) -> dict:
        """JSON-ready dict; excludes wall time so identical (config, seed)
        runs serialize to identical bytes."""
        return {
            "kernel": self.kernel,
            "dimension": self.dimension,
            "chains": self.n_chains,
            "iterations": self.n_iterations,
            "alpha": self.alpha,
            "seed": self.seed,
            "leapfrog_steps": self.leapfrog_steps,
            "step_size": {
                "initial": _jnum(self.initial_step_size),
                "final": _jnum(self.final_step_size),
                "scale": _jnum(self.step_size_scale),
            },
            "target_acceptance": self.target_acceptance_rate,
            "acceptance_history": [_jnum(a) for a in self.acceptance_history],
            "functionals": [_functional_json(f) for f in self.functionals],
            "reliability": {
                "rho2": [_jnum(v) for v in self.reliability.rho2_per_coordinate],
                "rho2_max": _jnum(self.reliability.rho2_max),
                "cutoff": self.reliability.cutoff,
                "passed": self.reliability.passed,
                "degenerate_coordinates": list(self.reliability.degenerate_coordinates),
            },
            "gradient_evaluations": {
                "initialization": self.gradient_budget.initialization,
                "iterations": self.gradient_budget.iterations,
                "total": self.gradient_budget.total,
            },
            "caveats": self.caveats,
            "traces": None if self.traces is None else [
                {"t": row.iteration, "rho2_max": _jnum(row.rho2_max),
                 "bounds": {k: _jnum(v) for k, v in sorted(row.bounds.items())}}
                for row in self.traces
            ],
        }


def _jnum(x):
    # JSON has no NaN/inf; keep them as unambiguous strings
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return x


def _functional_json(f: FunctionalResult) -> dict:
    ci = f.result.interval
    out = {
        "tag": f.result.functional_tag,
        "kind": f.spec.kind,
        "bound": _jnum(f.result.bound),
        "detected": f.result.detected,
        "lower": _jnum(ci.lower),
        "upper": _jnum(ci.upper),
        "level": ci.level,
        "degenerate": ci.degenerate,
        "initial_side": f.initial_side,
        "initial_value": _jnum(f.initial_value),
    }
    if f.spec.coordinate is not None:
        out["coordinate"] = f.spec.coordinate
    if f.spec.p is not None:
        out["p"] = f.spec.p
    if f.spec.name is not None:
        out["name"] = f.spec.name
    for key, val in sorted(f.normalized.items()):
        out[key] = _jnum(val)
    return out


@dataclass
class IndependenceCheckResult:
    max_abs_correlation: float
    degenerate_pairs: int
    suspicious: bool


def cross_chain_independence_check(replicated_finals: np.ndarray, n_pairs: int,
                                   stream: RandomStream) -> IndependenceCheckResult:
    """Sanity check that chains do not share randomness.

    Projects the final states of randomly chosen chain pairs onto one random
    direction and correlates the two chains' projections across independent
    replications.  Healthy ensembles give small correlations; replications
    accidentally run with the same seed give degenerate (constant) series,
    reported as suspicious.

    Args:
        replicated_finals: (R, N, d) final ensembles from R >= 2 independent
            replications with N >= 10 chains each.
        n_pairs: Number of chain pairs to probe, at least 1.
        stream: Stream for pair and projection choices.
    """
    x = np.asarray(replicated_finals, dtype=float)
    if x.ndim != 3 or x.shape[0] < 2 or x.shape[1] < 10:
        raise ValueError(f"need (R >= 2, N >= 10, d) replicated finals, got shape {x.shape}")
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be >= 1, got {n_pairs}")
    r, n, d = x.shape
    proj = stream.standard_normal(d)
    proj = proj / math.sqrt(float(proj @ proj))
    scalars = x @ proj  # (R, N)
    max_abs = 0.0
    degenerate = 0
    for _ in range(n_pairs):
        j = int(stream.integers(0, n))
        k = int(stream.integers(0, n - 1))
        if k >= j:
            k += 1
        a = scalars[:, j] - scalars[:, j].mean()
        b = scalars[:, k] - scalars[:, k].mean()
        denom = math.sqrt(float(a @ a) * float(b @ b))
        if denom == 0.0:
            degenerate += 1
            max_abs = max(max_abs, 1.0)
            continue
        max_abs = max(max_abs, abs(float(a @ b) / denom))
    return IndependenceCheckResult(max_abs, degenerate,
                                   suspicious=degenerate > 0 or max_abs >= 0.999)


def run_with_traces(config: RunConfig, target: TargetModel,
                    approximation: Approximation) -> DiagnosticReport:
    """Like ``run_diagnostic`` but guarantees per-checkpoint traces.

    Tracing is pure bookkeeping: the final report matches the untraced run
    for the same seed exactly.
    """
    if config.trace_every < 1:
        raise ValueError("run_with_traces needs trace_every >= 1")
    return run_diagnostic(config, target, approximation)


def run_diagnostic(config: RunConfig, target: TargetModel,
                   approximation: Approximation) -> DiagnosticReport:
    """Runs the full audit and returns its report.

    Raises:
        ValueError: for invalid configuration (bad kernel, out-of-range
            coordinates, infeasible quantile levels for the sized N, ...).
        RuntimeError: when more than half the chains start at non-finite
            log density, which means the approximation and target are too
            incompatible for the audit to say anything useful.
    """
    start_time = time.perf_counter()
    kind = config.kernel
    if kind not in KERNEL_KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}, expected one of {KERNEL_KINDS}")
    if target.dimension != approximation.dimension:
        raise ValueError(f"target dimension {target.dimension} does not match "
                         f"approximation dimension {approximation.dimension}")
    if config.threads < 1:
        raise ValueError(f"threads must be >= 1, got {config.threads}")
    if config.trace_every < 0:
        raise ValueError(f"trace_every must be >= 0, got {config.trace_every}")
    if config.step_size_scale <= 0 or not math.isfinite(config.step_size_scale):
        raise ValueError(f"step_size_scale must be positive, got {config.step_size_scale}")
    if not 0.0 < config.alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {config.alpha}")

    d = target.dimension
    policy = config.sizing
    n_chains = config.n_chains if config.n_chains is not None else chain_count(policy)
    n_iters = (config.n_iterations if config.n_iterations is not None
               else iteration_count(kind, d, policy))
    if n_chains < 2:
        raise ValueError(f"need at least 2 chains, got {n_chains}")
    if n_iters < 1:
        raise ValueError(f"need at least 1 iteration, got {n_iters}")

    specs = _resolve_specs(config, d)
    scalar_fns = _resolve_scalar_functions(specs, config, target)
    _validate_quantile_feasibility(specs, n_chains, config.alpha)

    pre = Preconditioner(approximation.covariance)
    _, streams = chain_streams(config.seed, n_chains)

    # initialization phase: i.i.d. draws, each from its chain's own stream
    x0 = np.stack([approximation.sample(streams[j]) for j in range(n_chains)])
    grad_base = target.gradient_evaluations
    logpi = np.atleast_1d(np.asarray(target.log_density(x0), dtype=float))
    n_bad = int(np.sum(~np.isfinite(logpi)))
    if n_bad * 2 > n_chains:
        raise RuntimeError(
            f"{n_bad} of {n_chains} chains started at non-finite log density; "
            "the approximation puts most of its mass where the target has none, "
            "so the audit cannot run. Check the approximation (or its support) "
            "against the target before retrying.")
    grad_cached = None
    if kind in ("mala", "barker"):
        grad_cached = np.asarray(target.grad_log_density(x0), dtype=float)
    init_grads = target.gradient_evaluations - grad_base

    h0 = initial_step_size(kind, d) * config.step_size_scale
    adapt = AdaptationState(log_step_size=math.log(h0))
    a_star = target_acceptance(kind)

    checkpoints = _checkpoint_iterations(config.trace_every, n_iters)
    trace_rows: Optional[list] = [] if checkpoints else None

    def record(iteration, states):
        rel = reliability_check(x0, states, cutoff=config.reliability_cutoff)
        results = _functional_results(specs, states, x0, approximation,
                                      config.alpha, scalar_fns)
        trace_rows.append(TraceRow(iteration, rel.rho2_max,
                                   {r.tag: r.result.bound for r in results}))

    if trace_rows is not None and 0 in checkpoints:
        record(0, x0)

    x = x0.copy()
    executor = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    try:
        for t in range(n_iters):
            h = adapt.step_size
            eps, sign_u, accept_u = _gather_noise(kind, streams, d)
            x, logpi, grad_cached, alphas = _advance_blocks(
                kind, x, logpi, grad_cached, eps, sign_u, accept_u, h, pre,
                target, config.leapfrog_steps, executor)
            adapt.update(math.fsum(alphas) / n_chains, a_star)
            if trace_rows is not None and (t + 1) in checkpoints:
                record(t + 1, x)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    iter_grads = target.gradient_evaluations - grad_base - init_grads

    reliability = reliability_check(x0, x, cutoff=config.reliability_cutoff)
    if trace_rows is not None:
        reliability.trajectory = [(row.iteration, row.rho2_max) for row in trace_rows]
    functionals = _functional_results(specs, x, x0, approximation,
                                      config.alpha, scalar_fns)

    caveats = MONOTONE_ERROR_CAVEAT
    if n_bad:
        caveats += (f" {n_bad} of {n_chains} chains started at non-finite log "
                    "density and may have contributed nothing but their "
                    "initialization values.")
    if not reliability.passed:
        caveats += (" The reliability check FAILED: the final ensemble still "
                    "remembers its initialization, so undetected errors may "
                    "simply not have surfaced yet. Increase the iteration "
                    "budget or switch kernels before trusting a clean verdict.")

    return DiagnosticReport(
        kernel=kind,
        dimension=d,
        n_chains=n_chains,
        n_iterations=n_iters,
        alpha=config.alpha,
        seed=config.seed,
        leapfrog_steps=config.leapfrog_steps,
        initial_step_size=h0,
        final_step_size=adapt.step_size,
        step_size_scale=config.step_size_scale,
        target_acceptance_rate=a_star,
        acceptance_history=list(adapt.acceptance_history),
        functionals=functionals,
        reliability=reliability,
        gradient_budget=GradientBudget(init_grads, iter_grads),
        caveats=caveats,
        wall_time=time.perf_counter() - start_time,
        traces=trace_rows,
    )


def _resolve_specs(config: RunConfig, dimension: int) -> list[FunctionalSpec]:
    if config.functionals is None:
        return default_functionals(dimension)
    specs = []
    for item in config.functionals:
        spec = item if isinstance(item, FunctionalSpec) else parse_functional(str(item))
        if spec.coordinate is not None and not 0 <= spec.coordinate < dimension:
            raise ValueError(f"functional {spec.tag} is out of range for dimension {dimension}")
        specs.append(spec)
    if not specs:
        raise ValueError("functionals list is empty")
    return specs


def _resolve_scalar_functions(specs, config: RunConfig, target: TargetModel) -> dict:
    fns = {}
    for spec in specs:
        if spec.kind != "scalar":
            continue
        custom = config.scalar_functions or {}
        if spec.name in custom:
            fns[spec.name] = custom[spec.name]
        elif spec.name == "target_log_density":
            fns[spec.name] = target.log_density
        else:
            known = sorted(set(custom) | set(BUILTIN_SCALAR_FUNCTIONS))
            raise ValueError(f"unknown scalar functional {spec.name!r}; known: {known}")
    return fns


def _validate_quantile_feasibility(specs, n_chains: int, alpha: float):
    levels = [(spec.p, spec.tag) for spec in specs if spec.kind == "quantile"]
    if any(spec.kind == "scalar" for spec in specs):
        levels.append((0.5, "scalar median"))
    for p, tag in levels:
        lo = binomial_quantile(alpha / 2.0, n_chains, p)
        hi = binomial_quantile(1.0 - alpha / 2.0, n_chains, p) + 1
        if lo < 1 or hi > n_chains:
            raise ValueError(
                f"{n_chains} chains are too few for a level {1 - alpha:.3g} interval "
                f"on {tag}; increase chains or relax alpha")


def _checkpoint_iterations(trace_every: int, n_iters: int) -> set:
    if trace_every < 1:
        return set()
    ts = set(range(0, n_iters + 1, trace_every))
    ts.add(0)
    ts.add(n_iters)
    return ts


def _gather_noise(kind: str, streams, dimension: int):
    """Collects each chain's step randomness in canonical per-chain order."""
    n = len(streams)
    eps = np.empty((n, dimension))
    accept_u = np.empty(n)
    if kind == "barker":
        sign_u = np.empty((n, dimension))
        for j, s in enumerate(streams):
            eps[j] = s.standard_normal(dimension)
            u = s.random(dimension + 1)
            sign_u[j] = u[:dimension]
            accept_u[j] = u[dimension]
        return eps, sign_u, accept_u
    for j, s in enumerate(streams):
        eps[j] = s.standard_normal(dimension)
        accept_u[j] = s.random()
    return eps, None, accept_u


def _advance_blocks(kind, x, logpi, grad_cached, eps, sign_u, accept_u, h, pre,
                    target, n_leapfrog, executor):
    """One synchronized ensemble iteration over the fixed block schedule."""
    n = x.shape[0]
    new_x = np.empty_like(x)
    new_logpi = np.empty(n)
    new_grad = np.empty_like(x) if grad_cached is not None else None
    alphas = np.empty(n)
    blocks = [slice(b, min(b + _BLOCK, n)) for b in range(0, n, _BLOCK)]

    def do_block(sl):
        bx, blogpi, bgrad, balpha = step_batch(
            kind, x[sl], logpi[sl],
            None if grad_cached is None else grad_cached[sl],
            eps[sl], None if sign_u is None else sign_u[sl],
            accept_u[sl], h, pre, target, n_leapfrog)
        new_x[sl] = bx
        new_logpi[sl] = blogpi
        if new_grad is not None:
            new_grad[sl] = bgrad
        alphas[sl] = balpha

    if executor is None:
        for sl in blocks:
            do_block(sl)
    else:
        list(executor.map(do_block, blocks))
    return new_x, new_logpi, new_grad, alphas


def _functional_results(specs, states, x0, approximation: Approximation,
                        alpha: float, scalar_fns: dict) -> list[FunctionalResult]:
    results = []
    ln10 = math.log(10.0)
    for spec in specs:
        if spec.kind == "mean":
            i = spec.coordinate
            mu0 = float(approximation.means[i])
            sd0 = float(approximation.sds[i])
            ci = mean_difference_ci(states[:, i], mu0, alpha, functional_tag=spec.tag)
            res = error_lower_bound(ci)
            results.append(FunctionalResult(
                spec, res, "approximation", mu0,
                normalized={"bound_relative": res.bound / sd0}))
        elif spec.kind == "variance":
            i = spec.coordinate
            sd0 = float(approximation.sds[i])
            ci = log_variance_ratio_ci(states[:, i], sd0, alpha, functional_tag=spec.tag)
            res = error_lower_bound(ci)
            results.append(FunctionalResult(
                spec, res, "approximation", sd0 * sd0,
                normalized={"bound_2log10": res.bound / ln10}))
        elif spec.kind == "quantile":
            i, p = spec.coordinate, spec.p
            if approximation.has_quantiles:
                q0 = approximation.quantile(i, p)
                side = "approximation"
            else:
                q0 = sample_quantile(x0[:, i], p)
                side = "initial_samples"
            ci = quantile_difference_ci(states[:, i], p, q0, alpha, functional_tag=spec.tag)
            res = error_lower_bound(ci)
            results.append(FunctionalResult(spec, res, side, q0))
        else:
            fn = scalar_fns[spec.name]
            v0 = np.atleast_1d(np.asarray(fn(x0), dtype=float))
            vt = np.atleast_1d(np.asarray(fn(states), dtype=float))
            mean_res, median_res = scalar_functional_diagnostics(
                v0, vt, alpha, name=spec.name)
            results.append(FunctionalResult(spec, mean_res, "initial_samples",
                                            float(v0.mean())))
            results.append(FunctionalResult(spec, median_res, "initial_samples",
                                            sample_quantile(v0, 0.5)))
    return results
