"""Sublinear-expectation evaluators.

One-step expectations are exact maxima over finite control sets.  The value of
a weighted sum is computed by backward recursion over the independence
structure: each new pair is independent from the past, so the value function
satisfies

    V_n(s) = phi(s)
    V_i(s) = max over (sigma, mu) of
             1/2 * [ V_{i+1}(s + a_{i+1} sigma + b_{i+1} mu)
                   + V_{i+1}(s - a_{i+1} sigma + b_{i+1} mu) ]

with a_i = w_i / sqrt(W_n) and b_i = w_i^2 / W_n.  The tree evaluator runs
this recursion exactly (states memoized); the grid evaluator stores V_i on a
uniform grid with piecewise-linear interpolation, which preserves the
monotone max-of-averages structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np

from .errors import CapacityError, InvalidSpecError
from .gpde import GridSpec
from .model import (
    SequenceSpec,
    TestFunction,
    VariableKind,
    VariableSpec,
    make_two_point_pair,
    params_at,
)

N_MAX_TREE = 20

PayoffLike = Union[TestFunction, Callable[[float], float]]
VariableSource = Union[None, VariableSpec, Callable[[int], VariableSpec]]


class WeightKind(str, Enum):
    ONES = "ones"
    IDENTITY = "identity"
    SQRT = "sqrt"
    GEOMETRIC = "geometric"
    CUSTOM_TABLE = "custom_table"


@dataclass(frozen=True)
class WeightSpec:
    """Weight sequence w_i.  alpha is the moment exponent used by the
    weight-ratio statistic; alpha = 1 is outside the theorem's (0,1) range and is
    flagged as a diagnostic value."""

    generator: WeightKind
    q: float = 1.0
    alpha: float = 0.5
    table: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "generator", WeightKind(self.generator))
        object.__setattr__(self, "table", tuple(float(w) for w in self.table))
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidSpecError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.generator is WeightKind.GEOMETRIC and self.q <= 0:
            raise InvalidSpecError(f"geometric ratio q must be > 0, got {self.q}")
        if self.generator is WeightKind.CUSTOM_TABLE:
            if not self.table:
                raise InvalidSpecError("custom_table weights need a nonempty table")
            if any(w == 0.0 for w in self.table):
                raise InvalidSpecError("zero weights are excluded")

    @property
    def alpha_is_diagnostic(self) -> bool:
        return self.alpha == 1.0


def weights_array(spec: WeightSpec, n: int) -> np.ndarray:
    """w_1..w_n as a float array."""
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    i = np.arange(1, n + 1, dtype=float)
    kind = spec.generator
    if kind is WeightKind.ONES:
        return np.ones(n)
    if kind is WeightKind.IDENTITY:
        return i
    if kind is WeightKind.SQRT:
        return np.sqrt(i)
    if kind is WeightKind.GEOMETRIC:
        return spec.q**i
    if n > len(spec.table):
        raise InvalidSpecError(
            f"requested {n} weights but custom table has {len(spec.table)}"
        )
    return np.asarray(spec.table[:n])


def step_coefficients(spec: WeightSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(a_i, b_i) = (w_i/sqrt(W_n), w_i^2/W_n); the b_i sum to 1."""
    w = weights_array(spec, n)
    w_sq = w * w
    big_w = math.fsum(w_sq)
    return w / math.sqrt(big_w), w_sq / big_w


class DPMethod(str, Enum):
    TREE_EXACT = "tree_exact"
    GRID = "grid"


@dataclass(frozen=True)
class DPResult:
    value: float
    n: int
    method: DPMethod
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InvalidSpecError(f"DP value must be finite, got {self.value}")


def _as_callable(fn: PayoffLike) -> Callable:
    return fn


def expect_single(var: VariableSpec, fn: PayoffLike) -> float:
    """Exact one-step sublinear expectation of phi under the ambiguity set.

    joint_pair is read through the collapsed payoff phi(x + y).
    """
    phi = _as_callable(fn)
    if var.kind is VariableKind.MAXIMAL_MEAN:
        return max(float(phi(mu)) for mu in var.mu_set)
    if var.kind is VariableKind.RADEMACHER_VOL:
        return max(0.5 * (float(phi(s)) + float(phi(-s))) for s in var.sigma_set)
    return max(
        0.5 * (float(phi(s + m)) + float(phi(-s + m)))
        for s, m in var.controls()
    )


def expect_pair(var: VariableSpec, fn2: Callable[[float, float], float]) -> float:
    """One-step expectation of a two-argument payoff f(X, Y) of the pair."""
    return max(
        0.5 * (float(fn2(s, m)) + float(fn2(-s, m))) for s, m in var.controls()
    )


def expect_nested(
    outer: VariableSpec,
    inner: VariableSpec,
    fn2: Callable[[float, float], float],
) -> float:
    """E[f(X, Y)] with Y (inner) independent from X (outer), computed as the
    nested expectation E[ E[f(x, Y)] at x = X ].  The order matters and is
    fixed to inner-independent-from-outer."""

    def psi(x: float) -> float:
        return expect_single(inner, lambda y: fn2(x, y))

    return expect_single(outer, psi)


def _resolve_variables(seq: SequenceSpec, variables: VariableSource) -> Callable[[int], VariableSpec]:
    if variables is None:
        return lambda i: make_two_point_pair(params_at(seq, i))
    if isinstance(variables, VariableSpec):
        return lambda i: variables
    return variables


def expect_weighted_sum_tree(
    seq: SequenceSpec,
    weights: WeightSpec,
    fn: PayoffLike,
    n: int,
    *,
    variables: VariableSource = None,
    n_max_tree: int = N_MAX_TREE,
) -> DPResult:
    """Exact E[phi(S_n)] by memoized backward recursion over the +/- tree.

    Exact only because the control sets are finite; cost grows with the number
    of distinct partial-sum states, hence the hard depth cap.
    """
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    if n > n_max_tree:
        raise CapacityError(
            f"tree evaluator capped at n={n_max_tree} (2^n value nodes); "
            f"got n={n} — use the grid evaluator"
        )
    a, b = step_coefficients(weights, n)
    var_at = _resolve_variables(seq, variables)
    step_controls = [var_at(i + 1).controls() for i in range(n)]
    # lex-descending so ties within 1e-14 resolve to the largest (sigma, mu)
    step_controls = [sorted(c, reverse=True) for c in step_controls]
    phi = _as_callable(fn)

    memo: list[dict] = [dict() for _ in range(n)]

    def value(i: int, s: float) -> float:
        if i == n:
            return float(phi(s))
        key = round(s, 12)
        level = memo[i]
        hit = level.get(key)
        if hit is not None:
            return hit
        best = -math.inf
        for sig, mu in step_controls[i]:
            shift = b[i] * mu
            v = 0.5 * (
                value(i + 1, s + a[i] * sig + shift)
                + value(i + 1, s - a[i] * sig + shift)
            )
            if v > best:
                best = v
        level[key] = best
        return best

    val = value(0, 0.0)
    states = sum(len(m) for m in memo)
    return DPResult(val, n, DPMethod.TREE_EXACT, {"states": states})


def reachable_bound(
    seq: SequenceSpec,
    weights: WeightSpec,
    n: int,
    variables: VariableSource = None,
) -> float:
    """Worst-case |S_n| over all controls and noise signs."""
    a, b = step_coefficients(weights, n)
    var_at = _resolve_variables(seq, variables)
    return math.fsum(
        abs(a[i]) * var_at(i + 1).sigma_max + b[i] * var_at(i + 1).mu_abs_max
        for i in range(n)
    )


def expect_weighted_sum_grid(
    seq: SequenceSpec,
    weights: WeightSpec,
    fn: PayoffLike,
    n: int,
    grid: GridSpec,
    *,
    variables: VariableSource = None,
    boundary_fraction_limit: float = 0.05,
) -> DPResult:
    """Approximate E[phi(S_n)]: same recursion as the tree evaluator but with
    the value function stored on a uniform grid and read back through
    piecewise-linear (monotonicity-preserving) interpolation."""
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    bound = reachable_bound(seq, weights, n, variables)
    if grid.L < bound:
        raise InvalidSpecError(
            f"grid half-width L={grid.L} does not cover the reachable bound "
            f"{bound:.6g}; enlarge L"
        )
    a, b = step_coefficients(weights, n)
    var_at = _resolve_variables(seq, variables)
    phi = _as_callable(fn)
    x = grid.nodes()
    v = np.asarray(phi(x), dtype=float)
    if v.shape != x.shape:  # constant payoff
        v = np.full_like(x, float(phi(0.0)))

    boundary_hits = 0
    total_queries = 0
    policy_counts: dict[tuple[float, float], int] = {}
    for i in range(n - 1, -1, -1):
        controls = sorted(var_at(i + 1).controls(), reverse=True)
        cand = np.empty((len(controls), x.size))
        for c, (sig, mu) in enumerate(controls):
            up = x + a[i] * sig + b[i] * mu
            dn = x - a[i] * sig + b[i] * mu
            boundary_hits += int(np.count_nonzero(np.abs(up) > grid.L))
            boundary_hits += int(np.count_nonzero(np.abs(dn) > grid.L))
            total_queries += 2 * x.size
            cand[c] = 0.5 * (np.interp(up, x, v) + np.interp(dn, x, v))
        choice = np.argmax(cand, axis=0)  # first max = lex-largest control
        for c, (sig, mu) in enumerate(controls):
            cnt = int(np.count_nonzero(choice == c))
            if cnt:
                key = (sig, mu)
                policy_counts[key] = policy_counts.get(key, 0) + cnt
        v = cand[choice, np.arange(x.size)]

    value = float(np.interp(0.0, x, v))
    fraction = boundary_hits / max(total_queries, 1)
    diagnostics = {
        "dx": grid.dx,
        "nx": grid.nx,
        "reachable_bound": bound,
        "interp_error_scale": n * grid.dx**2 / 8.0,
        "boundary_hits": boundary_hits,
        "boundary_fraction": fraction,
        "unreliable": fraction > boundary_fraction_limit,
        "policy_counts": {f"{s:g},{m:g}": c for (s, m), c in sorted(policy_counts.items())},
    }
    return DPResult(value, n, DPMethod.GRID, diagnostics)


# --- axiom suite -----------------------------------------------------------


@dataclass
class AxiomReport:
    """Worst-case residuals over randomized trials; positive means violation
    except for homogeneity/constant/cash which are absolute defects."""

    trials: int
    monotonicity: float = 0.0
    constant_preserving: float = 0.0
    subadditivity: float = 0.0
    homogeneity: float = 0.0
    cash_invariance: float = 0.0
    failures: list = field(default_factory=list)

    def worst(self) -> float:
        return max(
            self.monotonicity,
            self.constant_preserving,
            self.subadditivity,
            self.homogeneity,
            self.cash_invariance,
        )

    def passed(self, tol: float = 1e-9) -> bool:
        return self.worst() <= tol


def axiom_suite(
    evaluator: Callable[[Callable], float],
    catalog: Sequence[PayoffLike],
    trials: int,
    seed: int,
    *,
    support_radius: float = 20.0,
) -> AxiomReport:
    """Randomized check of the sublinear-expectation axioms on an evaluator.

    The evaluator maps a payoff callable to a real number.  Monotonicity is
    checked on pairs whose pointwise ordering holds on a dense sample of
    [-support_radius, support_radius] (the reachable support must be inside).
    """
    if trials < 1:
        raise InvalidSpecError(f"trials must be >= 1, got {trials}")
    if not catalog:
        raise InvalidSpecError("catalog must be nonempty")
    rng = np.random.default_rng(seed)
    xs = np.linspace(-support_radius, support_radius, 2001)
    report = AxiomReport(trials=trials)

    def note(kind: str, residual: float, detail: str):
        if kind == "monotonicity":
            report.monotonicity = max(report.monotonicity, residual)
        elif kind == "constant":
            report.constant_preserving = max(report.constant_preserving, residual)
        elif kind == "subadditivity":
            report.subadditivity = max(report.subadditivity, residual)
        elif kind == "homogeneity":
            report.homogeneity = max(report.homogeneity, residual)
        else:
            report.cash_invariance = max(report.cash_invariance, residual)
        if residual > 1e-9:
            report.failures.append((kind, residual, detail))

    for _ in range(trials):
        phi = catalog[rng.integers(len(catalog))]
        psi = catalog[rng.integers(len(catalog))]
        lam = float(rng.uniform(0.0, 3.0))
        c = float(rng.uniform(-5.0, 5.0))

        e_phi = evaluator(phi)
        e_psi = evaluator(psi)

        note("constant", abs(evaluator(lambda s: c) - c), f"c={c}")
        note(
            "subadditivity",
            evaluator(lambda s: phi(s) + psi(s)) - (e_phi + e_psi),
            f"phi={phi!r} psi={psi!r}",
        )
        note(
            "homogeneity",
            abs(evaluator(lambda s: lam * phi(s)) - lam * e_phi),
            f"lam={lam}",
        )
        note(
            "cash",
            abs(evaluator(lambda s: phi(s) + c) - (e_phi + c)),
            f"c={c}",
        )
        # dominance checked pointwise on the sampled support
        if np.all(np.asarray(phi(xs)) >= np.asarray(psi(xs))):
            note("monotonicity", e_psi - e_phi, f"phi={phi!r} >= psi={psi!r}")
        shifted = lambda s: phi(s) - abs(c)
        note("monotonicity", evaluator(shifted) - e_phi, f"phi - |c|, c={c}")

    return report
