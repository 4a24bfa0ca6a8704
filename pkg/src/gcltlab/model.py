"""Concrete ambiguity sets, the test-function catalog, and parameter sequences.

The random variables are represented by *finite* control sets: a volatility
control sigma with symmetric +/- noise and a mean control mu.  Only the four
extreme moments matter for the limit, so the canonical pair uses the two-point
sets {sigma_lo, sigma_hi} x {mu_lo, mu_hi}; richer finite sets exist to probe
universality of the limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import InvalidSpecError
from .gcore import GParams


class VariableKind(str, Enum):
    RADEMACHER_VOL = "rademacher_vol"
    MAXIMAL_MEAN = "maximal_mean"
    JOINT_PAIR = "joint_pair"


@dataclass(frozen=True)
class VariableSpec:
    """Finite ambiguity set for one step: volatility controls and/or mean controls."""

    kind: VariableKind
    sigma_set: tuple[float, ...] = ()
    mu_set: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sigma_set", tuple(float(s) for s in self.sigma_set))
        object.__setattr__(self, "mu_set", tuple(float(m) for m in self.mu_set))
        kind = VariableKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if any(s < 0 for s in self.sigma_set):
            raise InvalidSpecError("sigma_set entries must be >= 0")
        if list(self.sigma_set) != sorted(self.sigma_set):
            raise InvalidSpecError("sigma_set must be ascending")
        if list(self.mu_set) != sorted(self.mu_set):
            raise InvalidSpecError("mu_set must be ascending")
        if kind is VariableKind.RADEMACHER_VOL:
            if not self.sigma_set or self.mu_set:
                raise InvalidSpecError("rademacher_vol needs sigma_set only")
        elif kind is VariableKind.MAXIMAL_MEAN:
            if not self.mu_set or self.sigma_set:
                raise InvalidSpecError("maximal_mean needs mu_set only")
        else:
            if not self.sigma_set or not self.mu_set:
                raise InvalidSpecError("joint_pair needs both sigma_set and mu_set")

    @property
    def sigma_max(self) -> float:
        return max(self.sigma_set) if self.sigma_set else 0.0

    @property
    def mu_abs_max(self) -> float:
        return max(abs(m) for m in self.mu_set) if self.mu_set else 0.0

    def controls(self) -> list[tuple[float, float]]:
        """All (sigma, mu) control pairs, missing component filled with 0."""
        sigmas = self.sigma_set or (0.0,)
        mus = self.mu_set or (0.0,)
        return [(s, m) for s in sigmas for m in mus]


def make_two_point_pair(params: GParams) -> VariableSpec:
    """Canonical two-point ambiguity set realizing the four moments of params."""
    sigma_set = sorted({params.sigma_lo, params.sigma_hi})
    mu_set = sorted({params.mu_lo, params.mu_hi})
    return VariableSpec(VariableKind.JOINT_PAIR, tuple(sigma_set), tuple(mu_set))


# --- test-function catalog -------------------------------------------------

_CATALOG_NAMES = (
    "cos_k",
    "sin_k",
    "quad",
    "neg_quad",
    "linear",
    "clip_linear",
    "smooth_step",
    "arctan_s",
)

# Reference interval on which Lipschitz constants of the unbounded entries are
# quoted (the bounded entries have global constants).
LIP_REFERENCE_HALFWIDTH = 100.0


@dataclass(frozen=True)
class TestFunction:
    """Catalog payoff with Lipschitz/boundedness metadata.  Callable."""

    name: str
    parameters: tuple[float, ...] = ()
    lipschitz_const: float = 1.0
    bounded: bool = True
    bound: float = math.inf

    def __post_init__(self):
        if self.name not in _CATALOG_NAMES:
            raise InvalidSpecError(f"unknown test function {self.name!r}")
        object.__setattr__(self, "parameters", tuple(float(p) for p in self.parameters))
        if self.name == "smooth_step" and self.parameters[1] <= 0:
            raise InvalidSpecError("smooth_step width must be > 0")

    def __call__(self, x):
        return eval_phi(self, x)


def eval_phi(fn: TestFunction, x):
    """Pointwise evaluation; works on scalars and numpy arrays."""
    import numpy as np

    name, par = fn.name, fn.parameters
    if name == "cos_k":
        return np.cos(par[0] * x)
    if name == "sin_k":
        return np.sin(par[0] * x)
    if name == "quad":
        return np.square(x)
    if name == "neg_quad":
        return -np.square(x)
    if name == "linear":
        return x if np.isscalar(x) else np.asarray(x, dtype=float)
    if name == "clip_linear":
        m = par[0]
        return np.clip(x, -m, m)
    if name == "smooth_step":
        a, eps = par
        return 0.5 * (1.0 + np.tanh((x - a) / eps))
    if name == "arctan_s":
        return np.arctan(par[0] * x)
    raise InvalidSpecError(f"unknown test function {name!r}")


def cos_k(k: float = 1.0) -> TestFunction:
    return TestFunction("cos_k", (k,), lipschitz_const=abs(k), bounded=True, bound=1.0)


def sin_k(k: float = 1.0) -> TestFunction:
    return TestFunction("sin_k", (k,), lipschitz_const=abs(k), bounded=True, bound=1.0)


def quad() -> TestFunction:
    return TestFunction(
        "quad", (), lipschitz_const=2 * LIP_REFERENCE_HALFWIDTH, bounded=False
    )


def neg_quad() -> TestFunction:
    return TestFunction(
        "neg_quad", (), lipschitz_const=2 * LIP_REFERENCE_HALFWIDTH, bounded=False
    )


def linear() -> TestFunction:
    return TestFunction("linear", (), lipschitz_const=1.0, bounded=False)


def clip_linear(m: float = 1.0) -> TestFunction:
    return TestFunction("clip_linear", (m,), lipschitz_const=1.0, bounded=True, bound=m)


def smooth_step(center: float = 0.0, width: float = 0.1) -> TestFunction:
    if width <= 0:
        raise InvalidSpecError("smooth_step width must be > 0")
    return TestFunction(
        "smooth_step",
        (center, width),
        lipschitz_const=0.5 / width,
        bounded=True,
        bound=1.0,
    )


def arctan_s(s: float = 1.0) -> TestFunction:
    return TestFunction("arctan_s", (s,), lipschitz_const=abs(s), bounded=True, bound=math.pi / 2)


_FACTORIES = {
    "cos_k": cos_k,
    "sin_k": sin_k,
    "quad": quad,
    "neg_quad": neg_quad,
    "linear": linear,
    "clip_linear": clip_linear,
    "smooth_step": smooth_step,
    "arctan_s": arctan_s,
}


def phi_by_name(name: str, parameters: Sequence[float] = ()) -> TestFunction:
    """Build a catalog entry by name, validating the parameter count."""
    if name not in _FACTORIES:
        raise InvalidSpecError(f"unknown test function {name!r}")
    return _FACTORIES[name](*parameters)


def default_catalog() -> list[TestFunction]:
    """The bounded-Lipschitz slice of the catalog plus the moment probes."""
    return [
        cos_k(1.0),
        sin_k(2.0),
        clip_linear(2.0),
        smooth_step(0.3, 0.1),
        arctan_s(1.0),
        quad(),
        neg_quad(),
        linear(),
    ]


# --- parameter sequences ---------------------------------------------------


class SequenceKind(str, Enum):
    CONSTANT = "constant"
    HARMONIC_DRIFT = "harmonic_drift"
    ALTERNATING_DECAY = "alternating_decay"
    CUSTOM_TABLE = "custom_table"


@dataclass(frozen=True)
class SequenceSpec:
    """Per-index moment parameters settling towards a base GParams.

    harmonic_drift perturbs the *upper* parameters, sigma_hi^2 and mu_hi, by
    drift_scale/i; the lower parameters stay at base so the ordering
    invariants cannot be violated by the drift.  alternating_decay applies the
    signed perturbation drift_scale*(-1)^(i+1)/i instead.
    """

    generator: SequenceKind
    base: GParams
    drift_scale: float = 0.0
    table: tuple[GParams, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "generator", SequenceKind(self.generator))
        object.__setattr__(self, "table", tuple(self.table))
        if self.generator is SequenceKind.CUSTOM_TABLE and not self.table:
            raise InvalidSpecError("custom_table sequence needs a nonempty table")


def params_at(seq: SequenceSpec, i: int) -> GParams:
    """Moment parameters of the i-th variable (1-based)."""
    if i < 1:
        raise InvalidSpecError(f"sequence index must be >= 1, got {i}")
    kind, base = seq.generator, seq.base
    if kind is SequenceKind.CONSTANT:
        return base
    if kind is SequenceKind.CUSTOM_TABLE:
        if i > len(seq.table):
            raise InvalidSpecError(
                f"sequence index {i} out of range for table of length {len(seq.table)}"
            )
        return seq.table[i - 1]
    if kind is SequenceKind.HARMONIC_DRIFT:
        dev = seq.drift_scale / i
    else:  # alternating_decay
        dev = seq.drift_scale * (1.0 if i % 2 == 1 else -1.0) / i
    var_hi = base.sigma_hi**2 + dev
    if var_hi < base.sigma_lo**2:
        raise InvalidSpecError(
            f"drifted upper variance {var_hi} falls below sigma_lo^2 at index {i}"
        )
    mu_hi = base.mu_hi + dev
    if mu_hi < base.mu_lo:
        raise InvalidSpecError(f"drifted mu_hi {mu_hi} falls below mu_lo at index {i}")
    return GParams(base.mu_lo, mu_hi, base.sigma_lo, math.sqrt(var_hi))


def distributions_equal(
    a: VariableSpec,
    b: VariableSpec,
    catalog: Sequence[TestFunction],
    tol: float,
) -> bool:
    """Necessary test for equality in distribution: one-step expectations agree
    within tol on every catalog entry.  Agreement on a finite catalog does not
    prove equality on all of C_l,lip; disagreement disproves it.
    """
    if tol <= 0:
        raise InvalidSpecError("tol must be > 0")
    if not catalog:
        raise InvalidSpecError("catalog must be nonempty")
    from .engine import expect_single

    return all(abs(expect_single(a, fn) - expect_single(b, fn)) <= tol for fn in catalog)
