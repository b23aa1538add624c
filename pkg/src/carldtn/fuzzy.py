"""Mamdani fuzzy inference and the four context controllers.

Inference uses triangular membership functions, ``min`` implication,
``max`` aggregation and centre-of-gravity defuzzification over a fixed grid
of 201 points on ``[0, 1]``.  Controllers are immutable and vectorised so a
whole buffer of messages can be scored in one call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .errors import DegenerateSet

N_SAMPLES = 201
GRID = np.linspace(0.0, 1.0, N_SAMPLES)
# Trapezoid weights: end samples count half.  A plain sum over-weights the
# edges and is off by ~1.5e-3 for sets with mass at 0 or 1.
_WEIGHTS = np.ones(N_SAMPLES)
_WEIGHTS[0] = _WEIGHTS[-1] = 0.5
_WX = _WEIGHTS * GRID


@dataclass(frozen=True)
class Triangle:
    """Triangular membership function with breakpoints ``a <= b <= c``.

    ``a == b`` or ``b == c`` gives a shoulder (the peak sits on the edge).
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c):
            raise ValueError(f"breakpoints must satisfy a <= b <= c, got {self}")

    def __call__(self, x: float) -> float:
        a, b, c = self.a, self.b, self.c
        if x < a or x > c:
            return 0.0
        if x == b:
            return 1.0
        if x < b:
            return (x - a) / (b - a)
        return (c - x) / (c - b)

    def sample(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros_like(xs)
        a, b, c = self.a, self.b, self.c
        if b > a:
            rising = (xs >= a) & (xs < b)
            out[rising] = (xs[rising] - a) / (b - a)
        if c > b:
            falling = (xs > b) & (xs <= c)
            out[falling] = (c - xs[falling]) / (c - b)
        out[xs == b] = 1.0
        return out


@dataclass(frozen=True)
class FuzzyVariable:
    name: str
    terms: tuple[tuple[str, Triangle], ...]

    def __post_init__(self):
        labels = [label for label, _ in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate term labels in {self.name}: {labels}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.terms)

    def term(self, label: str) -> Triangle:
        for name, mf in self.terms:
            if name == label:
                return mf
        raise KeyError(f"{self.name} has no term {label!r}")

    def peak(self, label: str) -> float:
        return self.term(label).b

    def degrees(self, xs: np.ndarray) -> np.ndarray:
        """Membership degrees as an ``(len(xs), n_terms)`` array."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))[:, None]
        a, c, inv_l, off_l, inv_r, off_r = self._coeffs
        left = (xs - a) * inv_l + off_l
        right = (c - xs) * inv_r + off_r
        mu = np.minimum(np.minimum(left, right), 1.0)
        return np.where((xs >= a) & (xs <= c), np.maximum(mu, 0.0), 0.0)

    @property
    def _coeffs(self):
        # Shoulder sides (zero-width ramps) become a constant 1.
        cached = self.__dict__.get("_coeff_cache")
        if cached is None:
            mfs = [mf for _, mf in self.terms]
            a = np.array([m.a for m in mfs])
            b = np.array([m.b for m in mfs])
            c = np.array([m.c for m in mfs])
            flat_l, flat_r = b == a, c == b
            inv_l = np.where(flat_l, 0.0, 1.0 / np.where(flat_l, 1.0, b - a))
            inv_r = np.where(flat_r, 0.0, 1.0 / np.where(flat_r, 1.0, c - b))
            cached = (a, c, inv_l, flat_l.astype(float), inv_r, flat_r.astype(float))
            object.__setattr__(self, "_coeff_cache", cached)
        return cached


def fuzzify(x: float, var: FuzzyVariable) -> list[tuple[str, float]]:
    """Return ``(label, degree)`` for every term of ``var`` at ``x``."""
    return [(label, mf(x)) for label, mf in var.terms]


def defuzzify_cog(samples: np.ndarray, xs: np.ndarray = GRID) -> float:
    """Centroid of a sampled fuzzy set (trapezoid-weighted sums over ``xs``)."""
    samples = np.asarray(samples, dtype=float)
    w = np.ones(len(xs))
    w[0] = w[-1] = 0.5
    total = samples @ w
    if total <= 0.0:
        raise DegenerateSet("output set is empty (no rule fired)")
    return float(samples @ (w * xs) / total)


@njit(cache=True)
def _degrees_into(x, co, out):
    # co rows: a, c, inv_l, off_l, inv_r, off_r
    for t in range(co.shape[1]):
        if x < co[0, t] or x > co[1, t]:
            out[t] = 0.0
        else:
            mu = min(min((x - co[0, t]) * co[2, t] + co[3, t],
                         (co[1, t] - x) * co[4, t] + co[5, t]), 1.0)
            out[t] = max(mu, 0.0)


@njit(cache=True)
def _crisp_kernel(x1, x2, co1, co2, rules, out_mf, support, w, wx):
    # support[:, k] lists the (at most two) output terms non-zero at grid
    # point k; index n_out points at an all-zero padding row of out_mf.
    n = x1.shape[0]
    n_out = out_mf.shape[0] - 1
    ri1, ri2, rout = rules[0], rules[1], rules[2]
    d1 = np.empty(co1.shape[1])
    d2 = np.empty(co2.shape[1])
    s = np.zeros(n_out + 1)
    res = np.empty(n)
    # grid span of each output term; points outside every fired span add 0
    lo = np.full(n_out, out_mf.shape[1])
    hi = np.full(n_out, -1)
    for t in range(n_out):
        for k in range(out_mf.shape[1]):
            if out_mf[t, k] > 0.0:
                lo[t] = min(lo[t], k)
                hi[t] = k
    for i in range(n):
        _degrees_into(min(max(x1[i], 0.0), 1.0), co1, d1)
        _degrees_into(min(max(x2[i], 0.0), 1.0), co2, d2)
        s[:] = 0.0
        for r in range(ri1.shape[0]):
            v = min(d1[ri1[r]], d2[ri2[r]])
            if v > s[rout[r]]:
                s[rout[r]] = v
        k0 = out_mf.shape[1]
        k1 = -1
        for t in range(n_out):
            if s[t] > 0.0:
                k0 = min(k0, lo[t])
                k1 = max(k1, hi[t])
        num = 0.0
        den = 0.0
        for k in range(k0, k1 + 1):
            ta = support[0, k]
            tb = support[1, k]
            m = min(s[ta], out_mf[ta, k])
            v = min(s[tb], out_mf[tb, k])
            if v > m:
                m = v
            num += m * wx[k]
            den += m * w[k]
        res[i] = num / den if den > 0.0 else np.nan
    return res


class RuleBase:
    """Two-input, one-output Mamdani rule base.

    ``rules`` lists ``(input1 label, input2 label, output label)`` and must
    cover every combination of input terms exactly once.
    """

    def __init__(
        self,
        name: str,
        in1: FuzzyVariable,
        in2: FuzzyVariable,
        output: FuzzyVariable,
        rules: Sequence[tuple[str, str, str]],
    ):
        self.name = name
        self.in1 = in1
        self.in2 = in2
        self.output = output
        self.rules = tuple(tuple(r) for r in rules)

        combos = [(r[0], r[1]) for r in self.rules]
        expected = {(p, q) for p in in1.labels for q in in2.labels}
        if len(combos) != len(set(combos)) or set(combos) != expected:
            raise ValueError(f"{name}: rules must cover each input combination exactly once")
        for r in self.rules:
            output.term(r[2])

        self._i1 = np.array([in1.labels.index(r[0]) for r in self.rules])
        self._i2 = np.array([in2.labels.index(r[1]) for r in self.rules])
        self._out = np.array([output.labels.index(r[2]) for r in self.rules])
        # Rules sorted by consequent so a grouped max gives per-term strength.
        self._order = np.argsort(self._out, kind="stable")
        sorted_out = self._out[self._order]
        self._present, self._starts = np.unique(sorted_out, return_index=True)
        self._dense = len(self._present) == len(output.terms)
        self._triples = tuple(zip(self._i1.tolist(), self._i2.tolist(), self._out.tolist()))
        # (n_out_terms, N_SAMPLES)
        self._out_mf = np.stack([mf.sample(GRID) for _, mf in output.terms])
        n_out = len(output.terms)
        padded = np.vstack([self._out_mf, np.zeros(N_SAMPLES)])
        support = np.full((2, N_SAMPLES), n_out, dtype=np.int64)
        for k in range(N_SAMPLES):
            nz = np.flatnonzero(self._out_mf[:, k] > 0.0)
            if len(nz) > 2:
                raise ValueError(f"{name}: more than two output terms overlap")
            support[:len(nz), k] = nz
        self._kernel_args = (np.vstack(in1._coeffs), np.vstack(in2._coeffs),
                             np.vstack([self._i1, self._i2, self._out]).astype(np.int64),
                             padded, support, _WEIGHTS, _WX)

    def __repr__(self):
        return f"RuleBase({self.name!r}, {len(self.rules)} rules)"

    def term_strengths(self, x1, x2) -> np.ndarray:
        """Firing strength per output term, shape ``(n, n_out_terms)``."""
        d1 = self.in1.degrees(np.clip(x1, 0.0, 1.0))
        d2 = self.in2.degrees(np.clip(x2, 0.0, 1.0))
        rule = np.minimum(d1[:, self._i1], d2[:, self._i2])[:, self._order]
        grouped = np.maximum.reduceat(rule, self._starts, axis=1)
        if self._dense:
            return grouped
        out = np.zeros((rule.shape[0], len(self.output.terms)))
        out[:, self._present] = grouped
        return out

    def infer_batch(self, x1, x2) -> np.ndarray:
        """Aggregated output sets, shape ``(n, N_SAMPLES)``."""
        s = self.term_strengths(x1, x2)
        return np.minimum(self._out_mf[None, :, :], s[:, :, None]).max(axis=1)

    def infer(self, x1: float, x2: float) -> np.ndarray:
        return self.infer_batch([x1], [x2])[0]

    def crisp_batch(self, x1, x2) -> np.ndarray:
        x1 = np.ascontiguousarray(x1, dtype=float).reshape(-1)
        x2 = np.ascontiguousarray(x2, dtype=float).reshape(-1)
        if x1.shape != x2.shape:
            x1, x2 = np.broadcast_arrays(x1, x2)
            x1, x2 = np.ascontiguousarray(x1), np.ascontiguousarray(x2)
        out = _crisp_kernel(x1, x2, *self._kernel_args)
        if np.isnan(out.sum()):
            raise DegenerateSet(f"{self.name}: no rule fired for some input")
        return out

    def crisp(self, x1: float, x2: float) -> float:
        return float(self.crisp_batch(np.array([float(x1)]), np.array([float(x2)]))[0])

    def crisp_reference(self, x1, x2) -> np.ndarray:
        """Vectorised numpy path, kept as a cross-check for the compiled kernel."""
        agg = self.infer_batch(x1, x2)
        total = agg @ _WEIGHTS
        if np.any(total <= 0.0):
            raise DegenerateSet(f"{self.name}: no rule fired for some input")
        return agg @ _WX / total


def infer(rb: RuleBase, in1: float, in2: float) -> np.ndarray:
    return rb.infer(in1, in2)


def _three_terms(name: str, low: str, mid: str, high: str) -> FuzzyVariable:
    return FuzzyVariable(
        name,
        (
            (low, Triangle(0.0, 0.0, 0.5)),
            (mid, Triangle(0.0, 0.5, 1.0)),
            (high, Triangle(0.5, 1.0, 1.0)),
        ),
    )


def _output_terms(name: str, labels: Sequence[str], half_width: float = 0.25) -> FuzzyVariable:
    n = len(labels)
    if n == 3:
        centers = [1.0 / 6.0, 0.5, 5.0 / 6.0]
    else:
        centers = [(2 * i + 1) / (2 * n) for i in range(n)]
    return FuzzyVariable(
        name,
        tuple((label, Triangle(c - half_width, c, c + half_width)) for label, c in zip(labels, centers)),
    )


# Output labels are listed from the low end of the axis to the high end.
NODE_ABILITY = _output_terms("node_ability", ["VeryBad", "Bad", "Good", "Perfect"])
SOCIAL_IMPORTANCE = _output_terms("social_importance", ["Bad", "Good", "Perfect"])
MESSAGE_PRIORITY = _output_terms("message_priority", ["Low", "Normal", "High", "Urgent"])
TRANSFER_OPPORTUNITY = _output_terms("transfer_opportunity", ["Low", "Medium", "High", "VeryHigh"])

FLC1 = RuleBase(
    "FLC1",
    _three_terms("buffer_free", "Low", "Medium", "High"),
    _three_terms("battery", "Low", "Medium", "High"),
    NODE_ABILITY,
    [
        ("High", "High", "Perfect"),
        ("High", "Medium", "Perfect"),
        ("High", "Low", "Bad"),
        ("Medium", "High", "Perfect"),
        ("Medium", "Medium", "Good"),
        ("Medium", "Low", "Bad"),
        ("Low", "High", "Good"),
        ("Low", "Medium", "Bad"),
        ("Low", "Low", "VeryBad"),
    ],
)

FLC2 = RuleBase(
    "FLC2",
    _three_terms("popularity", "Slow", "Medium", "Fast"),
    _three_terms("tie_strength", "Poor", "Fair", "Good"),
    SOCIAL_IMPORTANCE,
    [
        ("Fast", "Good", "Perfect"),
        ("Fast", "Fair", "Good"),
        ("Fast", "Poor", "Good"),
        ("Medium", "Good", "Good"),
        ("Medium", "Fair", "Good"),
        ("Medium", "Poor", "Bad"),
        ("Slow", "Good", "Good"),
        ("Slow", "Fair", "Bad"),
        ("Slow", "Poor", "Bad"),
    ],
)

FLC3 = RuleBase(
    "FLC3",
    _three_terms("ttl_remaining", "Small", "Medium", "Large"),
    _three_terms("hop_count", "Small", "Medium", "Large"),
    MESSAGE_PRIORITY,
    [
        ("Large", "Large", "Normal"),
        ("Large", "Medium", "Normal"),
        ("Large", "Small", "Low"),
        ("Medium", "Large", "Normal"),
        ("Medium", "Medium", "Normal"),
        ("Medium", "Small", "Low"),
        ("Small", "Large", "Urgent"),
        ("Small", "Medium", "Urgent"),
        ("Small", "Small", "High"),
    ],
)

FLC4 = RuleBase(
    "FLC4",
    _three_terms("node_ability", "Bad", "Good", "Perfect"),
    _three_terms("social_importance", "Bad", "Good", "Perfect"),
    TRANSFER_OPPORTUNITY,
    [
        ("Perfect", "Perfect", "VeryHigh"),
        ("Perfect", "Good", "VeryHigh"),
        ("Perfect", "Bad", "Medium"),
        ("Good", "Perfect", "High"),
        ("Good", "Good", "High"),
        ("Good", "Bad", "Low"),
        ("Bad", "Perfect", "Medium"),
        ("Bad", "Good", "Low"),
        ("Bad", "Bad", "Low"),
    ],
)

CONTROLLERS = {"flc1": FLC1, "flc2": FLC2, "flc3": FLC3, "flc4": FLC4}

# Compiled entry points with each rule base frozen in as constants, for
# callers that are themselves compiled.
_F1_CO1, _F1_CO2, _F1_RULES, _F1_MF, _F1_SUP, _, _ = FLC1._kernel_args
_F2_CO1, _F2_CO2, _F2_RULES, _F2_MF, _F2_SUP, _, _ = FLC2._kernel_args
_F3_CO1, _F3_CO2, _F3_RULES, _F3_MF, _F3_SUP, _, _ = FLC3._kernel_args
_F4_CO1, _F4_CO2, _F4_RULES, _F4_MF, _F4_SUP, _, _ = FLC4._kernel_args


@njit(cache=True)
def flc1_kernel(x1, x2):
    return _crisp_kernel(x1, x2, _F1_CO1, _F1_CO2, _F1_RULES, _F1_MF, _F1_SUP, _WEIGHTS, _WX)


@njit(cache=True)
def flc2_kernel(x1, x2):
    return _crisp_kernel(x1, x2, _F2_CO1, _F2_CO2, _F2_RULES, _F2_MF, _F2_SUP, _WEIGHTS, _WX)


@njit(cache=True)
def flc3_kernel(x1, x2):
    return _crisp_kernel(x1, x2, _F3_CO1, _F3_CO2, _F3_RULES, _F3_MF, _F3_SUP, _WEIGHTS, _WX)


@njit(cache=True)
def flc4_kernel(x1, x2):
    return _crisp_kernel(x1, x2, _F4_CO1, _F4_CO2, _F4_RULES, _F4_MF, _F4_SUP, _WEIGHTS, _WX)

# Crisp priority at or above this counts as "Normal or higher".
NORMAL_PRIORITY = MESSAGE_PRIORITY.peak("Normal")


def eval_flc1(buffer_free: float, battery: float) -> float:
    """Node ability from free-buffer fraction and remaining-battery fraction."""
    return FLC1.crisp(buffer_free, battery)


def eval_flc2(popularity: float, tie_strength: float) -> float:
    return FLC2.crisp(popularity, tie_strength)


def eval_flc3(ttl_remaining: float, hop_count: float) -> float:
    """Message priority; both inputs already normalised to ``[0, 1]``."""
    return FLC3.crisp(ttl_remaining, hop_count)


def eval_flc4(node_ability: float, social_importance: float) -> float:
    return FLC4.crisp(node_ability, social_importance)


def crisp_grid(rb: RuleBase, n: int = 51) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Crisp output over an ``n x n`` grid; returns ``(x1, x2, out)`` flattened."""
    axis = np.linspace(0.0, 1.0, n)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    x1, x2 = x1.ravel(), x2.ravel()
    return x1, x2, rb.crisp_batch(x1, x2)
