"""Correlation, CHSH, local-hidden-variable and no-signaling analytics."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .experiments import JointStats, RTOConfig, rto_joint, rto_output_state, rto_sample
from .optical_elements import PhaseSetting, phase
from .quantum_core import composite_label, make_rng, sample_indices

Correlator = Callable[[float, float], float]
TSIRELSON = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class CHSHSettings:
    """Analyzer phases: ``a``, ``a_prime`` on side A; ``b``, ``b_prime`` on side B."""

    a: PhaseSetting
    a_prime: PhaseSetting
    b: PhaseSetting
    b_prime: PhaseSetting

    def __post_init__(self):
        for name in ("a", "a_prime", "b", "b_prime"):
            object.__setattr__(self, name, phase(getattr(self, name)))

    def pairs(self) -> tuple[tuple[float, float], ...]:
        """Setting pairs in the order the CHSH sum uses them."""
        a, ap, b, bp = (x.radians for x in (self.a, self.a_prime, self.b, self.b_prime))
        return (a, b), (a, bp), (ap, b), (ap, bp)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.a.radians, self.a_prime.radians, self.b.radians, self.b_prime.radians


CANONICAL_SETTINGS = CHSHSettings(0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)


def settings_for_difference(delta: float) -> CHSHSettings:
    """a=0, b=Δ, a′=2Δ, b′=3Δ: three pairs sit at difference Δ, one at 3Δ."""
    return CHSHSettings(0.0, 2 * delta, delta, 3 * delta)


@dataclass(frozen=True)
class BellStats:
    S: float
    correlations: tuple[float, float, float, float]
    settings: CHSHSettings

    @property
    def violation(self) -> bool:
        return self.S > 2.0


def degree_of_correlation(j: JointStats) -> float:
    """P(correlated) − P(anticorrelated)."""
    return (j.p[("A1", "B1")] + j.p[("A2", "B2")]) - (j.p[("A1", "B2")] + j.p[("A2", "B1")])


def chsh_combination(e_ab, e_abp, e_apb, e_apbp):
    return abs(e_ab - e_abp + e_apb + e_apbp)


def chsh(settings: CHSHSettings, correlator: Correlator | None = None) -> BellStats:
    """S = |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|; defaults to the simulated RTO correlator."""
    correlator = quantum_correlator if correlator is None else correlator
    es = tuple(float(correlator(pa, pb)) for pa, pb in settings.pairs())
    return BellStats(chsh_combination(*es), es, settings)


def quantum_correlator(phi_a: float, phi_b: float) -> float:
    return degree_of_correlation(rto_joint(RTOConfig(phi_a, phi_b)))


def sampled_correlator(shots: int, rng: np.random.Generator) -> Correlator:
    """Correlator estimated from ``shots`` simulated trials per call."""

    def correlator(phi_a: float, phi_b: float) -> float:
        s = rto_output_state(RTOConfig(phi_a, phi_b))
        counts = np.bincount(sample_indices(s, rng, shots), minlength=4)
        freq = {lab: n / shots for lab, n in zip(s.basis.labels, counts)}
        same = freq[composite_label("A1", "B1")] + freq[composite_label("A2", "B2")]
        return 2.0 * same - 1.0

    return correlator


LHVStrategy = tuple[int, int, int, int]


def lhv_strategies() -> list[LHVStrategy]:
    """All 16 deterministic local strategies (A(a), A(a′), B(b), B(b′)) ∈ {±1}⁴."""
    return list(itertools.product((1, -1), repeat=4))


def strategy_correlator(strategy: LHVStrategy, settings: CHSHSettings) -> Correlator:
    """Correlator of one deterministic strategy; each side answers from its own setting only."""
    A_a, A_ap, B_b, B_bp = strategy
    side_a = {settings.a.radians: A_a, settings.a_prime.radians: A_ap}
    side_b = {settings.b.radians: B_b, settings.b_prime.radians: B_bp}
    if settings.a.radians == settings.a_prime.radians:
        side_a[settings.a.radians] = A_a
    if settings.b.radians == settings.b_prime.radians:
        side_b[settings.b.radians] = B_b

    def correlator(phi_a: float, phi_b: float) -> float:
        return side_a[phase(phi_a).radians] * side_b[phase(phi_b).radians]

    return correlator


def lhv_max(settings: CHSHSettings | None = None) -> int:
    """Largest |S| over every deterministic local strategy; exactly 2.

    Computed in integers so the bound is exact.  ``settings`` only matters
    when two of them coincide, which forces the matching outcomes equal.
    """
    best = 0
    for A_a, A_ap, B_b, B_bp in lhv_strategies():
        if settings is not None:
            if settings.a == settings.a_prime:
                A_ap = A_a
            if settings.b == settings.b_prime:
                B_bp = B_b
        s = abs(A_a * B_b - A_a * B_bp + A_ap * B_b + A_ap * B_bp)
        best = max(best, s)
    return best


@dataclass(frozen=True)
class NoSignalingReport:
    mode: str
    max_deviation: float
    bound: float
    points: int
    rows: tuple[tuple[float, float, float, float], ...]

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.bound


def no_signaling_report(
    grid: Iterable[float] | tuple[Sequence[float], Sequence[float]],
    mode: Literal["analytic", "sampled"] = "analytic",
    shots: int = 10_000,
    seed: int = 0,
) -> NoSignalingReport:
    """Check that each side's marginal ignores the other side's phase.

    ``grid`` is either one list of phases used for both sides or a pair
    ``(phases_a, phases_b)``.  For every φ_A the spread of P(A1) across φ_B
    is measured, and symmetrically for B.  Analytic mode requires the spread
    to vanish (1e-12); sampled mode allows 5σ of a binomial estimate about
    the row mean.
    """
    if isinstance(grid, tuple) and len(grid) == 2 and not np.isscalar(grid[0]):
        phases_a, phases_b = list(grid[0]), list(grid[1])
    else:
        phases_a = phases_b = list(grid)
    if not phases_a or not phases_b:
        raise ValueError("grid must be nonempty")

    pa = np.empty((len(phases_a), len(phases_b)))
    pb = np.empty_like(pa)
    rows = []
    for i, fa in enumerate(phases_a):
        for j, fb in enumerate(phases_b):
            cfg = RTOConfig(fa, fb)
            if mode == "analytic":
                stats = rto_joint(cfg)
            elif mode == "sampled":
                _, stats = rto_sample(cfg, shots, make_rng(seed ^ (i * len(phases_b) + j)))
            else:
                raise ValueError(f"unknown mode {mode!r}")
            pa[i, j] = stats.marginal_a["A1"]
            pb[i, j] = stats.marginal_b["B1"]
            rows.append((float(fa), float(fb), pa[i, j], pb[i, j]))

    dev_a = np.max(np.abs(pa - pa.mean(axis=1, keepdims=True)))
    dev_b = np.max(np.abs(pb - pb.mean(axis=0, keepdims=True)))
    bound = 1e-12 if mode == "analytic" else 5.0 * math.sqrt(0.25 / shots)
    return NoSignalingReport(mode, float(max(dev_a, dev_b)), bound, pa.size, tuple(rows))


def visibility(sweep: Sequence[tuple[float, float]], kind: Literal["probability", "correlation"] = "probability") -> float:
    """Fringe visibility (max − min)/(max + min) of a phase sweep.

    For ``kind="correlation"`` the values are degrees of correlation in
    [−1, 1]; they are mapped to P(correlated) = (1 + E)/2 first so the same
    formula applies.
    """
    if not sweep:
        raise ValueError("empty sweep")
    if len(sweep) < 8:
        raise ValueError("visibility needs at least 8 sweep points")
    values = np.array([v for _, v in sweep], dtype=float)
    if kind == "correlation":
        values = 0.5 * (1.0 + values)
    elif kind != "probability":
        raise ValueError(f"unknown sweep kind {kind!r}")
    hi, lo = values.max(), values.min()
    if hi + lo == 0.0:
        raise ValueError("constant-zero sweep has no defined visibility")
    return float((hi - lo) / (hi + lo))
