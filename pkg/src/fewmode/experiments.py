"""Executable models of the interferometry and measurement experiments.

Everything probabilistic is computed by building the optical circuit and
taking Born probabilities of the output state; the closed-form predictions
(cos² fringes, E = cos Δ) are only used by the tests to check these paths.
"""
from __future__ import annotations

import csv
import math
from array import array
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Literal, Mapping, Sequence

import numpy as np

from .optical_elements import PhaseSetting, beam_splitter, compose, mach_zehnder, phase, phase_shifter
from .quantum_core import (
    BasisError,
    ModeBasis,
    StateVector,
    apply_unitary,
    basis_state,
    born_probabilities,
    composite_label,
    make_state,
    probability_vector,
    draw_indices,
    state_from_array,
    tensor,
)

# -- measurement record ---------------------------------------------------


class MeasurementRecord:
    """Append-only log of (trial index, outcome label, seed).

    Trial indices are implicit and strictly increasing from 0.  There is no
    way to edit or drop an entry once written.
    """

    HEADER = ("trial", "outcome", "seed")

    def __init__(self):
        self._labels: list[str] = []
        self._label_ids: dict[str, int] = {}
        self._outcomes = array("I")
        self._seeds = array("Q")

    def _label_id(self, label: str) -> int:
        i = self._label_ids.get(label)
        if i is None:
            i = self._label_ids[label] = len(self._labels)
            self._labels.append(label)
        return i

    def append(self, outcome: str, seed: int) -> int:
        self._outcomes.append(self._label_id(outcome))
        self._seeds.append(seed)
        return len(self._outcomes) - 1

    def extend(self, labels: Sequence[str], indices: np.ndarray, seed: int) -> None:
        """Append a batch of outcomes given as indices into ``labels``."""
        ids = np.array([self._label_id(lab) for lab in labels], dtype=np.int64)
        mapped = ids[np.asarray(indices, dtype=np.int64)]
        self._outcomes.extend(mapped.astype(np.uint32).tolist())
        self._seeds.extend([seed] * len(mapped))

    def __len__(self) -> int:
        return len(self._outcomes)

    def __iter__(self) -> Iterator[tuple[int, str, int]]:
        labels = self._labels
        for i, (o, s) in enumerate(zip(self._outcomes, self._seeds)):
            yield i, labels[o], s

    def __getitem__(self, i: int) -> tuple[int, str, int]:
        if i < 0:
            i += len(self)
        return i, self._labels[self._outcomes[i]], self._seeds[i]

    @property
    def entries(self) -> tuple[tuple[int, str, int], ...]:
        return tuple(self)

    def counts(self) -> dict[str, int]:
        tally = np.bincount(np.frombuffer(self._outcomes, dtype=np.uint32), minlength=len(self._labels))
        return {lab: int(n) for lab, n in zip(self._labels, tally)}

    def write(self, path: str | Path) -> None:
        labels = self._labels
        lines = ["trial,outcome,seed"]
        lines.extend(f"{i},{labels[o]},{s}" for i, (o, s) in enumerate(zip(self._outcomes, self._seeds)))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "MeasurementRecord":
        rec = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != cls.HEADER:
                raise ValueError(f"unexpected record header {header}")
            for n, (trial, outcome, seed) in enumerate(reader):
                if int(trial) != n:
                    raise ValueError(f"non-monotone trial index at row {n}")
                rec.append(outcome, int(seed))
        return rec


# -- Mach-Zehnder ---------------------------------------------------------

MZ_MODES = ("path1", "path2")
# D1 is the output that receives all the light at zero phase difference; with
# the symmetric splitter that is the second mode.
MZ_PORTS = {"D1": "path2", "D2": "path1"}


@dataclass(frozen=True)
class MZConfig:
    phi1: PhaseSetting = PhaseSetting(0.0)
    phi2: PhaseSetting = PhaseSetting(0.0)
    configuration: Literal["open", "closed", "delayed"] = "closed"
    front_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi1", phase(self.phi1))
        object.__setattr__(self, "phi2", phase(self.phi2))
        if self.configuration not in ("open", "closed", "delayed"):
            raise ValueError(f"unknown MZ configuration {self.configuration!r}")
        if not 0.0 <= self.front_fraction <= 1.0:
            raise ValueError("front_fraction must lie in [0, 1]")

    @property
    def phase_difference(self) -> float:
        return self.phi1.radians - self.phi2.radians


@dataclass(frozen=True)
class DetectionStats:
    p_d1: float
    p_d2: float

    def __post_init__(self):
        if abs(self.p_d1 + self.p_d2 - 1.0) > 1e-12:
            raise ValueError(f"detector probabilities sum to {self.p_d1 + self.p_d2}")


def mz_output_state(config: MZConfig) -> StateVector:
    closed = config.configuration == "closed"
    circuit = mach_zehnder(config.phi1, config.phi2, MZ_MODES, closed=closed)
    return apply_unitary(basis_state(MZ_MODES, MZ_MODES[0]), compose(circuit))


def mz_run(config: MZConfig) -> DetectionStats:
    """Detector probabilities for the open or closed interferometer."""
    if config.configuration == "delayed":
        return mz_delayed(config)
    probs = born_probabilities(mz_output_state(config))
    return DetectionStats(probs[MZ_PORTS["D1"]], probs[MZ_PORTS["D2"]])


def mz_delayed(config: MZConfig) -> DetectionStats:
    """Encounter-delayed choice as a front/rear mixture.

    The leading fraction ``r`` of the wavepacket passes the crossing before
    BS2 is in place (open statistics); the rest sees the closed interferometer.
    """
    r = config.front_fraction
    op = mz_run(MZConfig(config.phi1, config.phi2, "open"))
    cl = mz_run(MZConfig(config.phi1, config.phi2, "closed"))
    p1 = r * op.p_d1 + (1.0 - r) * cl.p_d1
    return DetectionStats(p1, 1.0 - p1)


def insertion_fractions(n: int = 16) -> list[float]:
    """Front fractions for ``n`` evenly spaced BS2 insertion times over [0, T]."""
    return [k / (n - 1) for k in range(n)]


def mz_sample(config: MZConfig, shots: int, rng: np.random.Generator, seed: int = 0,
              record: MeasurementRecord | None = None) -> tuple[MeasurementRecord, DetectionStats]:
    stats = mz_run(config)
    probs = np.array([stats.p_d1, stats.p_d2])
    idx = draw_indices(probs, rng.random(shots))
    record = MeasurementRecord() if record is None else record
    record.extend(("D1", "D2"), idx, seed)
    n1 = int(np.count_nonzero(idx == 0))
    return record, DetectionStats(n1 / shots, (shots - n1) / shots)


# -- RTO bi-photon --------------------------------------------------------

RTO_A = ModeBasis(("A1", "A2"))
RTO_B = ModeBasis(("B1", "B2"))
RTO_OUTCOMES = tuple((a, b) for a in RTO_A.labels for b in RTO_B.labels)
# Fixed offsets added in series with each side's variable shifter, ahead of
# its splitter.  π on B makes zero settings perfectly correlated.
RTO_CALIBRATION = {"A": 0.0, "B": math.pi}


@dataclass(frozen=True)
class RTOConfig:
    phi_a: PhaseSetting = PhaseSetting(0.0)
    phi_b: PhaseSetting = PhaseSetting(0.0)

    def __post_init__(self):
        object.__setattr__(self, "phi_a", phase(self.phi_a))
        object.__setattr__(self, "phi_b", phase(self.phi_b))

    @property
    def phase_difference(self) -> float:
        return self.phi_b.radians - self.phi_a.radians


@dataclass(frozen=True)
class JointStats:
    """Probabilities of the four two-detector outcomes."""

    p: Mapping[tuple[str, str], float]

    def __post_init__(self):
        p = {k: float(v) for k, v in self.p.items()}
        if set(p) != set(RTO_OUTCOMES):
            raise ValueError("joint stats need exactly the four RTO outcomes")
        if abs(sum(p.values()) - 1.0) > 1e-12:
            raise ValueError(f"joint probabilities sum to {sum(p.values())}")
        object.__setattr__(self, "p", p)

    @property
    def p_corr(self) -> float:
        return self.p[("A1", "B1")] + self.p[("A2", "B2")]

    @property
    def p_anti(self) -> float:
        return self.p[("A1", "B2")] + self.p[("A2", "B1")]

    @property
    def marginal_a(self) -> dict[str, float]:
        return {a: self.p[(a, "B1")] + self.p[(a, "B2")] for a in RTO_A.labels}

    @property
    def marginal_b(self) -> dict[str, float]:
        return {b: self.p[("A1", b)] + self.p[("A2", b)] for b in RTO_B.labels}

    @property
    def degree_of_correlation(self) -> float:
        return self.p_corr - self.p_anti


def rto_source_state() -> StateVector:
    """(|A1⟩|B1⟩ + |A2⟩|B2⟩)/√2 on the composite A⊗B basis."""
    basis = ModeBasis.product(RTO_A, RTO_B)
    amps = np.zeros(4, dtype=complex)
    amps[basis.index(composite_label("A1", "B1"))] = 1 / math.sqrt(2)
    amps[basis.index(composite_label("A2", "B2"))] = 1 / math.sqrt(2)
    return StateVector(basis, amps)


def rto_output_state(config: RTOConfig) -> StateVector:
    """Shift A's path 1 and B's path 2, then recombine each side on its splitter."""
    s = rto_source_state()
    s = apply_unitary(s, phase_shifter(config.phi_a.radians + RTO_CALIBRATION["A"], "A1"), ("A1",))
    s = apply_unitary(s, phase_shifter(config.phi_b.radians + RTO_CALIBRATION["B"], "B2"), ("B2",))
    s = apply_unitary(s, beam_splitter(RTO_A.labels), RTO_A.labels)
    s = apply_unitary(s, beam_splitter(RTO_B.labels), RTO_B.labels)
    return s


def rto_joint(config: RTOConfig) -> JointStats:
    probs = born_probabilities(rto_output_state(config))
    return JointStats({(a, b): probs[composite_label(a, b)] for a, b in RTO_OUTCOMES})


def rto_sample(config: RTOConfig, shots: int, rng: np.random.Generator, seed: int = 0,
               record: MeasurementRecord | None = None) -> tuple[MeasurementRecord, JointStats]:
    """Monte Carlo trials of the RTO experiment; returns the log and empirical stats."""
    if shots < 1:
        raise ValueError("shots must be positive")
    s = rto_output_state(config)
    idx = draw_indices(probability_vector(s), rng.random(shots))
    record = MeasurementRecord() if record is None else record
    record.extend(s.basis.labels, idx, seed)
    counts = np.bincount(idx, minlength=4)
    freq = {pair: counts[s.basis.index(composite_label(*pair))] / shots for pair in RTO_OUTCOMES}
    return record, JointStats(freq)


# -- von Neumann measurement ----------------------------------------------


@dataclass(frozen=True)
class DetectorModel:
    """Pointer states ``ready, D1..Dn`` paired with system eigenstates ``A1..An``.

    ``disturbance`` maps each eigenstate label to the system state α_i it is
    left in; the default leaves eigenstates undisturbed.
    """

    eigenbasis: ModeBasis
    pointers: tuple[str, ...]
    ready: str = "ready"
    disturbance: Mapping[str, StateVector] | None = None

    def __post_init__(self):
        pointers = tuple(self.pointers)
        object.__setattr__(self, "pointers", pointers)
        if len(pointers) != self.eigenbasis.dimension:
            raise BasisError("need exactly one pointer state per eigenstate")
        if len(set(pointers)) != len(pointers) or self.ready in pointers:
            raise BasisError("pointer labels must be distinct and differ from the ready label")
        if self.disturbance is not None:
            for lab, alpha in self.disturbance.items():
                self.eigenbasis.index(lab)
                if alpha.basis.labels != self.eigenbasis.labels:
                    raise BasisError(f"disturbed state for {lab} is not on the system basis")

    @property
    def basis(self) -> ModeBasis:
        return ModeBasis((self.ready,) + self.pointers)

    def alpha(self, label: str) -> StateVector:
        if self.disturbance is not None and label in self.disturbance:
            return self.disturbance[label]
        return basis_state(self.eigenbasis, label)

    def pointer_for(self, label: str) -> str:
        return self.pointers[self.eigenbasis.index(label)]


def default_detector(labels: Sequence[str] = ("A1", "A2"), pointers: Sequence[str] = ("D1", "D2")) -> DetectorModel:
    return DetectorModel(ModeBasis(tuple(labels)), tuple(pointers))


def von_neumann_measure(system: StateVector, det: DetectorModel) -> StateVector:
    """|ψ⟩|ready⟩ → Σ a_i |α_i⟩|D_i⟩ on the system ⊗ detector basis."""
    if system.basis.labels != det.eigenbasis.labels:
        if system.basis.dimension != det.eigenbasis.dimension:
            raise BasisError(
                f"system has dimension {system.basis.dimension}, detector resolves "
                f"{det.eigenbasis.dimension} eigenstates"
            )
        raise BasisError("system basis differs from the detector's eigenbasis")
    composite = ModeBasis.product(det.eigenbasis, det.basis)
    out = np.zeros(composite.dimension, dtype=complex)
    for lab, a in zip(system.basis.labels, system.amplitudes):
        if a == 0:
            continue
        pointer = basis_state(det.basis, det.pointer_for(lab))
        out += a * tensor(det.alpha(lab), pointer).amplitudes
    return state_from_array(composite, out)


def ready_product(system: StateVector, det: DetectorModel) -> StateVector:
    """The pre-measurement state |ψ⟩|ready⟩."""
    return tensor(system, basis_state(det.basis, det.ready))


@dataclass(frozen=True)
class CorrelationTable:
    labels_a: tuple[str, ...]
    labels_b: tuple[str, ...]
    joint: Mapping[tuple[str, str], float]
    conditional: Mapping[tuple[str, str], float | None]
    aliases: Mapping[str, str] = field(default_factory=dict)

    def name(self, label: str) -> str:
        return self.aliases.get(label, label)

    def rows(self, include_empty: bool = False):
        """(a, b, P(a,b), P(b|a)) for each cell; rows with P(a)=0 are skipped unless asked."""
        for a in self.labels_a:
            for b in self.labels_b:
                cond = self.conditional[(a, b)]
                if cond is None and not include_empty:
                    continue
                yield a, b, self.joint[(a, b)], cond

    def correlations(self, threshold: float = 1.0 - 1e-12) -> list[tuple[str, str]]:
        """Pairs (a, b) for which b occurs every time a occurs."""
        return [(a, b) for a, b, _, c in self.rows() if c is not None and c >= threshold]

    def render(self) -> str:
        pairs = self.correlations()
        lines = [f"{self.name(a):>10} | {self.name(b):<10} P={p:.6f}  P(b|a)={c:.6f}" for a, b, p, c in self.rows()]
        if pairs:
            lines.append(" AND ".join(f"{self.name(a)} iff {self.name(b)}" for a, b in pairs))
        return "\n".join(lines)


def correlation_table(joint: StateVector, basis_a: ModeBasis | Sequence[str] | None = None,
                      basis_b: ModeBasis | Sequence[str] | None = None,
                      aliases: Mapping[str, str] | None = None) -> CorrelationTable:
    """Joint and conditional outcome probabilities of a bipartite state."""
    if joint.basis.split is None:
        raise BasisError("correlation_table needs a bipartite state")
    left, right = joint.basis.split
    labels_a = tuple(basis_a.labels if isinstance(basis_a, ModeBasis) else basis_a or left.labels)
    labels_b = tuple(basis_b.labels if isinstance(basis_b, ModeBasis) else basis_b or right.labels)
    if set(labels_a) != set(left.labels) or set(labels_b) != set(right.labels):
        raise BasisError("table bases must relabel the state's factor bases")
    probs = born_probabilities(joint)
    table = {(a, b): probs[composite_label(a, b)] for a in labels_a for b in labels_b}
    cond: dict[tuple[str, str], float | None] = {}
    for a in labels_a:
        pa = sum(table[(a, b)] for b in labels_b)
        for b in labels_b:
            cond[(a, b)] = table[(a, b)] / pa if pa > 0 else None
    return CorrelationTable(labels_a, labels_b, table, cond, dict(aliases or {}))


CAT_ALIASES = {"A1": "undecayed", "A2": "decayed", "D1": "alive", "D2": "dead"}


def fifty_fifty(labels: Sequence[str] = ("A1", "A2")) -> StateVector:
    a, b = labels
    return make_state([(a, 1 / math.sqrt(2)), (b, 1 / math.sqrt(2))])


# -- double slit ----------------------------------------------------------


@dataclass(frozen=True)
class SlitConfig:
    wavelength: float = 500e-9
    separation: float = 100e-6
    width: float = 20e-6
    distance: float = 1.0
    slits: Literal["both", "slit1", "slit2"] = "both"
    half_width: float = 30e-3
    bins: int = 600

    def __post_init__(self):
        for name in ("wavelength", "separation", "width", "distance", "half_width"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if self.width >= self.separation:
            raise ValueError("slit width must be smaller than the slit separation")
        if self.bins < 16:
            raise ValueError("bins must be at least 16")
        if self.slits not in ("both", "slit1", "slit2"):
            raise ValueError(f"unknown slit selection {self.slits!r}")

    @property
    def fringe_spacing(self) -> float:
        return self.wavelength * self.distance / self.separation

    @property
    def envelope_half_width(self) -> float:
        """Distance from the center to the first zero of the single-slit envelope."""
        return self.wavelength * self.distance / self.width


@dataclass(frozen=True)
class SlitProfile:
    edges: np.ndarray
    mass: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])


def slit_amplitudes(cfg: SlitConfig, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Far-field amplitudes ψ_1, ψ_2 of the two slits at screen positions ``x``."""
    k = math.pi / (cfg.wavelength * cfg.distance)
    envelope = np.sinc(cfg.width * x / (cfg.wavelength * cfg.distance))  # np.sinc has the π inside
    half = k * cfg.separation * x
    return envelope * np.exp(1j * half), envelope * np.exp(-1j * half)


def double_slit_intensity(cfg: SlitConfig, subsamples: int = 8) -> SlitProfile:
    """Probability mass per screen bin, averaged over ``subsamples`` points per bin."""
    edges = np.linspace(-cfg.half_width, cfg.half_width, cfg.bins + 1)
    width = edges[1] - edges[0]
    offsets = (np.arange(subsamples) + 0.5) / subsamples * width
    x = edges[:-1, None] + offsets[None, :]
    psi1, psi2 = slit_amplitudes(cfg, x)
    if cfg.slits == "both":
        psi = psi1 + psi2
    elif cfg.slits == "slit1":
        psi = psi1
    else:
        psi = psi2
    density = np.mean(np.abs(psi) ** 2, axis=1)
    mass = density / density.sum()
    edges.setflags(write=False)
    mass.setflags(write=False)
    return SlitProfile(edges, mass)


def double_slit_sample(cfg: SlitConfig, n: int, rng: np.random.Generator, seed: int = 0,
                       record: MeasurementRecord | None = None) -> tuple[np.ndarray, MeasurementRecord]:
    """Draw ``n`` impact positions by inverting the piecewise-uniform CDF."""
    if n < 1:
        raise ValueError("n must be positive")
    prof = double_slit_intensity(cfg)
    u = rng.random(n)
    k = draw_indices(prof.mass, u)
    cdf = np.concatenate(([0.0], np.cumsum(prof.mass)))
    frac = np.clip((u - cdf[k]) / prof.mass[k], 0.0, 1.0)
    x = prof.edges[k] + frac * prof.bin_width
    record = MeasurementRecord() if record is None else record
    record.extend([f"bin{i}" for i in range(cfg.bins)], k, seed)
    return x, record
