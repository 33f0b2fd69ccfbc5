"""Exact state-vector engine over small labeled mode bases.

States, unitaries and density operators carry an explicit ``ModeBasis`` so
that every amplitude is addressed by a label ("A1", "D2", "A1⊗B1") rather
than a bare index.  Composite bases remember the bipartition they were built
from, which is what lets ``partial_trace`` work without guessing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INPUT_NORM_TOL = 1e-9
INTERNAL_TOL = 1e-12
UNITARY_TOL = 1e-10
ENTANGLEMENT_TOL = 1e-9

SUBSYSTEM_TAGS = {"A": 0, "left": 0, 0: 0, "B": 1, "right": 1, 1: 1}


class BasisError(ValueError):
    """Raised for malformed or mismatched mode bases."""


class DegenerateStateError(ValueError):
    """Raised when a state has no nonzero amplitude."""


class NotUnitaryError(ValueError):
    pass


class NotPhysicalError(ValueError):
    """Raised when a density matrix is not Hermitian, unit trace and positive."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def composite_label(left: str, right: str) -> str:
    return f"{left}⊗{right}"


@dataclass(frozen=True)
class ModeBasis:
    """Ordered, distinct mode labels; optionally a bipartite product basis.

    ``split`` holds the two factor bases when the basis was produced by
    :func:`tensor`; labels are then ordered left-major.
    """

    labels: tuple[str, ...]
    split: tuple["ModeBasis", "ModeBasis"] | None = field(default=None, compare=True)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise BasisError("basis needs at least one label")
        if len(set(labels)) != len(labels):
            dupes = sorted({x for x in labels if labels.count(x) > 1})
            raise BasisError(f"duplicate basis labels: {dupes}")
        if self.split is not None:
            left, right = self.split
            expected = tuple(composite_label(a, b) for a in left.labels for b in right.labels)
            if expected != labels:
                raise BasisError("labels do not match the declared bipartition")

    @property
    def dimension(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise BasisError(f"unknown mode label {label!r}") from None

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def product(cls, left: "ModeBasis", right: "ModeBasis") -> "ModeBasis":
        overlap = set(left.labels) & set(right.labels)
        if overlap:
            raise BasisError(f"factor bases share labels: {sorted(overlap)}")
        labels = tuple(composite_label(a, b) for a in left.labels for b in right.labels)
        return cls(labels, split=(left, right))


def as_basis(basis: ModeBasis | Sequence[str]) -> ModeBasis:
    return basis if isinstance(basis, ModeBasis) else ModeBasis(tuple(basis))


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state.  ``renormalized`` flags inputs that were rescaled."""

    basis: ModeBasis
    amplitudes: np.ndarray
    renormalized: bool = False

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape[0] != self.basis.dimension:
            raise BasisError(
                f"{amps.shape[0]} amplitudes for a basis of dimension {self.basis.dimension}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > INPUT_NORM_TOL:
            raise ValueError(f"state norm {norm!r} differs from 1 by more than {INPUT_NORM_TOL}")

    def amplitude(self, label: str) -> complex:
        return complex(self.amplitudes[self.basis.index(label)])

    def as_dict(self) -> dict[str, complex]:
        return {lab: complex(a) for lab, a in zip(self.basis.labels, self.amplitudes)}

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def equals_up_to_phase(self, other: "StateVector", atol: float = INTERNAL_TOL) -> bool:
        if self.basis.labels != other.basis.labels:
            return False
        overlap = np.vdot(self.amplitudes, other.amplitudes)
        return abs(abs(overlap) - 1.0) <= atol


@dataclass(frozen=True)
class UnitaryElement:
    """A unitary matrix acting on the modes named by ``basis``."""

    basis: ModeBasis
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        d = self.basis.dimension
        if m.shape != (d, d):
            raise BasisError(f"matrix shape {m.shape} does not match basis dimension {d}")
        err = unitarity_error(m)
        if err > UNITARY_TOL:
            raise NotUnitaryError(f"‖U†U − I‖∞ = {err:.3e} exceeds {UNITARY_TOL}")

    def dagger(self) -> "UnitaryElement":
        return UnitaryElement(self.basis, self.matrix.conj().T, name=f"{self.name}†")

    @classmethod
    def identity(cls, basis: ModeBasis | Sequence[str]) -> "UnitaryElement":
        basis = as_basis(basis)
        return cls(basis, np.eye(basis.dimension), name="I")


def unitarity_error(m: np.ndarray) -> float:
    """Max-abs entry of U†U − I."""
    m = np.asarray(m)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


@dataclass(frozen=True)
class DensityOperator:
    basis: ModeBasis
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        d = self.basis.dimension
        if m.shape != (d, d):
            raise BasisError(f"matrix shape {m.shape} does not match basis dimension {d}")
        if np.max(np.abs(m - m.conj().T)) > INTERNAL_TOL:
            raise NotPhysicalError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > INTERNAL_TOL:
            raise NotPhysicalError(f"density matrix trace {tr!r} is not 1")
        if np.min(np.linalg.eigvalsh(m)) < -INTERNAL_TOL:
            raise NotPhysicalError("density matrix has a negative eigenvalue")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class OutcomeSample:
    outcome: str
    collapsed: StateVector
    probability: float


# -- construction ---------------------------------------------------------


def make_state(pairs: Iterable[tuple[str, complex]] | dict[str, complex]) -> StateVector:
    """Build a state from ``(label, amplitude)`` pairs, keeping their order.

    Amplitudes are always rescaled to unit norm; if the input norm was off
    by more than 1e-9 the result carries ``renormalized=True``.

    >>> make_state([("A1", 0.6), ("A2", 0.8j)]).renormalized
    False
    """
    items = list(pairs.items()) if isinstance(pairs, dict) else list(pairs)
    basis = ModeBasis(tuple(lab for lab, _ in items))
    amps = np.array([complex(a) for _, a in items], dtype=complex)
    return state_from_array(basis, amps)


def state_from_array(basis: ModeBasis | Sequence[str], amplitudes) -> StateVector:
    basis = as_basis(basis)
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(amps)
    if norm == 0.0:
        raise DegenerateStateError("all amplitudes are zero")
    flagged = abs(norm - 1.0) > INPUT_NORM_TOL
    if norm != 1.0:
        amps = amps / norm
    return StateVector(basis, amps, renormalized=flagged)


def basis_state(basis: ModeBasis | Sequence[str], label: str) -> StateVector:
    basis = as_basis(basis)
    amps = np.zeros(basis.dimension, dtype=complex)
    amps[basis.index(label)] = 1.0
    return StateVector(basis, amps)


def tensor(sa: StateVector, sb: StateVector) -> StateVector:
    """Product state on the composite basis ``a⊗b`` (left-major order)."""
    basis = ModeBasis.product(sa.basis, sb.basis)
    return StateVector(basis, np.kron(sa.amplitudes, sb.amplitudes))


# -- evolution ------------------------------------------------------------


def _embed(u: np.ndarray, positions: list[int], dim: int) -> np.ndarray:
    full = np.eye(dim, dtype=complex)
    idx = np.array(positions)
    full[np.ix_(idx, idx)] = u
    return full


def operator_on(basis: ModeBasis, u: UnitaryElement, target_modes: Sequence[str]) -> np.ndarray:
    """Full-space matrix that applies ``u`` on ``target_modes`` and identity elsewhere.

    Targets may be labels of ``basis`` itself, or labels of one factor of a
    bipartite basis, in which case ``u`` acts locally on that factor.
    """
    targets = tuple(target_modes)
    if targets != u.basis.labels:
        if sorted(targets) != sorted(u.basis.labels) or len(targets) != u.basis.dimension:
            raise BasisError(
                f"element acts on {u.basis.labels}, targets given as {targets}"
            )
        # reorder the element to the requested target order
        perm = [u.basis.index(t) for t in targets]
        m = u.matrix[np.ix_(perm, perm)]
    else:
        m = u.matrix
    if set(targets) <= set(basis.labels):
        return _embed(m, [basis.index(t) for t in targets], basis.dimension)
    if basis.split is not None:
        left, right = basis.split
        for side, factor in enumerate((left, right)):
            if set(targets) <= set(factor.labels):
                local = _embed(m, [factor.index(t) for t in targets], factor.dimension)
                if side == 0:
                    return np.kron(local, np.eye(right.dimension))
                return np.kron(np.eye(left.dimension), local)
    raise BasisError(f"target modes {targets} not found in basis {basis.labels}")


def apply_unitary(
    s: StateVector, u: UnitaryElement, target_modes: Sequence[str] | None = None
) -> StateVector:
    targets = u.basis.labels if target_modes is None else tuple(target_modes)
    full = operator_on(s.basis, u, targets)
    out = full @ s.amplitudes
    return StateVector(s.basis, out)


# -- density operators ----------------------------------------------------


def density_of(s: StateVector) -> DensityOperator:
    return DensityOperator(s.basis, np.outer(s.amplitudes, s.amplitudes.conj()))


def _split_of(basis: ModeBasis) -> tuple[ModeBasis, ModeBasis]:
    if basis.split is None:
        raise BasisError("basis carries no bipartition; build it with tensor()")
    return basis.split


def partial_trace(rho: DensityOperator, keep: str | int = "A") -> DensityOperator:
    """Reduce ``rho`` to one factor of its bipartite basis.

    ``keep`` is "A"/"left"/0 for the first factor, "B"/"right"/1 for the second.
    """
    left, right = _split_of(rho.basis)
    try:
        side = SUBSYSTEM_TAGS[keep]
    except KeyError:
        raise BasisError(f"unknown subsystem tag {keep!r}") from None
    m = rho.matrix.reshape(left.dimension, right.dimension, left.dimension, right.dimension)
    if side == 0:
        reduced = np.einsum("ijkj->ik", m)
        basis = left
    else:
        reduced = np.einsum("ijil->jl", m)
        basis = right
    # symmetrize away rounding so the Hermitian check is exact
    reduced = 0.5 * (reduced + reduced.conj().T)
    return DensityOperator(basis, reduced)


def purity(rho: DensityOperator) -> float:
    """Tr(ρ²); 1 for pure states, 1/d for the maximally mixed state."""
    m = rho.matrix
    return float(np.real(np.einsum("ij,ji->", m, m)))


def is_entangled(s: StateVector) -> bool:
    _split_of(s.basis)
    return purity(partial_trace(density_of(s), "A")) < 1.0 - ENTANGLEMENT_TOL


# -- Born rule ------------------------------------------------------------


def _aligned_amplitudes(s: StateVector, basis: ModeBasis | Sequence[str] | None) -> tuple[ModeBasis, np.ndarray]:
    if basis is None:
        return s.basis, s.amplitudes
    basis = as_basis(basis)
    if basis.dimension != s.basis.dimension:
        raise BasisError(
            f"measurement basis has dimension {basis.dimension}, state has {s.basis.dimension}"
        )
    if basis.labels == s.basis.labels:
        return basis, s.amplitudes
    if set(basis.labels) != set(s.basis.labels):
        raise BasisError("measurement basis is not a relabeling of the state's basis")
    perm = [s.basis.index(lab) for lab in basis.labels]
    return basis, s.amplitudes[perm]


def born_probabilities(s: StateVector, basis: ModeBasis | Sequence[str] | None = None) -> dict[str, float]:
    """Outcome probabilities |⟨label|s⟩|², keyed in the order of ``basis``.

    ``basis`` may reorder the state's labels; it defaults to the state's own.
    """
    basis, amps = _aligned_amplitudes(s, basis)
    probs = np.abs(amps) ** 2
    return dict(zip(basis.labels, probs.tolist()))


def probability_vector(s: StateVector, basis: ModeBasis | Sequence[str] | None = None) -> np.ndarray:
    _, amps = _aligned_amplitudes(s, basis)
    return np.abs(amps) ** 2


def draw_indices(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Invert the cumulative distribution: u ∈ [c_{k-1}, c_k) selects k.

    Zero-probability outcomes own an empty interval and are never chosen.
    """
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, uniforms, side="right")
    # u can land above a cdf that rounds to just under 1
    last = int(np.flatnonzero(probs > 0)[-1])
    return np.minimum(idx, last)


def sample_indices(
    s: StateVector, rng: np.random.Generator, shots: int, basis: ModeBasis | Sequence[str] | None = None
) -> np.ndarray:
    """Vectorized Born sampling; same stream as ``shots`` calls to :func:`sample_outcome`."""
    probs = probability_vector(s, basis)
    return draw_indices(probs, rng.random(shots))


def sample_outcome(
    s: StateVector, basis: ModeBasis | Sequence[str] | None, rng: np.random.Generator
) -> OutcomeSample:
    """Draw one outcome and return the collapsed state.

    The collapsed state keeps the selected amplitude's phase, rescaled to
    modulus one; every other amplitude is exactly zero.
    """
    basis, amps = _aligned_amplitudes(s, basis)
    probs = np.abs(amps) ** 2
    k = int(draw_indices(probs, np.array([rng.random()]))[0])
    collapsed = np.zeros_like(amps)
    collapsed[k] = amps[k] / abs(amps[k])
    return OutcomeSample(
        outcome=basis.labels[k],
        collapsed=StateVector(basis, collapsed),
        probability=float(probs[k]),
    )


def make_rng(seed: int | None) -> np.random.Generator:
    """64-bit seeded PCG64 generator."""
    return np.random.Generator(np.random.PCG64(seed))
