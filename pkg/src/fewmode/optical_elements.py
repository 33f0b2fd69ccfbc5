"""Beam splitters, phase shifters and their composition into path circuits.

Convention: the 50-50 splitter is symmetric with a factor ``i`` on
reflection, ``(1/√2)[[1, i], [i, 1]]``.  Mirrors are identity; their shared
phase is global and never observable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum_core import BasisError, ModeBasis, UnitaryElement, as_basis, operator_on

TWO_PI = 2.0 * math.pi
BS_MATRIX = np.array([[1, 1j], [1j, 1]], dtype=complex) / math.sqrt(2.0)


@dataclass(frozen=True, order=True)
class PhaseSetting:
    """A phase in radians, reduced into [0, 2π)."""

    radians: float

    def __post_init__(self):
        r = math.fmod(float(self.radians), TWO_PI)
        if r < 0.0:
            r += TWO_PI
        if r >= TWO_PI:
            r = 0.0
        object.__setattr__(self, "radians", r)

    def __float__(self) -> float:
        return self.radians


def phase(value: float | PhaseSetting) -> PhaseSetting:
    return value if isinstance(value, PhaseSetting) else PhaseSetting(value)


def beam_splitter(modes: Sequence[str] = ("in1", "in2")) -> UnitaryElement:
    """Lossless 50-50 splitter on two modes; the first mode's light stays in place."""
    basis = as_basis(modes)
    if basis.dimension != 2:
        raise BasisError("a beam splitter acts on exactly two modes")
    return UnitaryElement(basis, BS_MATRIX, name="BS")


def phase_shifter(phi: float | PhaseSetting, mode: str, modes: Sequence[str] | None = None) -> UnitaryElement:
    """Multiply ``mode`` by e^{iφ}; other modes in ``modes`` pass unchanged."""
    basis = as_basis(modes if modes is not None else (mode,))
    k = basis.index(mode)
    diag = np.ones(basis.dimension, dtype=complex)
    diag[k] = np.exp(1j * phase(phi).radians)
    return UnitaryElement(basis, np.diag(diag), name=f"φ[{mode}]")


@dataclass(frozen=True)
class Circuit:
    """Ordered optical elements over a fixed mode basis; first element acts first."""

    basis: ModeBasis
    elements: tuple[tuple[UnitaryElement, tuple[str, ...]], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "basis", as_basis(self.basis))
        checked = []
        for element, targets in self.elements:
            targets = tuple(targets)
            if not set(targets) <= set(self.basis.labels):
                raise BasisError(f"targets {targets} lie outside circuit basis {self.basis.labels}")
            checked.append((element, targets))
        object.__setattr__(self, "elements", tuple(checked))

    def then(self, element: UnitaryElement, targets: Sequence[str] | None = None) -> "Circuit":
        targets = element.basis.labels if targets is None else tuple(targets)
        return Circuit(self.basis, self.elements + ((element, targets),))


def compose(circuit: Circuit) -> UnitaryElement:
    total = np.eye(circuit.basis.dimension, dtype=complex)
    for element, targets in circuit.elements:
        total = operator_on(circuit.basis, element, targets) @ total
    return UnitaryElement(circuit.basis, total, name="circuit")


def mach_zehnder(phi1: float | PhaseSetting, phi2: float | PhaseSetting,
                 modes: Sequence[str] = ("path1", "path2"), closed: bool = True) -> Circuit:
    """BS1, phase shifters on both arms, then BS2 if ``closed``."""
    m1, m2 = modes
    c = Circuit(as_basis(modes))
    c = c.then(beam_splitter(modes))
    c = c.then(phase_shifter(phi1, m1), (m1,))
    c = c.then(phase_shifter(phi2, m2), (m2,))
    if closed:
        c = c.then(beam_splitter(modes))
    return c
