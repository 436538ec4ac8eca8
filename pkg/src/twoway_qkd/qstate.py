"""Single polarization qubits: the four protocol states, the I/U encodings,
and projective measurement in the Z and X bases."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

NORM_TOL = 1e-12
PHASE_TOL = 1e-9

_R = math.sqrt(0.5)


class Basis(Enum):
    Z = "z"
    X = "x"


class StateLabel(Enum):
    PLUS_Z = "+z"
    MINUS_Z = "-z"
    PLUS_X = "+x"
    MINUS_X = "-x"

    @property
    def basis(self) -> Basis:
        return Basis.Z if self in (StateLabel.PLUS_Z, StateLabel.MINUS_Z) else Basis.X

    @property
    def bit(self) -> int:
        return 0 if self in (StateLabel.PLUS_Z, StateLabel.PLUS_X) else 1

    def flip(self) -> StateLabel:
        return label_for(self.basis, 1 - self.bit)


class OpLabel(Enum):
    I = 0
    U = 1

    @property
    def bit(self) -> int:
        return self.value

    @classmethod
    def from_bit(cls, bit: int) -> OpLabel:
        return cls.U if bit else cls.I


def label_for(basis: Basis, bit: int) -> StateLabel:
    """The eigenstate label of `basis` carrying `bit`."""
    if basis is Basis.Z:
        return StateLabel.MINUS_Z if bit else StateLabel.PLUS_Z
    return StateLabel.MINUS_X if bit else StateLabel.PLUS_X


@dataclass(frozen=True, slots=True)
class Qubit:
    amp0: complex
    amp1: complex

    def __post_init__(self) -> None:
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"qubit not normalized: |a0|^2+|a1|^2 = {norm!r}")

    def scaled(self, phase: complex) -> Qubit:
        return Qubit(self.amp0 * phase, self.amp1 * phase)


_KETS = {
    StateLabel.PLUS_Z: Qubit(1 + 0j, 0j),
    StateLabel.MINUS_Z: Qubit(0j, 1 + 0j),
    StateLabel.PLUS_X: Qubit(_R + 0j, _R + 0j),
    StateLabel.MINUS_X: Qubit(_R + 0j, -_R + 0j),
}


def ket(label: StateLabel) -> Qubit:
    return _KETS[label]


def apply(op: OpLabel, q: Qubit) -> Qubit:
    """Apply I or U = |0><1| - |1><0|."""
    if op is OpLabel.I:
        return q
    return Qubit(q.amp1, -q.amp0)


def _snap(p: float) -> float:
    # Overlaps here are built from {0, +-1, +-1/sqrt2}; rounding noise must not
    # open branches that are exactly impossible.
    if p < NORM_TOL:
        return 0.0
    if p > 1.0 - NORM_TOL:
        return 1.0
    return p


def inner(a: Qubit, b: Qubit) -> complex:
    """<a|b>."""
    return a.amp0.conjugate() * b.amp0 + a.amp1.conjugate() * b.amp1


def measure_prob(q: Qubit, b: Basis, bit: int) -> float:
    """Born probability of reading `bit` when measuring `q` in basis `b`."""
    return _snap(abs(inner(ket(label_for(b, bit)), q)) ** 2)


def measure(q: Qubit, b: Basis, r: float) -> tuple[int, Qubit]:
    """Projective measurement driven by a uniform draw r in [0, 1).

    Outcome 0 iff r < P(0); the post-measurement state is the matching
    eigenstate of `b`.
    """
    bit = 0 if r < measure_prob(q, b, 0) else 1
    return bit, ket(label_for(b, bit))


def equal_up_to_global_phase(a: Qubit, b: Qubit) -> bool:
    return abs(abs(inner(a, b)) - 1.0) <= PHASE_TOL
