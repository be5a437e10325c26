"""Sparsity patterns on feedback gains and the Hadamard-mask constraint."""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .system import CostWeights, LtiSystem, _as_matrix, _freeze


@dataclass(frozen=True)
class SparsityMask:
    """0/1 indicator of the allowed nonzero entries of an m-by-n gain."""

    indicator: np.ndarray

    def __post_init__(self):
        ind = _as_matrix(self.indicator, name="indicator")
        if not np.all((ind == 0.0) | (ind == 1.0)):
            raise ValueError("mask entries must be exactly 0 or 1")
        if np.sum(ind) < 1:
            raise ValueError("an all-zero gain structure is degenerate")
        object.__setattr__(self, "indicator", _freeze(ind))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.indicator.shape

    @property
    def nnz(self) -> int:
        """Number of allowed (free) gain entries."""
        return int(np.sum(self.indicator))

    @property
    def complement(self) -> np.ndarray:
        return 1.0 - self.indicator

    @classmethod
    def all_ones(cls, num_inputs: int, num_states: int) -> "SparsityMask":
        return cls(np.ones((num_inputs, num_states)))

    @classmethod
    def from_zero_positions(cls, num_inputs: int, num_states: int,
                            zeros: Sequence[Tuple[int, int]]) -> "SparsityMask":
        """Build a mask from 0-indexed (row, col) positions forced to zero."""
        ind = np.ones((num_inputs, num_states))
        for (i, j) in zeros:
            if not (0 <= i < num_inputs and 0 <= j < num_states):
                raise ValueError(f"zero position ({i}, {j}) out of range")
            ind[i, j] = 0.0
        return cls(ind)

    def zero_positions(self):
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.complement))]


def off_pattern(gain, mask: SparsityMask) -> np.ndarray:
    """Component of the gain outside the allowed pattern (Hadamard with the
    mask complement); this is the structure-violating part and a projection."""
    gain = np.asarray(gain, dtype=float)
    if gain.shape != mask.shape:
        raise ValueError(f"gain shape {gain.shape} != mask shape {mask.shape}")
    return gain * mask.complement


def on_pattern(gain, mask: SparsityMask) -> np.ndarray:
    """Component of the gain on the allowed pattern (Hadamard with the mask)."""
    gain = np.asarray(gain, dtype=float)
    if gain.shape != mask.shape:
        raise ValueError(f"gain shape {gain.shape} != mask shape {mask.shape}")
    return gain * mask.indicator


def structured_gain(P, sys: LtiSystem, weights: CostWeights,
                    mask: SparsityMask) -> np.ndarray:
    """Gain R^-1 B' P with the disallowed entries removed.

    Subtracting the off-pattern part of R^-1 B' P from itself leaves exactly
    the masked gain, so the result satisfies the structure bitwise.
    """
    P = np.asarray(P, dtype=float)
    phi = np.linalg.solve(weights.R, sys.B.T @ P)
    return on_pattern(phi, mask)


@dataclass(frozen=True)
class MembershipReport:
    ok: bool
    max_violation: float
    violations: tuple  # (row, col, magnitude) triples, 0-indexed

    def __bool__(self) -> bool:
        return self.ok


def check_membership(gain, mask: SparsityMask, tol: float = 0.0) -> MembershipReport:
    """Check |gain| <= tol at every disallowed position."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    off = np.abs(off_pattern(gain, mask))
    bad = np.argwhere(off > tol)
    violations = tuple((int(i), int(j), float(off[i, j])) for i, j in bad)
    return MembershipReport(ok=len(violations) == 0,
                            max_violation=float(off.max()) if off.size else 0.0,
                            violations=violations)
