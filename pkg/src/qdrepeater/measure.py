"""Projective measurement of qubits in the {g, e} product basis.

`enumerate_branches` lists every outcome string with its exact Born
probability and renormalized post-measurement state; `sample` draws one
branch from a seeded, platform-stable random stream.  Measured qubits stay
in the state (collapsed onto their outcome ket); `discard` drops subsystems
that sit in a definite basis level once they are no longer wanted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .hilbert import QUBIT_NAMES, StateVector

ZERO_PROBABILITY = 1e-14

_DISCARD_TOL = 1e-12


@dataclass(frozen=True)
class Branch:
    """One projective-measurement outcome.

    outcomes maps each measured label to "g" or "e" (in measurement order);
    post_state keeps the measured qubits, collapsed onto the outcome ket,
    and is renormalized whenever probability > 1e-14 (`negligible` is set
    otherwise and the zero-norm projection is returned as-is).
    """

    outcomes: Mapping[str, str]
    probability: float
    post_state: StateVector
    negligible: bool = False

    def outcome_string(self) -> str:
        return "".join(self.outcomes.values())


@dataclass
class RngStream:
    """Seedable random stream with platform-stable draws.

    Streams are identified by (master_seed, stream_index); equal identifiers
    reproduce the exact same draw sequence on every platform (numpy PCG64
    under SeedSequence(master_seed, spawn_key=(stream_index,))).  A stream
    mutates only its own draw counter, so distinct streams can be used
    concurrently without coordination.
    """

    master_seed: int
    stream_index: int = 0
    algorithm: str = "pcg64"
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)
    _draw_count: int = field(init=False, default=0, repr=False, compare=False)

    def __post_init__(self):
        if self.algorithm != "pcg64":
            raise ValueError(f"unsupported rng algorithm {self.algorithm!r}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned int, got {self.master_seed}")
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        self._generator = np.random.Generator(np.random.PCG64(seq))

    def uniform(self) -> float:
        """Next double in [0, 1)."""
        self._draw_count += 1
        return float(self._generator.random())

    @property
    def draw_count(self) -> int:
        return self._draw_count

    def spawn(self, stream_index: int) -> "RngStream":
        """Independent sibling stream under the same master seed."""
        return RngStream(self.master_seed, stream_index, self.algorithm)


def _measurement_layout(state: StateVector, measured: Sequence[str]):
    measured = list(measured)
    if not measured:
        raise ValueError("no labels to measure")
    if len(set(measured)) != len(measured):
        raise ValueError(f"repeated measured labels {measured}")
    axes = [state.axis(m) for m in measured]
    for m, a in zip(measured, axes):
        if state.dims[a] != 2:
            raise ValueError(f"measured subsystem {m!r} has dimension {state.dims[a]}, not a qubit")
    perm = axes + [i for i in range(len(state.dims)) if i not in axes]
    inverse = [0] * len(perm)
    for i, p in enumerate(perm):
        inverse[p] = i
    arr = state.tensor_view().transpose(perm)
    flat = arr.reshape(2 ** len(measured), -1)
    probs = np.einsum("ij,ij->i", flat.real, flat.real) + np.einsum(
        "ij,ij->i", flat.imag, flat.imag
    )
    return measured, arr.shape, inverse, flat, probs


def _branch(state, measured, shape, inverse, flat, probs, k) -> Branch:
    m = len(measured)
    outcome_bits = [(k >> (m - 1 - i)) & 1 for i in range(m)]
    outcomes = {lab: QUBIT_NAMES[b] for lab, b in zip(measured, outcome_bits)}
    p = float(probs[k])
    projected = np.zeros_like(flat)
    negligible = p <= ZERO_PROBABILITY
    projected[k] = flat[k] if negligible else flat[k] / np.sqrt(p)
    arr = projected.reshape(shape).transpose(inverse)
    post = StateVector._unchecked(
        np.ascontiguousarray(arr).reshape(-1), state.dims, state.labels
    )
    return Branch(outcomes=outcomes, probability=p, post_state=post, negligible=negligible)


def enumerate_branches(state: StateVector, measured: Sequence[str]) -> list[Branch]:
    """All 2^m outcome branches of measuring the listed qubits, Born-weighted.

    Branches are ordered by outcome string with g before e (gg, ge, eg, ee
    for two qubits).  Zero-probability outcomes are included and flagged.
    """
    measured, shape, inverse, flat, probs = _measurement_layout(state, measured)
    return [
        _branch(state, measured, shape, inverse, flat, probs, k)
        for k in range(2 ** len(measured))
    ]


def sample(state: StateVector, measured: Sequence[str], rng: RngStream) -> Branch:
    """Draw one measurement branch with its Born probability (one rng draw)."""
    measured, shape, inverse, flat, probs = _measurement_layout(state, measured)
    total = probs.sum()
    u = rng.uniform() * total
    k = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    k = min(k, len(probs) - 1)
    return _branch(state, measured, shape, inverse, flat, probs, k)


def discard(state: StateVector, labels: Sequence[str]) -> StateVector:
    """Drop subsystems that sit in a definite basis level (product factors).

    Raises if any listed subsystem still carries weight in more than one
    level; measured qubits always qualify.
    """
    labels = list(labels)
    if len(set(labels)) != len(labels):
        raise ValueError(f"repeated labels in discard list {labels}")
    out = state
    for lab in labels:
        ax = out.axis(lab)
        arr = out.tensor_view()
        weights = np.sum(
            np.abs(arr) ** 2, axis=tuple(i for i in range(len(out.dims)) if i != ax)
        )
        level = int(np.argmax(weights))
        residue = weights.sum() - weights[level]
        if residue > _DISCARD_TOL**2:
            raise ValueError(
                f"cannot discard {lab!r}: population {residue:.3e} outside level {level}"
            )
        sliced = np.take(arr, level, axis=ax)
        dims = out.dims[:ax] + out.dims[ax + 1 :]
        labs = out.labels[:ax] + out.labels[ax + 1 :]
        if not dims:
            raise ValueError("discard would remove every subsystem")
        out = StateVector(sliced.reshape(-1), dims, labs)
    return out
