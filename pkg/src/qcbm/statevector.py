"""Dense statevector simulation with single-qubit rotations and CNOT.

Qubit 0 is the most significant bit of a basis index, so basis index ``x``
reads as the bitstring of ``x`` in base two, left to right.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

MAX_QUBITS = 20

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CNOT",)


class ConfigurationError(ValueError):
    """Raised for malformed circuit, gate or dataset configuration."""


def rx_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz_matrix(theta):
    return np.array(
        [[np.exp(-0.5j * theta), 0.0], [0.0, np.exp(0.5j * theta)]], dtype=np.complex128
    )


_MATRIX = {"RX": rx_matrix, "RY": ry_matrix, "RZ": rz_matrix}

CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)


@dataclass(frozen=True)
class GateOp:
    kind: str
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        if self.target < 0:
            raise ConfigurationError("negative qubit index")
        if self.kind == "CNOT":
            if self.control is None or self.control < 0:
                raise ConfigurationError("CNOT needs a non-negative control qubit")
            if self.control == self.target:
                raise ConfigurationError("CNOT control and target must differ")
        else:
            if self.angle is None or not np.isfinite(self.angle):
                raise ConfigurationError(f"{self.kind} needs a finite angle")

    def matrix(self):
        """Unitary of the gate (2x2, or 4x4 in (control, target) order for CNOT)."""
        if self.kind == "CNOT":
            return CNOT_MATRIX.copy()
        return _MATRIX[self.kind](self.angle)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ConfigurationError(
                f"expected {2 ** self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


def _check_n_qubits(n_qubits):
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def init_zero_state(n_qubits):
    _check_n_qubits(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def apply_gate(state, gate):
    """Apply ``gate`` to ``state`` in place and return the state.

    The amplitude array is viewed as ``(left, 2, right)`` around the target
    qubit so no 2^n x 2^n operator is ever built.
    """
    n = state.n_qubits
    qubits = [gate.target] + ([gate.control] if gate.control is not None else [])
    if any(q >= n for q in qubits):
        raise ConfigurationError(f"gate {gate} out of range for {n} qubits")

    if gate.kind == "CNOT":
        view = state.amplitudes.reshape((2,) * n)
        idx = [slice(None)] * n
        idx[gate.control] = 1
        sub = view[tuple(idx)]
        # target axis index shifts down by one once the control axis is removed
        t_axis = gate.target - (1 if gate.control < gate.target else 0)
        sub[...] = np.flip(sub, axis=t_axis).copy()
        return state

    u = gate.matrix()
    view = state.amplitudes.reshape(2**gate.target, 2, 2 ** (n - gate.target - 1))
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
    view[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1
    return state


def probabilities(state):
    """Born-rule probabilities ``|amplitude|^2`` for every basis index."""
    return np.abs(state.amplitudes) ** 2


def index_to_bits(indices, n_bits):
    """Map basis indices to rows of bits, most significant (qubit 0) first."""
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n_bits - 1, -1, -1)
    return ((indices[..., None] >> shifts) & 1).astype(np.int8)


def bits_to_index(bits):
    bits = np.asarray(bits, dtype=np.int64)
    n_bits = bits.shape[-1]
    weights = 1 << np.arange(n_bits - 1, -1, -1)
    return bits @ weights


def all_bitstrings(n_bits):
    return index_to_bits(np.arange(2**n_bits), n_bits)


def sample_indices(probs, batch_size, rng):
    """Draw ``batch_size`` i.i.d. basis indices from a probability table."""
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    rng = np.random.default_rng(rng)
    p = np.clip(np.asarray(probs, dtype=np.float64), 0.0, None)
    return rng.choice(p.size, size=batch_size, p=p / p.sum())


def sample(state, batch_size, rng=None):
    """Measure ``state`` ``batch_size`` times; returns an int8 bit matrix."""
    idx = sample_indices(probabilities(state), batch_size, rng)
    return index_to_bits(idx, state.n_qubits)
