"""Multilayer parameterized quantum circuit (MPQC) ansatz.

Parameter layout: the initial R_y layer (one angle per qubit) first, then for
each of the ``depth`` blocks and each qubit ``j`` the triple
``(t1, t2, t3)`` of ``U = R_z(t1) R_x(t2) R_z(t3)``. Every block is followed by
the block's CNOT entanglement layer.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .statevector import (
    ConfigurationError,
    GateOp,
    StateVector,
    _check_n_qubits,
    apply_gate,
    index_to_bits,
    init_zero_state,
    probabilities,
    sample_indices,
)

CHECKPOINT_FORMAT = "qcbm-params"
CHECKPOINT_VERSION = 1
SHIFT = np.pi / 2


def ring_pairs(n_qubits):
    if n_qubits == 1:
        return ()
    if n_qubits == 2:
        return ((0, 1), (1, 0))
    return tuple((j, (j + 1) % n_qubits) for j in range(n_qubits))


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    depth: int = 3
    entanglement_pairs: tuple = field(default=None)

    def __post_init__(self):
        _check_n_qubits(self.n_qubits)
        if self.depth < 0:
            raise ConfigurationError("depth must be >= 0")
        if self.entanglement_pairs is None:
            object.__setattr__(self, "entanglement_pairs", ring_pairs(self.n_qubits))
        pairs = tuple(tuple(int(q) for q in p) for p in self.entanglement_pairs)
        for c, t in pairs:
            if c == t or not (0 <= c < self.n_qubits and 0 <= t < self.n_qubits):
                raise ConfigurationError(f"invalid entanglement pair {(c, t)}")
        object.__setattr__(self, "entanglement_pairs", pairs)

    @property
    def n_params(self):
        return (3 * self.depth + 1) * self.n_qubits

    @property
    def dim(self):
        return 2**self.n_qubits


def _check_params(spec, params):
    params = np.asarray(params, dtype=np.float64)
    if params.shape[-1] != spec.n_params:
        raise ConfigurationError(
            f"expected {spec.n_params} parameters for n={spec.n_qubits}, d={spec.depth}; "
            f"got {params.shape[-1]}"
        )
    if not np.all(np.isfinite(params)):
        raise ConfigurationError("parameters must be finite")
    return params


def init_params(spec, rng=None):
    """Uniform[0, 2pi) initial angles."""
    rng = np.random.default_rng(rng)
    return rng.uniform(0.0, 2 * np.pi, size=spec.n_params)


def build_circuit(spec, params):
    """Ordered gate list in application order."""
    params = _check_params(spec, params)
    n = spec.n_qubits
    gates = [GateOp("RY", j, angle=float(params[j])) for j in range(n)]
    for layer in range(spec.depth):
        block = params[n + 3 * n * layer : n + 3 * n * (layer + 1)].reshape(n, 3)
        for j in range(n):
            t1, t2, t3 = block[j]
            # U = Rz(t1) Rx(t2) Rz(t3): rightmost factor acts first
            gates.append(GateOp("RZ", j, angle=float(t3)))
            gates.append(GateOp("RX", j, angle=float(t2)))
            gates.append(GateOp("RZ", j, angle=float(t1)))
        gates.extend(GateOp("CNOT", t, control=c) for c, t in spec.entanglement_pairs)
    return gates


def run_gates(spec, params):
    """Evolve |0...0> gate by gate. Slow reference path."""
    state = init_zero_state(spec.n_qubits)
    for gate in build_circuit(spec, params):
        apply_gate(state, gate)
    return state


def _entangler_permutation(spec):
    # new_amps = old_amps[perm] for the whole CNOT layer
    n = spec.n_qubits
    perm = np.arange(2**n)
    for c, t in spec.entanglement_pairs:
        cbit = 1 << (n - 1 - c)
        tbit = 1 << (n - 1 - t)
        src = np.arange(2**n)
        src = np.where(src & cbit, src ^ tbit, src)
        perm = perm[src]
    return perm


def _fused_block_unitaries(block):
    """(B, n, 3) angle triples -> (B, n, 2, 2) matrices Rz(t1) Rx(t2) Rz(t3)."""
    t1, t2, t3 = block[..., 0], block[..., 1], block[..., 2]
    c, s = np.cos(t2 / 2), np.sin(t2 / 2)
    ep = np.exp(-0.5j * (t1 + t3))
    em = np.exp(-0.5j * (t1 - t3))
    u = np.empty(block.shape[:-1] + (2, 2), dtype=np.complex128)
    u[..., 0, 0] = ep * c
    u[..., 0, 1] = -1j * em * s
    u[..., 1, 0] = -1j * np.conj(em) * s
    u[..., 1, 1] = np.conj(ep) * c
    return u


def batch_amplitudes(spec, params):
    """Final amplitudes for a stack of parameter vectors, shape (B, 2^n)."""
    params = np.atleast_2d(_check_params(spec, params))
    n, B = spec.n_qubits, params.shape[0]

    # initial R_y layer on |0>^n is a product state
    half = params[:, :n] / 2
    single = np.stack([np.cos(half), np.sin(half)], axis=-1)  # (B, n, 2)
    psi = single[:, 0, :]
    for j in range(1, n):
        psi = (psi[:, :, None] * single[:, j, None, :]).reshape(B, -1)
    psi = psi.astype(np.complex128)

    perm = _entangler_permutation(spec) if spec.entanglement_pairs else None
    for layer in range(spec.depth):
        block = params[:, n + 3 * n * layer : n + 3 * n * (layer + 1)].reshape(B, n, 3)
        u = _fused_block_unitaries(block)
        for j in range(n):
            view = psi.reshape(B, 2**j, 2, 2 ** (n - j - 1))
            lo, hi = view[:, :, 0, :], view[:, :, 1, :]
            uj = u[:, j, :, :, None, None]
            psi = np.stack([uj[:, 0, 0] * lo + uj[:, 0, 1] * hi,
                            uj[:, 1, 0] * lo + uj[:, 1, 1] * hi], axis=2).reshape(B, -1)
        if perm is not None:
            psi = psi[:, perm]
    return psi


def batch_distributions(spec, params):
    return np.abs(batch_amplitudes(spec, params)) ** 2


def exact_distribution(spec, params):
    """Full Born distribution p_theta over the 2^n basis states."""
    return batch_distributions(spec, params)[0]


def final_state(spec, params):
    return StateVector(spec.n_qubits, batch_amplitudes(spec, params)[0])


def generate(spec, params, batch_size, rng=None):
    """Measure the prepared state ``batch_size`` times; int8 bit matrix."""
    probs = exact_distribution(spec, params)
    return index_to_bits(sample_indices(probs, batch_size, rng), spec.n_qubits)


def shifted_params(params, index, direction):
    """Copy of ``params`` with entry ``index`` moved by ``direction * pi/2``."""
    params = np.array(params, dtype=np.float64)
    if not 0 <= index < params.size:
        raise IndexError(f"parameter index {index} out of range for {params.size} parameters")
    if direction not in (1, -1, "+", "-"):
        raise ValueError("direction must be +1/-1 or '+'/'-'")
    sign = 1 if direction in (1, "+") else -1
    params[index] += sign * SHIFT
    return params


def all_shifted_params(params):
    """Stack of every theta^+ (rows 0..P-1) followed by every theta^- (rows P..2P-1)."""
    params = np.asarray(params, dtype=np.float64)
    eye = np.eye(params.size) * SHIFT
    return np.concatenate([params + eye, params - eye])


def shifted_distributions(spec, params):
    """Exact distributions of all shifted circuits as ``(p_plus, p_minus)``, each (P, 2^n)."""
    probs = batch_distributions(spec, all_shifted_params(params))
    return probs[: spec.n_params], probs[spec.n_params :]


def save_params(path, spec, params):
    params = _check_params(spec, params)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_qubits": spec.n_qubits,
        "depth": spec.depth,
        "entanglement_pairs": [list(p) for p in spec.entanglement_pairs],
        "theta": [float(v).hex() for v in params],
    }
    Path(path).write_text(json.dumps(payload, indent=1))


def load_params(path):
    """Returns ``(spec, params)``; raises ConfigurationError on a corrupt file."""
    try:
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ConfigurationError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ConfigurationError(f"{path}: unsupported version {payload.get('version')}")
        spec = CircuitSpec(
            int(payload["n_qubits"]),
            int(payload["depth"]),
            tuple(tuple(p) for p in payload["entanglement_pairs"]),
        )
        params = np.array([float.fromhex(v) for v in payload["theta"]])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"{path}: corrupt checkpoint ({exc})") from exc
    return spec, _check_params(spec, params)
