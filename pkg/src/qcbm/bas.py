"""Bars-and-Stripes datasets.

Pixel ``(r, c)`` of an ``h x w`` image maps to bit ``r * w + c`` (row-major);
a 1 bit means the pixel is on.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .statevector import MAX_QUBITS, ConfigurationError, all_bitstrings, index_to_bits


@dataclass(frozen=True)
class BasSpec:
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigurationError("BAS height and width must be >= 1")
        if self.height * self.width > MAX_QUBITS:
            raise ConfigurationError(f"BAS({self.height},{self.width}) exceeds {MAX_QUBITS} pixels")

    @classmethod
    def parse(cls, text):
        """Parse ``"HxW"`` (e.g. ``"2x3"``)."""
        try:
            h, w = str(text).lower().split("x")
            return cls(int(h), int(w))
        except ValueError as exc:
            raise ConfigurationError(f"expected HxW, got {text!r}") from exc

    @property
    def n_qubits(self):
        return self.height * self.width

    @property
    def n_modes(self):
        return 2**self.height + 2**self.width - 2

    def __str__(self):
        return f"{self.height}x{self.width}"


def is_valid_bas(bits, spec):
    bits = np.asarray(bits)
    if bits.shape[-1] != spec.n_qubits:
        raise ConfigurationError(f"expected {spec.n_qubits} bits, got {bits.shape[-1]}")
    img = bits.reshape(bits.shape[:-1] + (spec.height, spec.width))
    rows_const = np.all(img == img[..., :, :1], axis=(-2, -1))
    cols_const = np.all(img == img[..., :1, :], axis=(-2, -1))
    out = rows_const | cols_const
    return bool(out) if out.ndim == 0 else out


def valid_indices(spec):
    """Basis indices of the valid patterns, ascending."""
    return np.flatnonzero(is_valid_bas(all_bitstrings(spec.n_qubits), spec))


def target_distribution(spec):
    probs = np.zeros(2**spec.n_qubits)
    idx = valid_indices(spec)
    probs[idx] = 1.0 / idx.size
    return probs


def sample_target(spec, batch_size, rng=None):
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    rng = np.random.default_rng(rng)
    idx = valid_indices(spec)
    return index_to_bits(rng.choice(idx, size=batch_size), spec.n_qubits)


def dump_dataset(spec, path):
    """Write valid patterns one bitstring per line plus a ``.json`` sidecar."""
    path = Path(path)
    bits = index_to_bits(valid_indices(spec), spec.n_qubits)
    path.write_text("".join("".join(map(str, row)) + "\n" for row in bits))
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(
        json.dumps(
            {"height": spec.height, "width": spec.width, "n_bas": spec.n_modes,
             "pixel_order": "row-major"},
            indent=1,
        )
    )
    return path, sidecar
