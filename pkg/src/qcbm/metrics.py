"""Evaluation of learnt distributions against a Bars-and-Stripes target."""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bas import target_distribution, valid_indices
from .circuit import exact_distribution
from .statevector import ConfigurationError, bits_to_index

REPORT_SCHEMA_VERSION = 1
FEATURE_DUMP_SAMPLES = 500


def total_variation(p, q):
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"support sizes differ: {p.shape} vs {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


def sampled_total_variation(samples, q):
    """Diagnostic only: TV of the empirical frequencies of ``samples`` against ``q``."""
    q = np.asarray(q, dtype=np.float64)
    freq = np.bincount(bits_to_index(samples), minlength=q.size) / len(samples)
    return total_variation(freq, q)


@dataclass
class EvalReport:
    tv: float
    mode_masses: list
    invalid_mass: float
    iteration: int = 0
    schema_version: int = field(default=REPORT_SCHEMA_VERSION)

    def to_json(self):
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def evaluate_distribution(probs, bas_spec, iteration=0):
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size != 2**bas_spec.n_qubits:
        raise ConfigurationError(
            f"distribution over {probs.size} outcomes does not match BAS({bas_spec})"
        )
    idx = valid_indices(bas_spec)
    modes = probs[idx]
    return EvalReport(
        tv=total_variation(probs, target_distribution(bas_spec)),
        mode_masses=[float(v) for v in modes],
        invalid_mass=float(1.0 - modes.sum()),
        iteration=int(iteration),
    )


def evaluate(circuit_spec, params, bas_spec, iteration=0):
    """TV, per-mode masses and invalid mass from the exact simulator table."""
    if circuit_spec.n_qubits != bas_spec.n_qubits:
        raise ConfigurationError(
            f"circuit has {circuit_spec.n_qubits} qubits but BAS({bas_spec}) needs {bas_spec.n_qubits}"
        )
    return evaluate_distribution(exact_distribution(circuit_spec, params), bas_spec, iteration)


def write_trace_csv(reports, path):
    """Rows ``iteration, tv, invalid_mass, mode_0..mode_{N-1}``."""
    reports = list(reports)
    n_modes = len(reports[0].mode_masses) if reports else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "tv", "invalid_mass"] + [f"mode_{i}" for i in range(n_modes)])
        for r in reports:
            writer.writerow([r.iteration, repr(r.tv), repr(r.invalid_mass)] + [repr(v) for v in r.mode_masses])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        modes = [float(row[k]) for k in row if k.startswith("mode_")]
        out.append(EvalReport(float(row["tv"]), modes, float(row["invalid_mass"]), int(row["iteration"])))
    return out


def dump_features(net, gen_batch, real_batch, path):
    """CSV of 2-D feature vectors ``x1, x2, source`` for generated and real samples."""
    path = Path(path)
    rows = []
    for source, batch in (("gen", gen_batch), ("real", real_batch)):
        feats = net.features(np.asarray(batch), train=False)
        rows.extend((f[0], f[1], source) for f in feats)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "source"])
        for x1, x2, source in rows:
            writer.writerow([repr(float(x1)), repr(float(x2)), source])
    return path
