"""Training loops for the QCBM schemes, the two-step fine-tune, and grid search."""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .bas import BasSpec, sample_target, target_distribution, valid_indices
from .circuit import CircuitSpec, exact_distribution, generate, init_params, save_params
from .gradients import (
    as_weights,
    empirical_weights,
    gan_ns_functional,
    mcr2_explicit_functional,
    mmd_functional,
    shift_contract,
)
from .kernels import DEFAULT_BANDWIDTHS, RbfKernel
from .losses import (
    Mcr2Config,
    gan_d_score_grads,
    mcr2_feature_grads,
    mmd_feature_grads,
)
from .metrics import evaluate, write_trace_csv
from .neural import Adam, MlpNet
from .statevector import ConfigurationError, all_bitstrings, index_to_bits

log = logging.getLogger(__name__)

SCHEMES = ("MMD_RBF", "GAN_NS", "GAN_MCR2", "INTER_NS_MCR2", "DNN_MMD", "FINE_TUNE")
NET_HEAD = {
    "MMD_RBF": None,
    "FINE_TUNE": None,
    "GAN_NS": "scorer",
    "INTER_NS_MCR2": "scorer",
    "GAN_MCR2": "features",
    "DNN_MMD": "features",
}
RESULT_SCHEMA_VERSION = 1


class TrainingError(RuntimeError):
    """A run produced a non-finite loss or gradient."""


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "GAN_NS"
    alpha: float = 0.0
    batch_m: int = 4
    lr_g: float = 1e-3
    lr_d: float = 1e-3
    d_steps_per_g: int = 2
    iterations: int = 1000
    exact_pstar: bool = False
    root_seed: int = 0
    eval_interval: int = 10
    bandwidths: tuple = DEFAULT_BANDWIDTHS
    eps_sq: float = 0.5

    def __post_init__(self):
        scheme = str(self.scheme).upper().replace("-", "_")
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)
        object.__setattr__(self, "bandwidths", tuple(float(b) for b in self.bandwidths))
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.batch_m < 1:
            raise ConfigurationError("batch_m must be >= 1")
        if self.d_steps_per_g < 0:
            raise ConfigurationError("d_steps_per_g must be >= 0")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.eval_interval < 1:
            raise ConfigurationError("eval_interval must be >= 1")
        for name in ("lr_g", "lr_d"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.eps_sq <= 0:
            raise ConfigurationError("eps_sq must be positive")

    @property
    def head(self):
        return NET_HEAD[self.scheme]


@dataclass
class RunResult:
    config: SchemeConfig
    circuit_spec: CircuitSpec
    bas_spec: BasSpec
    tv_trace: list
    final_params: np.ndarray
    final_net: MlpNet = None
    seed: int = 0
    history: list = field(default_factory=list)

    @property
    def final_report(self):
        return self.tv_trace[-1]

    def save(self, run_dir):
        """Write ``trace.csv``, ``report.json``, ``params.json`` and ``net.npz``."""
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        write_trace_csv(self.tv_trace, run_dir / "trace.csv")
        report = {
            "schema_version": RESULT_SCHEMA_VERSION,
            "config": asdict(self.config),
            "bas": str(self.bas_spec),
            "depth": self.circuit_spec.depth,
            "seed": self.seed,
            "final": asdict(self.final_report),
        }
        (run_dir / "report.json").write_text(json.dumps(report, indent=1))
        save_params(run_dir / "params.json", self.circuit_spec, self.final_params)
        if self.final_net is not None:
            self.final_net.save(run_dir / "net.npz")
        return run_dir


def run_dir_name(cfg):
    return f"{cfg.scheme.lower()}_a{cfg.alpha:g}_m{cfg.batch_m}_lrg{cfg.lr_g:g}_lrd{cfg.lr_d:g}_seed{cfg.root_seed}"


class _Run:
    """Mutable state of a single training run."""

    def __init__(self, cfg, circuit_spec, bas_spec, params, net, rng):
        self.cfg = cfg
        self.spec = circuit_spec
        self.bas = bas_spec
        self.n = circuit_spec.n_qubits
        self.rng = rng
        self.params = np.array(params, dtype=np.float64)
        self.net = net
        self.kernel = RbfKernel(cfg.bandwidths)
        self.mcr = Mcr2Config(cfg.eps_sq)
        self.target = target_distribution(bas_spec)
        self.valid_bits = index_to_bits(valid_indices(bas_spec), self.n)
        self.points = all_bitstrings(self.n)
        self.bits_kernel = self.kernel(self.points, self.points)
        self.g_opt = Adam([self.params], lr=cfg.lr_g)
        self.d_opt = Adam(net.parameters(), lr=cfg.lr_d) if net is not None else None

    # -- discriminator ------------------------------------------------------

    def _real_for_d(self):
        if self.cfg.exact_pstar:
            # uniform target: a pass over every valid pattern is the exact expectation
            return self.valid_bits
        return sample_target(self.bas, self.cfg.batch_m, self.rng)

    def d_step(self):
        cfg, net = self.cfg, self.net
        real = self._real_for_d()
        gen = generate(self.spec, self.params, cfg.batch_m, self.rng)
        out = net.forward(np.concatenate([real, gen]), train=True)
        r, g = out[: len(real)], out[len(real) :]
        if cfg.scheme in ("GAN_NS", "INTER_NS_MCR2"):
            up_r, up_g = gan_d_score_grads(r, g)
        elif cfg.scheme == "GAN_MCR2":
            # ascend the rate reduction: descend its negative
            g_gen, g_real = mcr2_feature_grads(g, r, self.mcr)
            up_r, up_g = -g_real, -g_gen
        else:
            g_gen, g_real = mmd_feature_grads(self.kernel, g, r)
            up_r, up_g = -g_real, -g_gen
        net.backward(np.concatenate([up_r, up_g]))
        grads = net.gradients()
        if not all(np.all(np.isfinite(x)) for x in grads):
            raise TrainingError(f"non-finite discriminator gradient in {cfg.scheme}")
        self.d_opt.step(grads)

    # -- generator ----------------------------------------------------------

    def _w_real(self):
        if self.cfg.exact_pstar:
            return self.target
        return as_weights(sample_target(self.bas, self.cfg.batch_m, self.rng), self.n)

    def _w_model(self):
        return empirical_weights(exact_distribution(self.spec, self.params), self.cfg.batch_m, self.rng)

    def functional(self):
        cfg = self.cfg
        scheme = "MMD_RBF" if cfg.scheme == "FINE_TUNE" else cfg.scheme
        if scheme == "GAN_NS":
            return gan_ns_functional(self.net.forward(self.points))
        w_model, w_real = self._w_model(), self._w_real()
        if scheme == "MMD_RBF":
            return mmd_functional(self.bits_kernel, w_model, w_real)
        if scheme == "DNN_MMD":
            feats = self.net.forward(self.points)
            return mmd_functional(self.kernel(feats, feats), w_model, w_real)
        feats = self.net.features(self.points)
        g_mcr = mcr2_explicit_functional(feats, w_model, w_real, self.mcr)
        if scheme == "GAN_MCR2":
            return g_mcr
        g_ns = gan_ns_functional(self.net.forward(self.points))
        return (1 - cfg.alpha) * g_ns + cfg.alpha * g_mcr

    def g_step(self):
        g = self.functional()
        grad = shift_contract(self.spec, self.params, g, self.cfg.batch_m, self.rng)
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite generator gradient in {self.cfg.scheme}")
        self.g_opt.step([grad])

    def step(self):
        if self.net is not None:
            for _ in range(self.cfg.d_steps_per_g):
                self.d_step()
        self.g_step()


def _streams(root_seed):
    init_seq, net_seq, train_seq = np.random.SeedSequence(root_seed).spawn(3)
    return (np.random.default_rng(init_seq), np.random.default_rng(net_seq),
            np.random.default_rng(train_seq))


def train(cfg, circuit_spec, bas_spec, params=None, net=None, start_iteration=0):
    """Run ``cfg.iterations`` generator steps; fully deterministic per ``cfg.root_seed``.

    ``params``/``net`` default to fresh random initializations drawn from the
    root seed.
    """
    if circuit_spec.n_qubits != bas_spec.n_qubits:
        raise ConfigurationError(
            f"circuit has {circuit_spec.n_qubits} qubits; BAS({bas_spec}) needs {bas_spec.n_qubits}"
        )
    init_rng, net_rng, train_rng = _streams(cfg.root_seed)
    theta0 = init_params(circuit_spec, init_rng)
    if params is None:
        params = theta0
    head = cfg.head
    if head is None:
        if net is not None and cfg.scheme != "FINE_TUNE":
            raise ConfigurationError(f"{cfg.scheme} does not use a network")
    elif net is None:
        net = MlpNet(circuit_spec.n_qubits, head, rng=net_rng)
    elif net.head != head:
        raise ConfigurationError(f"{cfg.scheme} needs a {head} network, got {net.head}")

    run = _Run(cfg, circuit_spec, bas_spec, params, net if head else None, train_rng)
    trace = [evaluate(circuit_spec, run.params, bas_spec, start_iteration)]
    for it in range(1, cfg.iterations + 1):
        run.step()
        if it % cfg.eval_interval == 0 or it == cfg.iterations:
            trace.append(evaluate(circuit_spec, run.params, bas_spec, start_iteration + it))
    log.debug("%s seed=%d final tv=%.4f", cfg.scheme, cfg.root_seed, trace[-1].tv)
    return RunResult(cfg, circuit_spec, bas_spec, trace, run.params.copy(),
                     net, cfg.root_seed)


def fine_tune(run, ft_cfg):
    """Continue ``run`` from its final parameters with the image-space MMD loss."""
    if ft_cfg.scheme not in ("MMD_RBF", "FINE_TUNE"):
        raise ConfigurationError("fine-tuning uses the MMD_RBF scheme")
    last = run.tv_trace[-1].iteration
    result = train(replace(ft_cfg, scheme="MMD_RBF"), run.circuit_spec, run.bas_spec,
                   params=run.final_params, start_iteration=last)
    result.tv_trace = list(run.tv_trace) + result.tv_trace[1:]
    result.final_net = run.final_net
    result.history = [run.config] + list(run.history)
    return result


def seed_list(root_seed, n_seeds):
    return [root_seed + i for i in range(n_seeds)]


def run_many(configs, circuit_spec, bas_spec, jobs=1):
    """Train each config; runs are independent so they may go to worker processes."""
    if jobs == 1:
        return [train(c, circuit_spec, bas_spec) for c in configs]
    return Parallel(n_jobs=jobs)(delayed(train)(c, circuit_spec, bas_spec) for c in configs)


def aggregate_traces(runs):
    """Mean and one-standard-deviation band of the TV traces of ``runs``."""
    tv = np.array([[r.tv for r in run.tv_trace] for run in runs])
    return {
        "iteration": [r.iteration for r in runs[0].tv_trace],
        "mean": tv.mean(axis=0).tolist(),
        "sd": tv.std(axis=0).tolist(),
        "final_tv": tv[:, -1].tolist(),
    }


def grid_search(base_cfg, circuit_spec, bas_spec, lr_g_list, lr_d_list, n_seeds, jobs=1):
    """One cell per ``(lr_g, lr_d)``; each cell trains ``n_seeds`` runs."""
    if not lr_g_list or not lr_d_list or n_seeds < 1:
        raise ConfigurationError("grid search needs non-empty grids and n_seeds >= 1")
    cells = [(lg, ld) for lg in lr_g_list for ld in lr_d_list]
    configs = [
        replace(base_cfg, lr_g=lg, lr_d=ld, root_seed=s)
        for lg, ld in cells
        for s in seed_list(base_cfg.root_seed, n_seeds)
    ]
    runs = run_many(configs, circuit_spec, bas_spec, jobs)
    out = []
    for i, (lg, ld) in enumerate(cells):
        cell_runs = runs[i * n_seeds : (i + 1) * n_seeds]
        out.append({"lr_g": lg, "lr_d": ld, "runs": cell_runs, **aggregate_traces(cell_runs)})
    return out

