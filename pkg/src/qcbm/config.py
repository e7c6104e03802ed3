"""Experiment config files.

One ``[experiment]`` section of ``key = value`` lines (configparser syntax)::

    [experiment]
    scheme = GAN_NS
    bas = 2x2
    depth = 3
    batch_m = 4
    lr_g = 1e-3
    lr_d = 1e-3
    iterations = 1000
    root_seed = 0
    output_dir = runs/gan_ns

``scheme`` and ``bas`` are required; every other key has a default. Adding
``lr_g_list``, ``lr_d_list`` (comma-separated) or ``n_seeds`` turns the run
into a grid search. Unknown keys are rejected.
"""

import configparser
import os
import re
from dataclasses import dataclass, fields
from pathlib import Path

from .bas import BasSpec
from .circuit import CircuitSpec
from .kernels import DEFAULT_BANDWIDTHS
from .statevector import ConfigurationError
from .trainer import SchemeConfig

SECTION = "experiment"
OUTPUT_ROOT_ENV = "QCBM_OUTPUT_ROOT"
REQUIRED = ("scheme", "bas")


def _float_list(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


PARSERS = {
    "scheme": str.strip,
    "bas": BasSpec.parse,
    "depth": int,
    "alpha": float,
    "batch_m": int,
    "lr_g": float,
    "lr_d": float,
    "d_steps_per_g": int,
    "iterations": int,
    "exact_pstar": _bool,
    "root_seed": int,
    "output_dir": str.strip,
    "bandwidths": _float_list,
    "eps_sq": float,
    "eval_interval": int,
    "lr_g_list": _float_list,
    "lr_d_list": _float_list,
    "n_seeds": int,
}


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: SchemeConfig
    bas: BasSpec
    depth: int = 3
    output_dir: str = "runs"
    lr_g_list: tuple = None
    lr_d_list: tuple = None
    n_seeds: int = None
    source: str = None

    @property
    def circuit(self):
        return CircuitSpec(self.bas.n_qubits, self.depth)

    @property
    def is_grid(self):
        return any(v is not None for v in (self.lr_g_list, self.lr_d_list, self.n_seeds))

    def output_path(self):
        """``output_dir`` resolved against ``$QCBM_OUTPUT_ROOT`` when set."""
        root = os.environ.get(OUTPUT_ROOT_ENV)
        path = Path(self.output_dir)
        if root and not path.is_absolute():
            return Path(root) / path
        return path


def _key_lines(text):
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*([A-Za-z_][\w.-]*)\s*[=:]", line)
        if m:
            lines.setdefault(m.group(1).lower(), lineno)
    return lines


def parse_config(text, source="<config>"):
    """Parse and validate config text; raises :class:`ConfigurationError`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    if not parser.has_section(SECTION):
        raise ConfigurationError(f"{source}: missing [{SECTION}] section")
    extra = [s for s in parser.sections() if s != SECTION]
    if extra:
        raise ConfigurationError(f"{source}: unknown section [{extra[0]}]")
    lines = _key_lines(text)
    raw = dict(parser.items(SECTION))

    for key in raw:
        if key not in PARSERS:
            raise ConfigurationError(f"{source}:{lines.get(key, '?')}: unknown key {key!r}")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigurationError(f"{source}: missing required key {key!r}")

    values = {}
    for key, text_value in raw.items():
        try:
            values[key] = PARSERS[key](text_value)
        except (ValueError, ConfigurationError) as exc:
            raise ConfigurationError(f"{source}:{lines.get(key, '?')}: bad value for {key!r}: {exc}") from exc

    scheme_keys = {f.name for f in fields(SchemeConfig)}
    scheme_args = {k: v for k, v in values.items() if k in scheme_keys}
    scheme_args.setdefault("bandwidths", DEFAULT_BANDWIDTHS)
    try:
        scheme = SchemeConfig(**scheme_args)
        cfg = ExperimentConfig(
            scheme=scheme,
            bas=values["bas"],
            depth=values.get("depth", 3),
            output_dir=values.get("output_dir", "runs"),
            lr_g_list=values.get("lr_g_list"),
            lr_d_list=values.get("lr_d_list"),
            n_seeds=values.get("n_seeds"),
            source=source,
        )
    except ConfigurationError as exc:
        # point at the offending line when the message names a key
        named = [k for k in raw if k in str(exc) and k in lines]
        where = f"{source}:{lines[named[0]]}" if named else source
        raise ConfigurationError(f"{where}: {exc}") from exc
    if cfg.depth < 0:
        raise ConfigurationError(f"{source}:{lines.get('depth', '?')}: depth must be >= 0")
    if cfg.n_seeds is not None and cfg.n_seeds < 1:
        raise ConfigurationError(f"{source}:{lines['n_seeds']}: n_seeds must be >= 1")
    for key in ("lr_g_list", "lr_d_list"):
        grid = getattr(cfg, key)
        if grid is not None and (not grid or min(grid) <= 0):
            raise ConfigurationError(f"{source}:{lines[key]}: {key} needs positive values")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))
