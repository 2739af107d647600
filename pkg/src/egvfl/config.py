"""Experiment configuration files.

Grammar: ``key = value`` lines, ``#`` or ``;`` comments. Keys before the
first section header describe the experiment; each ``[solver.<name>]``
section adds one solver run with its own overrides. ``<name>`` is also
the variant unless the section sets ``variant``. Example::

    data = synthetic
    s = 200
    d = 50
    cond = 1000
    K = 2000
    seeds = 1, 2, 3

    [solver.eg_basic_beta]
    variant = eg_basic
    beta_trick = true

    [solver.nesterov]
"""

import configparser
import os
import re
from dataclasses import dataclass, field

from .comm import Compressor, EncryptionScheme, NoiseSpec
from .errors import ConfigError
from .solvers.state import VARIANTS, SolverConfig

_TOP = "experiment"

_EXPERIMENT_KEYS = {
    "data", "path", "s", "d", "cond", "noise", "data_seed", "n_clients", "shuffle",
    "K", "seeds", "report_every", "outdir", "lambda", "reg", "beta_trick",
    "lambda_max_mode", "block_form", "lr_convention",
}

_SOLVER_KEYS = {
    "variant", "gamma", "gamma_scale", "p", "rho", "compressor", "k_fraction", "rng_mode",
    "sigma", "scheme", "secret", "K", "beta_trick", "coords", "gamma_w", "radius",
    "admm_inner", "inner_tol", "metric_iterate", "report_every",
}


@dataclass
class SolverEntry:
    name: str
    options: dict


@dataclass
class ExperimentConfig:
    data: str = "synthetic"
    path: str = None
    s: int = 200
    d: int = 50
    cond: float = 1e3
    noise: float = 0.0
    data_seed: int = 1
    n_clients: int = 5
    shuffle: bool = False
    K: int = 1000
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    report_every: int = 10
    outdir: str = None
    lam: object = "lmax_over_1e3"
    reg: str = "ridge"
    beta_trick: bool = False
    lambda_max_mode: str = "exact"
    block_form: str = "max"
    lr_convention: str = "2lambda"
    solvers: list = field(default_factory=list)
    source: str = None


def _line_of(text, section, key):
    """1-based line of `key` inside `section` (top level when section is None)."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"^{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return lineno
    return None


def _section_line(text, section):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.strip() == f"[{section}]":
            return lineno
    return None


def _convert(text, section, key, raw, kind):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "intlist":
            vals = [int(v) for v in re.split(r"[,\s]+", raw.strip()) if v]
            if not vals:
                raise ValueError
            return vals
        return raw.strip()
    except ValueError:
        name = kind.__name__ if isinstance(kind, type) else "list of integers"
        raise ConfigError(f"{key}: cannot read {raw!r} as {name}",
                          line=_line_of(text, section, key)) from None


_EXP_TYPES = {
    "s": int, "d": int, "cond": float, "noise": float, "data_seed": int, "n_clients": int,
    "shuffle": bool, "K": int, "seeds": "intlist", "report_every": int, "beta_trick": bool,
}

_SOLVER_TYPES = {
    "gamma_scale": float, "p": float, "k_fraction": float, "sigma": float, "secret": float,
    "K": int, "beta_trick": bool, "coords": int, "radius": float, "inner_tol": float,
    "report_every": int,
}


def parse_config(text, base_dir=None):
    """Parse experiment config `text`; errors carry the offending line."""
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        strict=True)
    parser.optionxform = str
    try:
        # top-level keys live in an implicit section; shift line numbers back
        parser.read_string(f"[{_TOP}]\n" + text)
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", line=exc.lineno - 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", line=exc.lineno - 1) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - 1 if exc.errors else None
        raise ConfigError("expected 'key = value'", line=lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None

    cfg = ExperimentConfig()
    for key, raw in parser[_TOP].items():
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=_line_of(text, None, key))
        val = _convert(text, None, key, raw, _EXP_TYPES.get(key, str))
        if key == "lambda":
            if val != "lmax_over_1e3":
                val = _convert(text, None, key, raw, float)
            cfg.lam = val
        else:
            setattr(cfg, key, val)

    if cfg.data not in ("synthetic", "libsvm"):
        raise ConfigError(f"data must be 'synthetic' or 'libsvm', got {cfg.data!r}",
                          line=_line_of(text, None, "data"))
    if cfg.data == "libsvm":
        if not cfg.path:
            raise ConfigError("libsvm data needs a 'path'", line=_line_of(text, None, "data"))
        if base_dir and not os.path.isabs(cfg.path):
            cfg.path = os.path.join(base_dir, cfg.path)
        if not os.path.exists(cfg.path):
            raise ConfigError(f"data file {cfg.path!r} does not exist",
                              line=_line_of(text, None, "path"))
    for key in ("K", "n_clients", "report_every"):
        if getattr(cfg, key) < (0 if key == "K" else 1):
            raise ConfigError(f"{key} out of range", line=_line_of(text, None, key))

    for section in parser.sections():
        if section == _TOP:
            continue
        if not section.startswith("solver."):
            raise ConfigError(f"unknown section [{section}]", line=_section_line(text, section))
        name = section[len("solver."):]
        opts = {}
        for key, raw in parser[section].items():
            if key not in _SOLVER_KEYS:
                raise ConfigError(f"unknown solver key {key!r}", line=_line_of(text, section, key))
            opts[key] = _convert(text, section, key, raw, _SOLVER_TYPES.get(key, str))
        variant = opts.get("variant", name)
        if variant not in VARIANTS:
            line = _line_of(text, section, "variant") or _section_line(text, section)
            raise ConfigError(f"unknown solver {variant!r}", line=line)
        opts["variant"] = variant
        try:
            solver_config(cfg, SolverEntry(name, opts), seed=1)
        except ConfigError as exc:
            if exc.line is None:
                raise ConfigError(str(exc), line=_section_line(text, section)) from None
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}]: {exc}", line=_section_line(text, section)) from None
        cfg.solvers.append(SolverEntry(name, opts))
    if not cfg.solvers:
        raise ConfigError("config lists no [solver.<name>] sections")
    return cfg


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    cfg = parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
    cfg.source = str(path)
    return cfg


def solver_config(cfg, entry, seed):
    """Build the `SolverConfig` for one (solver, seed) pair."""
    o = entry.options
    gamma = o.get("gamma", "auto")
    if gamma != "auto":
        gamma = float(gamma)
    rho = o.get("rho", "auto")
    if rho != "auto":
        rho = float(rho)
    gamma_w = o.get("gamma_w")
    if gamma_w is not None:
        gamma_w = float(gamma_w)
    return SolverConfig(
        variant=o["variant"],
        gamma=gamma,
        p=o.get("p", 0.1),
        rho=rho,
        compressor=Compressor(o.get("compressor", "identity"), o.get("k_fraction", 1.0),
                              o.get("rng_mode", "shared_seed")),
        noise=NoiseSpec(o.get("sigma", 0.0)),
        scheme=EncryptionScheme(o.get("scheme", "plaintext"), o.get("secret", 3.7)),
        K=o.get("K", cfg.K),
        master_seed=seed,
        report_every=o.get("report_every", cfg.report_every),
        coords=o.get("coords", 1),
        gamma_w=gamma_w,
        radius=o.get("radius", 1.0),
        admm_inner=o.get("admm_inner", "closed_form"),
        inner_tol=o.get("inner_tol", 1e-10),
        metric_iterate=o.get("metric_iterate", "last"),
    )
