"""Run configuration files.

Flat INI-style key=value text with fixed sections. Every SimConfig field is
addressable; unknown sections or keys are rejected with a diagnostic naming
the offender, and any malformed input raises ConfigError rather than
leaking parser internals.

    [objective]
    kind = quadratic
    dim = 30
    layers = 10,10,10

    [bandwidth]
    kind = sinusoidal
    eta = 1080
    theta = 0.01
    delta = 45
    downlink = off

    [run]
    mode = kimad
    rounds = 2000
    t_budget_s = 1.0
    t_comp_s = 0.1
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .simulator import MODES, BandwidthConfig, ObjectiveConfig, SimConfig


class ConfigError(ValueError):
    """A config file could not be parsed or contains an invalid setting."""


def _parse_int(s, where):
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {s!r}") from None


def _parse_float(s, where):
    try:
        v = float(s)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {s!r}") from None
    if v != v:
        raise ConfigError(f"{where}: NaN is not a valid setting")
    return v


def _parse_bool(s, where):
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected on/off, got {s!r}")


def _parse_list(s, where, kind=float):
    try:
        return tuple(kind(p.strip()) for p in s.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{where}: expected a comma-separated list, got {s!r}") from None


def _parse_choice(s, choices, where):
    if s not in choices:
        raise ConfigError(f"{where}: expected one of {choices}, got {s!r}")
    return s


def _section(parser, name):
    return dict(parser[name]) if parser.has_section(name) else {}


_KNOWN = {
    "objective": {"kind", "dim", "layers", "seed", "a_min", "a_max", "samples",
                  "batch", "target_noise", "scale_min", "scale_max"},
    "workers": {"count", "weights"},
    "bandwidth": {"kind", "eta", "theta", "delta", "noise_std", "low", "high",
                  "period", "value", "path", "prior", "downlink"},
    "kimad": {"ratio_grid", "discretization", "value_bits"},
    "ef21": {"fixed_k", "warmup_rounds"},
    "run": {"mode", "rounds", "seed", "gamma", "t_budget_s", "t_comp_s",
            "alpha_down", "estimator", "ewma_lambda", "family"},
}


def load_config(path) -> SimConfig:
    """Parse a config file into a SimConfig, validating keys and values."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        text = path.read_text(encoding="utf-8", errors="strict")
        parser.read_string(text, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not valid UTF-8 text: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN[section]:
                raise ConfigError(f"{path}: unknown key {section}.{key}")

    oc = ObjectiveConfig()
    sec = _section(parser, "objective")
    if "kind" in sec:
        oc.kind = _parse_choice(sec["kind"], ("quadratic", "lsq"), "objective.kind")
    if "dim" in sec:
        oc.dim = _parse_int(sec["dim"], "objective.dim")
    if "layers" in sec:
        raw = sec["layers"]
        if "," in raw:
            oc.layers = _parse_list(raw, "objective.layers", int)
        else:
            count = _parse_int(raw, "objective.layers")
            if count < 1 or oc.dim % count != 0:
                raise ConfigError(
                    f"objective.layers: {count} does not evenly split dim {oc.dim}")
            oc.layers = tuple([oc.dim // count] * count)
    if "seed" in sec:
        oc.seed = _parse_int(sec["seed"], "objective.seed")
    for key in ("a_min", "a_max", "target_noise", "scale_min", "scale_max"):
        if key in sec:
            setattr(oc, key, _parse_float(sec[key], f"objective.{key}"))
    for key in ("samples", "batch"):
        if key in sec:
            setattr(oc, key, _parse_int(sec[key], f"objective.{key}"))
    if sum(oc.layers) != oc.dim:
        raise ConfigError(f"objective.layers {oc.layers} do not sum to dim {oc.dim}")

    bc = BandwidthConfig()
    sec = _section(parser, "bandwidth")
    if "kind" in sec:
        bc.kind = _parse_choice(sec["kind"], ("sinusoidal", "twolevel", "constant",
                                              "file"), "bandwidth.kind")
    for key in ("eta", "theta", "delta", "noise_std", "low", "high", "period",
                "value"):
        if key in sec:
            setattr(bc, key, _parse_float(sec[key], f"bandwidth.{key}"))
    if "path" in sec:
        bc.path = sec["path"]
    if "prior" in sec:
        bc.prior = ("auto" if sec["prior"].strip() == "auto"
                    else _parse_float(sec["prior"], "bandwidth.prior"))
    if "downlink" in sec:
        bc.downlink = _parse_bool(sec["downlink"], "bandwidth.downlink")

    cfg = SimConfig(objective=oc, bandwidth=bc)
    sec = _section(parser, "workers")
    if "count" in sec:
        cfg.workers = _parse_int(sec["count"], "workers.count")
    if "weights" in sec:
        cfg.weights = _parse_list(sec["weights"], "workers.weights")

    sec = _section(parser, "kimad")
    if "ratio_grid" in sec:
        cfg.ratio_grid = _parse_list(sec["ratio_grid"], "kimad.ratio_grid")
    if "discretization" in sec:
        cfg.discretization = _parse_int(sec["discretization"], "kimad.discretization")
    if "value_bits" in sec:
        cfg.value_bits = _parse_int(sec["value_bits"], "kimad.value_bits")

    sec = _section(parser, "ef21")
    if "fixed_k" in sec:
        cfg.fixed_k = _parse_int(sec["fixed_k"], "ef21.fixed_k")
    if "warmup_rounds" in sec:
        cfg.warmup_rounds = _parse_int(sec["warmup_rounds"], "ef21.warmup_rounds")

    sec = _section(parser, "run")
    if "mode" in sec:
        cfg.mode = _parse_choice(sec["mode"], MODES, "run.mode")
    if "rounds" in sec:
        cfg.rounds = _parse_int(sec["rounds"], "run.rounds")
    if "seed" in sec:
        cfg.master_seed = _parse_int(sec["seed"], "run.seed")
    if "gamma" in sec:
        cfg.gamma = ("theory" if sec["gamma"].strip() == "theory"
                     else _parse_float(sec["gamma"], "run.gamma"))
    if "t_budget_s" in sec:
        cfg.t_budget_s = _parse_float(sec["t_budget_s"], "run.t_budget_s")
    if "t_comp_s" in sec:
        cfg.t_comp_s = ("auto" if sec["t_comp_s"].strip() == "auto"
                        else _parse_float(sec["t_comp_s"], "run.t_comp_s"))
    if "alpha_down" in sec:
        cfg.alpha_down = _parse_float(sec["alpha_down"], "run.alpha_down")
    if "estimator" in sec:
        cfg.estimator = _parse_choice(sec["estimator"], ("ewma", "oracle"),
                                      "run.estimator")
    if "ewma_lambda" in sec:
        cfg.ewma_lambda = _parse_float(sec["ewma_lambda"], "run.ewma_lambda")
    if "family" in sec:
        cfg.family = _parse_choice(sec["family"], ("topk", "randk"), "run.family")

    _sanity(cfg)
    return cfg


def _sanity(cfg: SimConfig):
    """Reject settings that would only blow up mid-run."""
    oc, bc = cfg.objective, cfg.bandwidth
    if oc.dim < 1 or any(s < 1 for s in oc.layers):
        raise ConfigError("objective dimensions must be positive")
    if oc.kind == "lsq" and not 1 <= oc.batch <= oc.samples:
        raise ConfigError(f"objective.batch must lie in [1, {oc.samples}]")
    if bc.kind == "sinusoidal" and (bc.delta <= 0 or bc.eta < 0 or bc.noise_std < 0):
        raise ConfigError("bandwidth.sinusoidal needs delta > 0, eta >= 0, noise_std >= 0")
    if bc.kind == "twolevel" and (bc.low <= 0 or bc.high <= 0 or bc.period <= 0):
        raise ConfigError("bandwidth.twolevel needs positive low, high, period")
    if bc.kind == "constant" and bc.value <= 0:
        raise ConfigError("bandwidth.constant needs a positive value")
    if bc.kind == "file" and not bc.path:
        raise ConfigError("bandwidth.file needs a path")
    if isinstance(bc.prior, float) and bc.prior <= 0:
        raise ConfigError("bandwidth.prior must be positive")
    if cfg.workers < 1:
        raise ConfigError("workers.count must be >= 1")
    if cfg.weights is not None and (len(cfg.weights) != cfg.workers
                                    or any(w <= 0 for w in cfg.weights)):
        raise ConfigError("workers.weights needs one positive entry per worker")
    if cfg.rounds < 1:
        raise ConfigError("run.rounds must be >= 1")
    if isinstance(cfg.gamma, float) and cfg.gamma <= 0:
        raise ConfigError("run.gamma must be positive")
    if cfg.t_budget_s <= 0:
        raise ConfigError("run.t_budget_s must be positive")
    if isinstance(cfg.t_comp_s, float) and not 0 <= cfg.t_comp_s < cfg.t_budget_s:
        raise ConfigError("run.t_comp_s must satisfy 0 <= t_comp_s < t_budget_s")
    if cfg.alpha_down <= 0:
        raise ConfigError("run.alpha_down must be positive")
    if not 0 < cfg.ewma_lambda <= 1:
        raise ConfigError("run.ewma_lambda must lie in (0, 1]")
    if cfg.fixed_k < 1:
        raise ConfigError("ef21.fixed_k must be >= 1")
    if cfg.warmup_rounds < 0:
        raise ConfigError("ef21.warmup_rounds must be >= 0")
    if cfg.discretization < 1:
        raise ConfigError("kimad.discretization must be >= 1")
    if cfg.value_bits < 1:
        raise ConfigError("kimad.value_bits must be >= 1")
    if cfg.ratio_grid is not None and any(not 0 < r <= 1 for r in cfg.ratio_grid):
        raise ConfigError("kimad.ratio_grid entries must lie in (0, 1]")
