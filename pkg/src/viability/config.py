"""Experiment configuration: one YAML file per experiment.

Every key is validated up front; unknown keys are rejected with their path
so a typo cannot silently fall back to a default.  Only the output
directory may be overridden from the environment (``VIABILITY_OUT``).
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from viability.dynamics import Hovership, HovershipParams, Slip, SlipParams, ToySystem
from viability.gp import SMOOTHNESS, BumpMean, ConstantMean, KernelParams
from viability.grids import AxisGrid, ProductGrid
from viability.learner import Ramp, ThresholdSchedule

OUT_ENV = "VIABILITY_OUT"
SYSTEMS = ("toy", "hovership", "slip")
CONFIG_DIR = Path(__file__).parent / "configs"


@dataclass(frozen=True)
class ModelMean:
    """Placeholder: prior mean = ``offset + scale * Lambda_Q`` of the ``estimate_from`` model.

    Resolved to a :class:`~viability.gp.GridMean` once that model's oracle
    has been computed.
    """

    scale: float = 1.0
    offset: float = 0.0


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


_SCHEMA = {
    "system": {"id": None, "params": None},
    "grid": {"state": None, "action": None},
    "gp": {"smoothness": None, "lengthscales": None, "signal_variance": None,
           "noise_variance": None, "noise_fraction": None, "prior_mean": None, "estimate_from": None},
    "schedule": {"gamma_opt": None, "gamma_caut": None, "lambda_caut": None, "ramp_steps": None},
    "s0": None, "n": None, "seed": None, "snapshots": None, "output_dir": None,
}
_PARAM_FIELDS = {
    "toy": (),
    "hovership": ("g0", "g", "a_max", "s_max", "omega"),
    "slip": ("g", "m", "k", "l0", "energy"),
}


def _check_keys(data, schema, path):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected a mapping")
    for key in data:
        if key not in schema:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")
    for key, sub in schema.items():
        if isinstance(sub, dict) and key in data and data[key] is not None:
            _check_keys(data[key], sub, f"{path}.{key}" if path else key)


def _number(value, path, positive=False, integer=False, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value!r}")
    return int(value) if integer else float(value)


def _axes(entry, path):
    if not isinstance(entry, list) or not entry:
        raise ConfigError(path, "expected a non-empty list of [lower, upper, num_cells]")
    axes = []
    for i, ax in enumerate(entry):
        p = f"{path}[{i}]"
        if not isinstance(ax, list) or len(ax) != 3:
            raise ConfigError(p, "expected [lower, upper, num_cells]")
        lo, hi = _number(ax[0], p + ".lower"), _number(ax[1], p + ".upper")
        cells = _number(ax[2], p + ".num_cells", positive=True, integer=True)
        try:
            axes.append(AxisGrid(lo, hi, cells))
        except ValueError as exc:
            raise ConfigError(p, str(exc)) from None
    return tuple(axes)


def _pair(value, path, lo=None, hi=None):
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigError(path, "expected [start, end]")
    a, b = (_number(v, f"{path}[{i}]") for i, v in enumerate(value))
    for v in (a, b):
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ConfigError(path, f"values must lie in [{lo}, {hi}]")
    return a, b


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings; ``raw`` is the normalized mapping."""

    raw: dict

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        data = copy.deepcopy(data)
        _check_keys(data, _SCHEMA, "")
        cfg = cls(data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError(str(path), f"not valid YAML: {exc}") from None
        return cls.from_dict(data if data is not None else {})

    @classmethod
    def builtin(cls, name: str) -> "ExperimentConfig":
        return cls.load(CONFIG_DIR / f"{name}.yaml")

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True, default_flow_style=None)

    def save(self, path):
        Path(path).write_text(self.dump())

    def with_overrides(self, seed=None, output_dir=None) -> "ExperimentConfig":
        data = copy.deepcopy(self.raw)
        if seed is not None:
            data["seed"] = seed
        if output_dir is not None:
            data["output_dir"] = str(output_dir)
        return ExperimentConfig.from_dict(data)

    # -- accessors (each one validates the part it reads) --------------------

    @property
    def system_id(self) -> str:
        sys_ = self.raw.get("system")
        if not isinstance(sys_, dict) or "id" not in sys_:
            raise ConfigError("system.id", "missing")
        if sys_["id"] not in SYSTEMS:
            raise ConfigError("system.id", f"must be one of {SYSTEMS}, got {sys_['id']!r}")
        return sys_["id"]

    def system_params(self) -> dict:
        params = (self.raw.get("system") or {}).get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("system.params", "expected a mapping")
        allowed = _PARAM_FIELDS[self.system_id]
        out = {}
        for key, value in params.items():
            if key not in allowed:
                raise ConfigError(f"system.params.{key}", "unknown key")
            out[key] = _number(value, f"system.params.{key}")
        return out

    def make_system(self, **param_overrides):
        params = {**self.system_params(), **param_overrides}
        sid = self.system_id
        try:
            if sid == "toy":
                return ToySystem()
            if sid == "hovership":
                return Hovership(HovershipParams(**params))
            return Slip(SlipParams(**params))
        except ValueError as exc:
            raise ConfigError("system.params", str(exc)) from None

    def make_grid(self) -> ProductGrid:
        grid = self.raw.get("grid")
        if grid is None:
            return self.make_system().default_grid()
        if "state" not in grid or "action" not in grid:
            raise ConfigError("grid", "needs both 'state' and 'action' axes")
        return ProductGrid(_axes(grid["state"], "grid.state"), _axes(grid["action"], "grid.action"),
                           discrete=self.system_id == "toy")

    def gp_settings(self) -> dict:
        gp = self.raw.get("gp")
        if gp is None:
            raise ConfigError("gp", "missing")
        smooth = _number(gp.get("smoothness", 2.5), "gp.smoothness")
        if smooth not in SMOOTHNESS:
            raise ConfigError("gp.smoothness", f"must be one of {SMOOTHNESS}")
        estimate = gp.get("estimate_from")
        out = {"smoothness": smooth, "estimate_from": None}
        if estimate is not None:
            if not isinstance(estimate, dict):
                raise ConfigError("gp.estimate_from", "expected a mapping of system parameter scale factors")
            allowed = _PARAM_FIELDS[self.system_id]
            for key, value in estimate.items():
                if key not in allowed:
                    raise ConfigError(f"gp.estimate_from.{key}", "unknown system parameter")
                _number(value, f"gp.estimate_from.{key}", positive=True)
            out["estimate_from"] = {k: float(v) for k, v in estimate.items()}
            out["noise_fraction"] = _number(gp.get("noise_fraction", 1e-3), "gp.noise_fraction", positive=True)
        else:
            ls = gp.get("lengthscales")
            n_dims = self.make_grid().ndim
            if not isinstance(ls, list) or len(ls) != n_dims:
                raise ConfigError("gp.lengthscales", f"expected a list of {n_dims} positive numbers")
            out["lengthscales"] = tuple(_number(v, f"gp.lengthscales[{i}]", positive=True) for i, v in enumerate(ls))
            out["signal_variance"] = _number(gp.get("signal_variance"), "gp.signal_variance", positive=True)
            out["kernel"] = KernelParams(out["lengthscales"], out["signal_variance"], smooth)
            if "noise_fraction" in gp:
                raise ConfigError("gp.noise_fraction", "only valid together with gp.estimate_from")
        if "noise_variance" in gp:
            out["noise_variance"] = _number(gp["noise_variance"], "gp.noise_variance", positive=True)
        elif estimate is None:
            raise ConfigError("gp.noise_variance", "missing")
        out["prior_mean"] = self._prior(gp.get("prior_mean", 0.0))
        return out

    def _prior(self, entry):
        path = "gp.prior_mean"
        if isinstance(entry, (int, float)) and not isinstance(entry, bool):
            return ConstantMean(float(entry))
        if not isinstance(entry, dict):
            raise ConfigError(path, "expected a number or a mapping with 'kind'")
        kind = entry.get("kind")
        if kind == "constant":
            extra = set(entry) - {"kind", "value"}
            if extra:
                raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
            return ConstantMean(_number(entry.get("value", 0.0), f"{path}.value"))
        if kind == "bump":
            extra = set(entry) - {"kind", "center", "widths", "height", "offset"}
            if extra:
                raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
            n_dims = self.make_grid().ndim
            vecs = {}
            for key in ("center", "widths"):
                v = entry.get(key)
                if not isinstance(v, list) or len(v) != n_dims:
                    raise ConfigError(f"{path}.{key}", f"expected {n_dims} numbers")
                vecs[key] = [_number(x, f"{path}.{key}[{i}]", positive=key == "widths") for i, x in enumerate(v)]
            return BumpMean(vecs["center"], vecs["widths"], _number(entry.get("height"), f"{path}.height"),
                            _number(entry.get("offset", 0.0), f"{path}.offset"))
        if kind == "model":
            extra = set(entry) - {"kind", "scale", "offset"}
            if extra:
                raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
            if (self.raw.get("gp") or {}).get("estimate_from") is None:
                raise ConfigError(path, "kind 'model' needs gp.estimate_from")
            return ModelMean(_number(entry.get("scale", 1.0), f"{path}.scale"),
                             _number(entry.get("offset", 0.0), f"{path}.offset"))
        raise ConfigError(f"{path}.kind", f"must be 'constant', 'bump' or 'model', got {kind!r}")

    def schedule(self) -> ThresholdSchedule:
        sch = self.raw.get("schedule")
        if sch is None:
            raise ConfigError("schedule", "missing")
        go = _pair(sch.get("gamma_opt"), "schedule.gamma_opt", 0, 1)
        gc = _pair(sch.get("gamma_caut"), "schedule.gamma_caut", 0, 1)
        lc = _pair(sch.get("lambda_caut"), "schedule.lambda_caut", 0, None)
        steps = _number(sch.get("ramp_steps", self.n), "schedule.ramp_steps", positive=True, integer=True)
        try:
            return ThresholdSchedule(Ramp(*go), Ramp(*gc), Ramp(*lc), steps)
        except ValueError as exc:
            raise ConfigError("schedule", str(exc)) from None

    @property
    def s0(self):
        s0 = self.raw.get("s0")
        grid = self.make_grid()
        if not isinstance(s0, list) or len(s0) != grid.n_state_dims:
            raise ConfigError("s0", f"expected a list of {grid.n_state_dims} numbers")
        vals = [_number(v, f"s0[{i}]") for i, v in enumerate(s0)]
        _, outside = grid.snap_state(vals)
        if outside:
            raise ConfigError("s0", "initial state lies outside the grid")
        return vals

    @property
    def n(self) -> int:
        if "n" not in self.raw:
            raise ConfigError("n", "missing")
        return _number(self.raw["n"], "n", positive=True, integer=True)

    @property
    def seed(self) -> int:
        return _number(self.raw.get("seed", 0), "seed", integer=True, minimum=0)

    @property
    def snapshots(self) -> tuple:
        snaps = self.raw.get("snapshots", [50, 250, 500])
        if not isinstance(snaps, list):
            raise ConfigError("snapshots", "expected a list of sample counts")
        vals = [_number(v, f"snapshots[{i}]", integer=True, minimum=0) for i, v in enumerate(snaps)]
        return tuple(sorted(set(v for v in vals if v <= self.n)))

    @property
    def output_dir(self) -> Path:
        env = os.environ.get(OUT_ENV)
        if env:
            return Path(env)
        return Path(self.raw.get("output_dir", "out"))

    def validate(self):
        """Touch every section so all errors surface before any run."""
        self.system_id
        self.make_system()
        grid = self.make_grid()
        if self.system_id == "toy" and (grid.state_shape != (5,) or grid.action_shape != (3,)):
            raise ConfigError("grid", "the toy system needs a 5 x 3 grid")
        if "n" in self.raw or "gp" in self.raw or "schedule" in self.raw:
            self.n
            self.gp_settings()
            self.schedule()
            self.s0
            self.seed
            self.snapshots
        if "output_dir" in self.raw and not isinstance(self.raw["output_dir"], str):
            raise ConfigError("output_dir", "expected a path string")
