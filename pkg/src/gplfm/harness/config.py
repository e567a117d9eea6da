"""Run configuration: YAML schema, validation, and model construction.

Schema (YAML mapping; floors and dofs are 1-based in config files and
converted to 0-based indices internally):

    version: 1
    seed: 42
    model:
      type: shear_building        # shear_building | benchmark_tower | file
      floors: 10
      mass: 200.0                 # kg, scalar or per-floor list
      stiffness: 5.0e5            # N/m, scalar or per-storey list
      rayleigh: [0.1, 0.0005]     # C = a0 M + a1 K
      reduce_to: null             # optional modal truncation order
      # benchmark_tower extras: first_frequency_hz, floor_mass, damping_ratio
      # type 'file': path to a YAML document holding these same model keys
    inputs:                       # one entry per excitation/latent force
      - kind: load                # load | ground
        dof: 10                   # 1-based floor (load inputs only)
        excitation: {type: impact, amplitude: 1.0e4, start: 3.0, rise: 0.05, fall: 0.05}
        kernel: {family: matern, p: 0, alpha2: optimize, lengthscale: optimize}
    sensors:
      accelerations: [1, 2, 3]    # 1-based floors
      velocities: []
      displacements: []
    sampling: {rate_hz: 100.0, duration_s: 30.0}
    noise: {fraction: 0.10}       # or std: <scalar or per-channel list>
    estimator:
      method: gplfm               # gplfm | akf | akfdm | dkf
      p_x0: 1.0e-10               # scalar -> P_x0 = p_x0 * I
      q_x: 1.0e-10                # scalar -> Q_x = q_x * I (discrete)
      r: 0.1                      # scalar -> R = r * I, or per-channel list
      smoother: true
      q_f: 1.0e4                  # baselines: discrete force noise
      r_dm: 0.05                  # akfdm dummy displacement covariance
      dummy_dofs: [1]             # akfdm, 1-based floors
    optimization:
      n_starts: 8
      max_iter: 500
      shared: null                # default: share across identical kernels
      bounds: {alpha2: [1.0e-2, 1.0e10], lengthscale: [0.01, 10.0]}
    lcurve:
      method: akf
      grid: {start_decade: 0, stop_decade: 8}   # or an explicit list
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..errors import ConfigurationError
from ..kernels import KernelSpec
from ..structural import (
    SensorLayout,
    StructuralSystem,
    build_benchmark_tower,
    build_shear_building,
    modal_analysis,
    modal_truncation,
)

SCHEMA_VERSION = 1


@dataclass
class InputSpec:
    kind: str                     # "load" | "ground"
    dof: int | None               # 0-based, load inputs only
    excitation: dict
    kernel: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return f"load_{self.dof + 1}" if self.kind == "load" else "ground"


@dataclass
class RunConfig:
    raw: dict
    seed: int
    model: dict
    inputs: list[InputSpec]
    sensors: dict
    rate_hz: float
    duration_s: float
    noise: dict
    estimator: dict
    optimization: dict
    lcurve: dict

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s * self.rate_hz))


def _require(mapping, key, context):
    if key not in mapping:
        raise ConfigurationError(f"missing config key {context}.{key}")
    return mapping[key]


def _as_dof_list(values, n, context):
    dofs = []
    for v in values:
        if not isinstance(v, int) or not 1 <= v <= n:
            raise ConfigurationError(
                f"{context}: floor {v!r} out of range 1..{n}"
            )
        dofs.append(v - 1)
    if len(set(dofs)) != len(dofs):
        raise ConfigurationError(f"{context}: duplicate floors")
    return dofs


def load_config(path, seed_override: int | None = None) -> RunConfig:
    """Load and validate a YAML run configuration."""
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as err:
            raise ConfigurationError(f"{path}: invalid YAML: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    version = raw.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(
            f"unsupported config version {version} (supported: {SCHEMA_VERSION})"
        )
    return parse_config(raw, seed_override=seed_override, base_dir=os.path.dirname(path))


def parse_config(raw: dict, seed_override=None, base_dir="") -> RunConfig:
    model = dict(_require(raw, "model", "<root>"))
    if model.get("type") == "file":
        model_path = _require(model, "path", "model")
        if base_dir and not os.path.isabs(model_path):
            model_path = os.path.join(base_dir, model_path)
        if not os.path.exists(model_path):
            raise ConfigurationError(f"model file not found: {model_path}")
        with open(model_path, encoding="utf-8") as fh:
            model = yaml.safe_load(fh)
        if not isinstance(model, dict):
            raise ConfigurationError(f"{model_path}: model file must be a mapping")

    n = int(_require(model, "floors", "model"))
    if n < 1:
        raise ConfigurationError(f"model.floors must be >= 1, got {n}")

    inputs_raw = _require(raw, "inputs", "<root>")
    if not isinstance(inputs_raw, list) or not inputs_raw:
        raise ConfigurationError("inputs must be a nonempty list")
    inputs = []
    n_ground = 0
    for i, entry in enumerate(inputs_raw):
        kind = entry.get("kind", "load")
        if kind not in ("load", "ground"):
            raise ConfigurationError(f"inputs[{i}].kind must be load or ground")
        dof = None
        if kind == "load":
            dof = _as_dof_list([_require(entry, "dof", f"inputs[{i}]")], n,
                               f"inputs[{i}].dof")[0]
        else:
            n_ground += 1
            if n_ground > 1:
                raise ConfigurationError("at most one ground-motion input supported")
        exc = dict(_require(entry, "excitation", f"inputs[{i}]"))
        if "path" in exc and base_dir and not os.path.isabs(exc["path"]):
            exc["path"] = os.path.join(base_dir, exc["path"])
        inputs.append(
            InputSpec(kind=kind, dof=dof, excitation=exc,
                      kernel=dict(entry.get("kernel", {})))
        )
    # Ground input, when present, must be the last force column.
    if any(
        inp.kind == "ground" and i != len(inputs) - 1
        for i, inp in enumerate(inputs)
    ):
        raise ConfigurationError("the ground-motion input must be listed last")

    sensors_raw = dict(raw.get("sensors", {}))
    sensors = {
        "displacements": _as_dof_list(
            sensors_raw.get("displacements", []), n, "sensors.displacements"
        ),
        "velocities": _as_dof_list(
            sensors_raw.get("velocities", []), n, "sensors.velocities"
        ),
        "accelerations": _as_dof_list(
            sensors_raw.get("accelerations", []), n, "sensors.accelerations"
        ),
    }
    if not any(sensors.values()):
        raise ConfigurationError("sensors: at least one measurement is required")

    sampling = dict(_require(raw, "sampling", "<root>"))
    rate_hz = float(_require(sampling, "rate_hz", "sampling"))
    duration_s = float(_require(sampling, "duration_s", "sampling"))
    if rate_hz <= 0 or duration_s <= 0:
        raise ConfigurationError("sampling rate and duration must be positive")
    if int(round(duration_s * rate_hz)) < 2:
        raise ConfigurationError("duration must cover at least 2 samples")

    noise = dict(raw.get("noise", {"fraction": 0.0}))
    if "fraction" in noise and float(noise["fraction"]) < 0:
        raise ConfigurationError("noise.fraction must be >= 0")

    estimator = dict(raw.get("estimator", {}))
    method = estimator.setdefault("method", "gplfm")
    if method not in ("gplfm", "akf", "akfdm", "dkf"):
        raise ConfigurationError(f"unknown estimator method {method!r}")
    estimator.setdefault("p_x0", 1.0e-10)
    estimator.setdefault("q_x", 1.0e-10)
    estimator.setdefault("r", 0.1)
    estimator.setdefault("smoother", True)
    if "dummy_dofs" in estimator:
        estimator["dummy_dofs"] = _as_dof_list(
            estimator["dummy_dofs"], n, "estimator.dummy_dofs"
        )

    optimization = dict(raw.get("optimization", {}))
    optimization.setdefault("n_starts", 8)
    optimization.setdefault("max_iter", 500)

    lcurve = dict(raw.get("lcurve", {}))

    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    return RunConfig(
        raw=raw,
        seed=seed,
        model=model,
        inputs=inputs,
        sensors=sensors,
        rate_hz=rate_hz,
        duration_s=duration_s,
        noise=noise,
        estimator=estimator,
        optimization=optimization,
        lcurve=lcurve,
    )


def build_model(cfg: RunConfig) -> tuple[StructuralSystem, StructuralSystem]:
    """Construct the true (full) and estimation (possibly reduced) systems."""
    model = cfg.model
    n = int(model["floors"])
    load_dofs = [inp.dof for inp in cfg.inputs if inp.kind == "load"]
    ground = any(inp.kind == "ground" for inp in cfg.inputs)
    mtype = model.get("type", "shear_building")
    if mtype in ("shear_building", "file"):
        mass = model.get("mass", 1.0)
        stiffness = _require(model, "stiffness", "model")
        masses = np.broadcast_to(np.asarray(mass, dtype=float), n)
        stiffnesses = np.broadcast_to(np.asarray(stiffness, dtype=float), n)
        rayleigh = tuple(model.get("rayleigh", (0.0, 0.0)))
        if len(rayleigh) != 2:
            raise ConfigurationError("model.rayleigh must be [a0, a1]")
        full = build_shear_building(
            masses, stiffnesses, rayleigh=rayleigh,
            load_dofs=load_dofs, ground_motion=ground,
        )
    elif mtype == "benchmark_tower":
        full = build_benchmark_tower(
            n_floors=n,
            first_frequency_hz=model.get("first_frequency_hz", 0.16),
            floor_mass=model.get("floor_mass", 1.0e5),
            damping_ratio=model.get("damping_ratio", 0.01),
            load_dofs=load_dofs,
            ground_motion=ground,
        )
    else:
        raise ConfigurationError(f"unknown model type {mtype!r}")

    # The scenario must be sampled faster than twice the highest retained mode.
    reduce_to = model.get("reduce_to")
    estimation = full if reduce_to is None else modal_truncation(full, int(reduce_to))
    freqs = modal_analysis(estimation if reduce_to is not None else full).frequencies
    f_max = freqs[min(len(freqs), estimation.n) - 1]
    if cfg.rate_hz <= 2.0 * f_max:
        raise ConfigurationError(
            f"sampling.rate_hz={cfg.rate_hz} must exceed twice the highest "
            f"retained modal frequency ({f_max:.3f} Hz)"
        )
    return full, estimation


def build_sensors(cfg: RunConfig, n_physical: int) -> SensorLayout:
    return SensorLayout.from_dofs(
        n_physical,
        displacements=cfg.sensors["displacements"],
        velocities=cfg.sensors["velocities"],
        accelerations=cfg.sensors["accelerations"],
    )


def kernel_spec_from_config(kernel_cfg: dict, dt: float, duration: float):
    """Build (KernelSpec, fixed_alpha2, fixed_lengthscale) from config.

    'optimize' entries get neutral initial values and a False fixed flag.
    """
    family = kernel_cfg.get("family", "matern")
    p = int(kernel_cfg.get("p", 0))
    alpha2 = kernel_cfg.get("alpha2", "optimize")
    lengthscale = kernel_cfg.get("lengthscale", "optimize")
    fixed_a2 = alpha2 != "optimize"
    fixed_l = lengthscale != "optimize"
    a2 = float(alpha2) if fixed_a2 else 1.0
    l = float(lengthscale) if fixed_l else float(np.sqrt(dt * duration))
    return KernelSpec(p=p, alpha2=a2, lengthscale=l, family=family), fixed_a2, fixed_l
