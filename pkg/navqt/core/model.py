import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Union
import yaml
from . import common as c
from .errors import ConfigError

MODELS = ("IC", "TFI", "Heisenberg")
COEFF_MODES = ("uniform", "random")
BINDINGS = ("restricted", "flexible")
MODES = ("approx", "true_fe")
BACKENDS = ("exact", "trajectories")

class Resource():
  """Resource

  The envelope shared by every document navqt reads or writes: an
  apiVersion, a kind, a metadata block with at least a name, and a body.
  Subclasses only say how their body maps to and from a dictionary.
  """
  kind = "Resource"

  @property
  def name(self) -> str:
    raise NotImplementedError

  def body(self) -> dict:
    raise NotImplementedError

  def to_resource(self) -> dict:
    return c.new_resource_object(self.kind, self.name, self.body())

  def __str__(self) -> str:
    return yaml.safe_dump(self.to_resource(), sort_keys=False)

  @classmethod
  def check_envelope(cls, resource: dict) -> dict:
    if not isinstance(resource, dict) or resource.get("kind") != cls.kind:
      raise ConfigError(f"Expected a {cls.kind} resource, got {resource.get('kind') if isinstance(resource, dict) else type(resource).__name__}")
    if not str(resource.get("apiVersion", "")).startswith("navqt.io"):
      raise ConfigError(f"Unsupported apiVersion {resource.get('apiVersion')!r}")
    return resource

@dataclass(frozen=True)
class ExperimentConfig(Resource):
  """Experiment Config

  Everything needed to replay one training run. Build it with `create`,
  which fills unset fields from the packaged `experiment.yaml` defaults,
  or from a yaml resource with `from_resource`.

  Example:
    A one-off run on the uniform Ising chain::

      from navqt.core.model import ExperimentConfig
      config = ExperimentConfig.create(model="IC", n_qubits=3, beta=1.0)
  """
  model: str
  coeffs: str
  n_qubits: int
  beta: float
  layers: Union[str, int]
  binding: str
  lambda_init: float
  lambda_min: float
  eta_theta: float
  eta_lambda: float
  theta_seed: int
  max_iters: int
  mode: str
  backend: str
  trajectories: Optional[int]
  trajectory_seed: int
  lambda_fd: float
  theta_fd: float
  warm_start_iters: int
  track_fidelity: bool
  out_dir: str
  hamiltonian: Optional[dict] = None
  run_name: Optional[str] = None
  kind = "Experiment"

  def __post_init__(self):
    if self.model not in MODELS:
      raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
    if self.coeffs not in COEFF_MODES:
      raise ConfigError(f"coeffs must be one of {COEFF_MODES}, got {self.coeffs!r}")
    if self.binding not in BINDINGS:
      raise ConfigError(f"binding must be one of {BINDINGS}, got {self.binding!r}")
    if self.mode not in MODES:
      raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
    if self.backend not in BACKENDS:
      raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
    if self.mode == "true_fe" and self.backend != "exact":
      raise ConfigError("mode true_fe needs the exact backend")
    if int(self.n_qubits) < 2:
      raise ConfigError(f"n_qubits must be at least 2, got {self.n_qubits}")
    if not self.beta > 0:
      raise ConfigError(f"beta must be positive, got {self.beta}")
    if not 0.0 <= self.lambda_min <= self.lambda_init <= 1.0:
      raise ConfigError(f"need 0 <= lambda_min <= lambda_init <= 1, got {self.lambda_min}, {self.lambda_init}")
    if self.max_iters < 0 or self.warm_start_iters < 0:
      raise ConfigError("iteration counts must be non-negative")
    if self.trajectories is not None and int(self.trajectories) < 1:
      raise ConfigError(f"trajectories must be at least 1, got {self.trajectories}")
    if self.layers != "auto" and not (isinstance(self.layers, int) and self.layers >= 1):
      raise ConfigError(f"layers must be 'auto' or a positive integer, got {self.layers!r}")
    if self.lambda_fd <= 0 or self.theta_fd <= 0:
      raise ConfigError("finite-difference steps must be positive")

  @classmethod
  def defaults(cls) -> dict:
    return dict(c.konfig("experiment")["spec"])

  @classmethod
  def create(cls, **overrides) -> "ExperimentConfig":
    return cls.from_spec({**cls.defaults(), **overrides})

  @classmethod
  def from_spec(cls, spec: dict, name: str = None) -> "ExperimentConfig":
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(spec) - names
    if unknown:
      raise ConfigError(f"Unknown experiment fields: {sorted(unknown)}")
    merged = {**cls.defaults(), **spec}
    config = cls(**_coerce(merged))
    if name is not None and name != config.name:
      config = dataclasses.replace(config, run_name=name)
    return config

  @classmethod
  def from_resource(cls, resource: dict) -> "ExperimentConfig":
    cls.check_envelope(resource)
    return cls.from_spec(dict(resource.get("spec") or {}), c.deepGet(resource, "/metadata/name", None))

  def with_overrides(self, **overrides) -> "ExperimentConfig":
    return dataclasses.replace(self, **_coerce(overrides))

  @property
  def name(self) -> str:
    if self.run_name:
      return self.run_name
    return "-".join([
      self.model.lower(), self.coeffs, f"n{self.n_qubits}", f"b{self.beta:g}",
      self.binding, f"li{self.lambda_init:g}", f"et{self.eta_theta:g}",
      f"el{self.eta_lambda:g}", f"s{self.theta_seed}", self.mode,
    ])

  @property
  def n_layers(self) -> int:
    return math.ceil(self.n_qubits / 2) if self.layers == "auto" else int(self.layers)

  @property
  def n_trajectories(self) -> int:
    return int(self.trajectories) if self.trajectories is not None else 500 * self.n_qubits

  def body(self) -> dict:
    spec = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
    spec.pop("run_name")
    return spec

  def spec(self) -> dict:
    return self.body()

_INTS = ("n_qubits", "theta_seed", "max_iters", "trajectory_seed", "warm_start_iters")
_FLOATS = ("beta", "lambda_init", "lambda_min", "eta_theta", "eta_lambda", "lambda_fd", "theta_fd")

def _coerce(spec: dict) -> dict:
  # yaml and command line values arrive as strings or ints
  out = dict(spec)
  try:
    for k in _INTS:
      if k in out and out[k] is not None:
        out[k] = int(out[k])
    for k in _FLOATS:
      if k in out and out[k] is not None:
        out[k] = float(out[k])
    if out.get("trajectories") is not None:
      out["trajectories"] = int(out["trajectories"])
    if "layers" in out and out["layers"] != "auto":
      out["layers"] = int(out["layers"])
    if "track_fidelity" in out:
      out["track_fidelity"] = bool(out["track_fidelity"])
  except (TypeError, ValueError) as exc:
    raise ConfigError(f"Invalid experiment value: {exc}") from exc
  return out

@dataclass(frozen=True)
class IterMetrics():
  """Metrics of one optimization iterate, measured before its update."""
  iter: int
  energy: float
  entropy: float
  free_energy: float
  lam: float
  fidelity: Optional[float] = None

  def to_dict(self) -> dict:
    return {
      "iter": self.iter,
      "energy": self.energy,
      "entropy": self.entropy,
      "free_energy": self.free_energy,
      "lambda": self.lam,
      "fidelity": self.fidelity,
    }

  @classmethod
  def from_dict(cls, d: dict) -> "IterMetrics":
    fid = d.get("fidelity")
    return cls(
      iter=int(d["iter"]), energy=float(d["energy"]), entropy=float(d["entropy"]),
      free_energy=float(d["free_energy"]), lam=float(d["lambda"]),
      fidelity=None if fid is None or fid == "" else float(fid),
    )

METRIC_COLUMNS = ["iter", "energy", "entropy", "free_energy", "lambda", "fidelity"]

@dataclass(frozen=True)
class Iterate():
  """A point of parameter space together with its measured quantities."""
  iter: int
  lam: float
  theta: tuple
  energy: float
  entropy: float
  free_energy: float
  fidelity: float

  def to_dict(self) -> dict:
    return {
      "iter": self.iter,
      "lambda": self.lam,
      "theta": list(self.theta),
      "energy": self.energy,
      "entropy": self.entropy,
      "free_energy": self.free_energy,
      "fidelity": self.fidelity,
    }

  @classmethod
  def from_dict(cls, d: dict) -> "Iterate":
    return cls(
      iter=int(d["iter"]), lam=float(d["lambda"]), theta=tuple(float(t) for t in d["theta"]),
      energy=float(d["energy"]), entropy=float(d["entropy"]),
      free_energy=float(d["free_energy"]), fidelity=float(d["fidelity"]),
    )

@dataclass(frozen=True)
class RunRecord(Resource):
  """Run Record

  The persisted outcome of one training run. `final` is the iterate with the
  lowest cost seen, `last` the iterate the loop ended on; both are kept
  because the selection between them changes reported numbers.
  """
  config: ExperimentConfig
  hamiltonian: dict
  history: tuple
  final: Iterate
  last: Iterate
  wall_time: float
  kind = "RunRecord"

  @property
  def name(self) -> str:
    return self.config.name

  @property
  def seed(self) -> int:
    return self.config.theta_seed

  @property
  def final_lambda(self) -> float:
    return self.final.lam

  @property
  def final_fidelity(self) -> float:
    return self.final.fidelity

  @property
  def final_free_energy(self) -> float:
    return self.final.free_energy

  def body(self) -> dict:
    return {
      "config": self.config.to_resource(),
      "hamiltonian": self.hamiltonian,
      "seed": self.seed,
      "history": [m.to_dict() for m in self.history],
      "final": self.final.to_dict(),
      "last": self.last.to_dict(),
      "wall_time": self.wall_time,
    }

  @classmethod
  def from_resource(cls, resource: dict) -> "RunRecord":
    cls.check_envelope(resource)
    try:
      spec = resource["spec"]
      return cls(
        config=ExperimentConfig.from_resource(spec["config"]),
        hamiltonian=spec["hamiltonian"],
        history=tuple(IterMetrics.from_dict(m) for m in spec["history"]),
        final=Iterate.from_dict(spec["final"]),
        last=Iterate.from_dict(spec["last"]),
        wall_time=float(spec["wall_time"]),
      )
    except (KeyError, TypeError, ValueError) as exc:
      raise ConfigError(f"Malformed RunRecord: {exc}") from exc
