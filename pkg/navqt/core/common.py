import logging
import sys
from importlib.metadata import EntryPoint, entry_points
import importlib.resources as importlib_resources
import jsonpatch
import jsonpointer
import yaml
from .errors import ConfigError

logger = logging.getLogger(__name__)

API_VERSION = "navqt.io/v1"

# Targets used when the distribution metadata is not installed.
# Keep in sync with the entry points in pyproject.toml.
BUILTIN_FUNCTIONS = {
  "backends.navqt.io": {
    "exact": "navqt.quantum.simulator:ExactBackend",
    "trajectories": "navqt.quantum.simulator:TrajectoryBackend",
  },
  "trainers.navqt.io": {
    "approx": "navqt.thermalize.optimizer:train",
    "true_fe": "navqt.thermalize.optimizer:train_true_free_energy",
  },
}

def load_function(group: str, kind: str) -> callable:
  """Load Function

  The autodiscovery which finds a registered callable by its lower case kind
  under an entry point group. Backends and trainers are both resolved this
  way, so a third party distribution can register its own.

  Args:
    group: The entry point group, like `backends.navqt.io`.
    kind: The registered name, like `exact`.

  Returns:
    The loaded callable.

  Raises:
    ConfigError: If nothing is registered under that name.
  """
  kind = kind.lower()
  eps = entry_points(group=group)
  if kind in eps.names:
    return eps[kind].load()
  target = BUILTIN_FUNCTIONS.get(group, {}).get(kind)
  if target is None:
    raise ConfigError(f"No '{kind}' registered under {group}")
  return EntryPoint(name=kind, value=target, group=group).load()

def konfig(name: str) -> dict:
  """Load one of the packaged yaml defaults from navqt.konfig."""
  pkg = importlib_resources.files("navqt.konfig")
  lp = pkg / f"{name}.yaml"
  content = lp.read_text(encoding="utf-8")
  return yaml.safe_load(content)

def new_resource_object(kind: str, name: str, spec: dict) -> dict:
  return {
    "apiVersion": API_VERSION,
    "kind": kind,
    "metadata": {
      "name": name
    },
    "spec": spec
  }

def apply_patches(target, patches):
  p = jsonpatch.JsonPatch(patches)
  return p.apply(target)

def override_patches(overrides: dict, prefix: str = "/spec") -> list:
  """Override Patches

  Turns a flat mapping of field overrides into json patch operations.
  Values of None are skipped so unset command line flags leave the file alone.

  Args:
    overrides: Field name to new value.
    prefix: Json pointer of the object the fields live in.

  Returns:
    A list of `add` operations, which replace existing members.
  """
  base = jsonpointer.JsonPointer(prefix).parts
  return [
    {"op": "add", "path": jsonpointer.JsonPointer.from_parts([*base, k]).path, "value": v}
    for k, v in overrides.items() if v is not None
  ]

_default_stub = object()
def deepGet(obj, path, default=_default_stub):
  """Deep Get

  Gets an arbitrarily nested item with a json pointer, like the ones the
  override patches are written against.

  Args:
    obj: Document to search in.
    path: Json pointer, like `/spec/beta`.
    default: Returned if the path doesn't exist. Otherwise a LookupError is raised.

  Returns:
    Value at path.

  Example:
    >>> deepGet({'spec': {'grid': [1, 2]}}, '/spec/grid/1')
    2
  """
  try:
    return jsonpointer.resolve_pointer(obj, path)
  except jsonpointer.JsonPointerException as exc:
    if default is not _default_stub:
      return default
    raise LookupError(f"no element at '{path}'") from exc

def setup_logging(level=logging.INFO):
  """Install a single stderr handler on the navqt logger."""
  root = logging.getLogger("navqt")
  for h in list(root.handlers):
    root.removeHandler(h)
  handler = logging.StreamHandler(sys.stderr)
  handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
  root.addHandler(handler)
  root.setLevel(level)
  return root
