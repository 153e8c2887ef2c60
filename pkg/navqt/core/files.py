from pathlib import Path
import csv
import json
import os
import tempfile
import yaml
from .errors import ConfigError

def get_file_contents(file: str) -> str:
  """Get File Contents

  Loads the text content of a local file.

  Args:
    file: The path to some file as a string.

  Returns:
    The content of the file at the specified path.
  """
  return Path(file).read_text(encoding="utf-8")

def discover_file_type(file: str) -> str:
  """Discover File Type

  From the given path to a file, try and discover the files content type.
  Currently only json and yaml are supported as specific file types.
  Everything else is simply some text.

  Args:
    file: The string value of the path to a file.

  Returns:
    The content type of the file.
  """
  inferredType = Path(file).suffix
  if inferredType in [".yaml", ".yml"]:
    return "yaml"
  elif inferredType == ".json":
    return "json"
  else:
    return "na"

def load_yaml(file: str) -> dict:
  """Load YAML File

  Simply specify the path to a yaml file and the object within
  is loaded as a dictionary.

  Args:
    file: Path to the yaml file

  Returns:
    The dictionary parsed from the yaml file.

  Raises:
    ConfigError: If the file is not valid yaml.

  Example:
    All you have to do is point to the file::

      from navqt.core import files as f
      experiment = f.load_yaml('experiments/ic-uniform.yaml')
  """
  try:
    return yaml.safe_load(get_file_contents(file))
  except yaml.YAMLError as exc:
    raise ConfigError(f"Error parsing {file}: {exc}") from exc

def load_document(file: str) -> dict:
  """Load a yaml or json document, picking the parser from the suffix."""
  fileType = discover_file_type(file)
  return parse_from(get_file_contents(file), "json" if fileType == "json" else "yaml")

def parse_from(contents: str, mimeType: str = "yaml") -> dict:
  """Parse Content From

  Parses the contents of a file to the desired content type.

  Args:
    contents (str): The contents extracted from a file as text.
    mimeType (str): Currently supported values are json and yaml.

  Returns:
    The dictionary parsed from the content.
  """
  if mimeType == "yaml":
    return yaml.safe_load(contents)
  elif mimeType == "json":
    return json.loads(contents)
  else:
    raise ConfigError("Only json and yaml files may be parsed to objects")

def parse_to(obj, mimeType = "yaml") -> str:
  """Parse Object To

  Parses a python dictionary to formatted text specific to the mime type.
  Json output is key-sorted and indented so equal objects give identical text.

  Args:
    obj: The object to be stringified into the mime type.
    mimeType: Currently supported values are json and yaml.

  Returns:
    The mime types textual representation of the object.
  """
  if mimeType == "yaml":
    return yaml.safe_dump(obj, default_flow_style=False, sort_keys=False)
  elif mimeType == "json":
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
  else:
    raise ConfigError("Objects may only be dumped to yaml or json")

def write_atomic(path, text: str) -> Path:
  """Write Atomically

  Writes to a temporary file in the target directory and renames it over the
  target, so readers never observe a partially written file.

  Args:
    path: Destination file.
    text: Full file content.

  Returns:
    The destination path.
  """
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
  try:
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
      fh.write(text)
    os.replace(tmp, path)
  except BaseException:
    if os.path.exists(tmp):
      os.unlink(tmp)
    raise
  return path

def write_json(path, obj) -> Path:
  return write_atomic(path, parse_to(obj, "json"))

def read_json(path) -> dict:
  return json.loads(Path(path).read_text(encoding="utf-8"))

def csv_text(columns, rows) -> str:
  """Render rows of dictionaries as csv text with a fixed column order."""
  lines = _LineBuffer()
  w = csv.DictWriter(lines, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
  w.writeheader()
  for row in rows:
    w.writerow({k: _cell(row.get(k)) for k in columns})
  return "".join(lines)

def write_csv(path, columns, rows) -> Path:
  return write_atomic(path, csv_text(columns, rows))

def read_csv(path) -> list:
  with open(path, newline="", encoding="utf-8") as fh:
    return list(csv.DictReader(fh))

class CsvStream():
  """Csv Stream

  Appends rows to a csv file as they are produced, flushing after each row
  so a long run can be followed from another terminal.

  Args:
    path: Destination file, truncated on open.
    columns: Column names in output order.

  Example:
    Stream metrics from a loop::

      with CsvStream("run.csv", ["iter", "energy"]) as out:
        for i, e in enumerate(energies):
          out.write({"iter": i, "energy": e})
  """
  def __init__(self, path, columns) -> None:
    self.path = Path(path)
    self.columns = list(columns)
    self._fh = None
    self._writer = None
  def __enter__(self):
    self.path.parent.mkdir(parents=True, exist_ok=True)
    self._fh = open(self.path, "w", newline="", encoding="utf-8")
    self._writer = csv.DictWriter(self._fh, fieldnames=self.columns, lineterminator="\n", extrasaction="ignore")
    self._writer.writeheader()
    return self
  def write(self, row: dict):
    self._writer.writerow({k: _cell(row.get(k)) for k in self.columns})
    self._fh.flush()
  def __exit__(self, *exc):
    self._fh.close()
    return False

class _LineBuffer(list):
  def write(self, s):
    self.append(s)

def _cell(v):
  # repr keeps full float precision so csv values equal the json ones
  if v is None:
    return ""
  if isinstance(v, float):
    return repr(v)
  return v
