"""File formats: dataset/site CSVs, key-value configs, run manifests.

CSV schemas are fixed: datasets are `replicate, site_1..site_Q` and site
tables are `id, x, y`.  Floats are written with repr so that reading a
file back reproduces every value bit for bit.

Config files are plain text, one `key = value` per line with dotted
lowercase keys; `#` starts a comment, blank lines are ignored, and every
diagnostic names the offending key and line number.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .likelihood import Dataset

_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*(\.[a-z][a-z0-9_]*)*$")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------------------
# dataset and site tables


def write_dataset_csv(path, data: Dataset):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate"] + [f"site_{q + 1}" for q in range(data.Q)])
        for rid, row in zip(data.replicate_ids, data.values):
            w.writerow([rid] + [_fmt(v) for v in row])


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "replicate":
            raise ConfigError(f"{path}: expected a 'replicate,site_1..' header")
        ids, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise ConfigError(f"{path}: row has {len(rec)} fields, "
                                  f"header has {len(header)}", line=lineno)
            ids.append(int(rec[0]))
            rows.append([float(v) for v in rec[1:]])
    if not rows:
        raise ConfigError(f"{path}: no replicate rows")
    return Dataset(values=np.array(rows), replicate_ids=np.array(ids))


def write_sites_csv(path, locations):
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(locations, start=1):
            w.writerow([i, _fmt(x), _fmt(y)])


def read_sites_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "x", "y"]:
            raise ConfigError(f"{path}: expected an 'id,x,y' header")
        out = [(float(rec[1]), float(rec[2])) for rec in reader]
    if not out:
        raise ConfigError(f"{path}: no site rows")
    return np.array(out)


# ---------------------------------------------------------------------------
# key = value configuration files


def parse_key_values(path) -> dict:
    """Flat `key -> (value, line_number)` map from a config file."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("expected 'key = value'", line=lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            if not _KEY_RE.match(key):
                raise ConfigError(f"malformed key {key!r}", key=key, line=lineno)
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", key=key, line=lineno)
            if not value:
                raise ConfigError(f"empty value for {key!r}", key=key, line=lineno)
            out[key] = (value, lineno)
    return out


@dataclass(frozen=True)
class _Key:
    parse: object
    default: object = None
    required: bool = False


def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s: str) -> tuple:
    return tuple(float(v.strip()) for v in s.split(","))


def _parse_int_list(s: str) -> tuple:
    return tuple(int(v.strip()) for v in s.split(","))


_MODEL_KEYS = {
    "model.family": _Key(str, required=True),
    "model.alpha": _Key(float),
    "model.tau": _Key(float),
    "model.lam": _Key(float),
    "model.nu": _Key(float),
    "model.weights": _Key(_parse_float_list),
    "model.alphas": _Key(_parse_float_list),
    "model.knot_grid": _Key(int),
    "model.mvn_sample_budget": _Key(int, default=16_384),
}

_COMMON_KEYS = {
    "rng.seed": _Key(int, default=0),
    "rng.stream": _Key(int, default=0),
    "rng.algorithm": _Key(str, default="pcg64"),
    "output.dir": _Key(str),
    "resources.memory_cap": _Key(int),
    "resources.threads": _Key(int, default=1),
}

_SCHEMAS = {
    "simulate": {
        **_MODEL_KEYS, **_COMMON_KEYS,
        "sites.count": _Key(int),
        "sites.file": _Key(str),
        "data.replicates": _Key(int, required=True),
    },
    "study": {
        **_MODEL_KEYS, **_COMMON_KEYS,
        "sites.count": _Key(int, required=True),
        "sites.file": _Key(str),
        "data.replicates": _Key(int, required=True),
        "study.experiments": _Key(int, required=True),
        "study.q_list": _Key(_parse_int_list, required=True),
        "study.t_list": _Key(_parse_float_list, default=(1.0,)),
        "study.truncation_table": _Key(_parse_bool, default=False),
    },
}

_FAMILIES = ("logistic", "mixture", "reich_shaby", "brown_resnick")


@dataclass
class RunConfig:
    """Validated configuration for one CLI run."""

    subcommand: str
    values: dict
    resolved: dict = field(default_factory=dict)  # key -> canonical string

    def get(self, key, default=None):
        return self.values.get(key, default)


def _validate_model_block(values, lines):
    family = values["model.family"]
    if family not in _FAMILIES:
        raise ConfigError(f"unknown model.family {family!r}; choose from {_FAMILIES}",
                          key="model.family", line=lines.get("model.family"))

    def need(key):
        if values.get(key) is None:
            raise ConfigError(f"{family} model requires {key}", key=key)

    def check(key, ok, message):
        if values.get(key) is not None and not ok(values[key]):
            raise ConfigError(message, key=key, line=lines.get(key))

    check("model.alpha", lambda a: 0.0 < a <= 1.0, "alpha must lie in (0, 1]")
    check("model.alphas", lambda al: all(0.0 < a <= 1.0 for a in al),
          "alpha must lie in (0, 1]")
    check("model.tau", lambda t: t > 0.0, "tau must be positive")
    check("model.lam", lambda v: v > 0.0, "lam must be positive")
    check("model.nu", lambda v: 0.0 < v <= 2.0, "nu must lie in (0, 2]")
    check("model.weights", lambda w: all(v > 0.0 for v in w)
          and abs(sum(w) - 1.0) < 1e-12, "weights must be positive and sum to 1")
    check("model.knot_grid", lambda k: k >= 1, "knot_grid must be at least 1")

    if family == "logistic":
        need("model.alpha")
    elif family == "mixture":
        need("model.weights"), need("model.alphas")
        if len(values["model.weights"]) != len(values["model.alphas"]):
            raise ConfigError("weights and alphas must have equal length",
                              key="model.alphas", line=lines.get("model.alphas"))
    elif family == "reich_shaby":
        need("model.alpha"), need("model.tau"), need("model.knot_grid")
    else:
        need("model.lam"), need("model.nu")


def parse_config(path, subcommand: str) -> RunConfig:
    """Parse + validate a config file against one subcommand's schema.

    Accepts either the key = value format or a previously written JSON
    manifest (the embedded resolved config is then re-validated), so any
    run can be replayed from its own manifest.
    """
    if subcommand not in _SCHEMAS:
        raise ConfigError(f"no config schema for subcommand {subcommand!r}")
    schema = _SCHEMAS[subcommand]

    with open(path) as fh:
        head = fh.read(1)
    if head == "{":
        with open(path) as fh:
            manifest = json.load(fh)
        resolved = manifest.get("resolved_config")
        if not isinstance(resolved, dict):
            raise ConfigError(f"{path}: manifest has no resolved_config block")
        raw = {k: (str(v), None) for k, v in resolved.items()}
    else:
        raw = parse_key_values(path)

    for key, (_, lineno) in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for {subcommand}",
                              key=key, line=lineno)

    values, lines = {}, {}
    for key, spec in schema.items():
        if key in raw:
            text, lineno = raw[key]
            lines[key] = lineno
            try:
                values[key] = spec.parse(text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}",
                                  key=key, line=lineno) from exc
        elif spec.required:
            raise ConfigError(f"missing required key {key}", key=key)
        else:
            values[key] = spec.default

    _validate_model_block(values, lines)

    if values.get("resources.memory_cap") is not None and values["resources.memory_cap"] <= 0:
        raise ConfigError("memory cap must be positive", key="resources.memory_cap",
                          line=lines.get("resources.memory_cap"))
    if values["resources.threads"] < 1:
        raise ConfigError("thread count must be at least 1", key="resources.threads",
                          line=lines.get("resources.threads"))
    if values["rng.algorithm"] not in ("pcg64", "philox"):
        raise ConfigError("rng.algorithm must be pcg64 or philox",
                          key="rng.algorithm", line=lines.get("rng.algorithm"))

    resolved = {}
    for key in sorted(values):
        v = values[key]
        if v is None:
            continue
        if isinstance(v, tuple):
            resolved[key] = ", ".join(_fmt(x) for x in v)
        elif isinstance(v, bool):
            resolved[key] = "true" if v else "false"
        else:
            resolved[key] = _fmt(v)
    return RunConfig(subcommand=subcommand, values=values, resolved=resolved)


def write_resolved_config(path, config: RunConfig):
    """Echo the fully resolved configuration; re-parsing it is an identity."""
    with open(path, "w") as fh:
        fh.write(f"# resolved {config.subcommand} configuration\n")
        for key, value in config.resolved.items():
            fh.write(f"{key} = {value}\n")


def config_digest(config: RunConfig) -> str:
    text = "\n".join(f"{k} = {v}" for k, v in sorted(config.resolved.items()))
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(path, subcommand: str, resolved: dict, outputs: list,
                   wall_time: float, extra: dict | None = None):
    import scipy

    from . import __version__

    payload = {
        "subcommand": subcommand,
        "resolved_config": dict(resolved),
        "config_sha256": hashlib.sha256(
            "\n".join(f"{k} = {v}" for k, v in sorted(resolved.items())).encode()
        ).hexdigest(),
        "versions": {
            "maxstable": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "outputs": sorted(outputs),
        "wall_time_seconds": wall_time,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
