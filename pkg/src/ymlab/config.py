"""Experiment configuration: YAML on disk, validated dataclasses in memory.

Every key is checked against a fixed schema; unknown or mistyped keys are
rejected with the line they appear on.
"""
from __future__ import annotations

import hashlib
import json
import math
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml

from .errors import ConfigurationError

SCHEMA_VERSION = 1
SCENARIOS = ("heatflow", "variational", "recover", "checks", "oracle")

# Leaf values are (type, required); nested dicts are sub-schemas.
_MODE = {"k": (list, True), "component": (int, True), "basis": (int, False), "amp": (float, True), "phase": (str, False)}
_INIT = {
    "kind": (str, True),
    "modes": ([_MODE], False),
    "s": (float, False),
    "amplitude": (float, False),
    "kmax": (float, False),
    "coulomb": (bool, False),
}
SCHEMA = {
    "schema_version": (int, True),
    "scenario": (str, True),
    "group": (str, False),
    "seed": (int, False),
    "grid": {"n": (int, True), "L": (float, False)},
    "time": {"T": (float, True), "N": (int, False), "gamma": (float, False), "cfl_safety": (float, False)},
    "exponents": {"a": (float, False), "b": (float, False)},
    "tau": (float, False),
    "taus": ([float], False),
    "initial_data": {"connection": _INIT, "variation": _INIT},
    "recover": {"direct": (bool, False), "tolerance": (float, False)},
    "checks": {
        "hardy": {"count": (int, False), "samples": (int, False)},
        "gfs": {
            "count": (int, False),
            "calibration": (str, False),
            "calibrate": (bool, False),
            "n_fields": (int, False),
            "safety": (float, False),
        },
        "identities": (bool, False),
    },
    "oracle": {"symbol": (str, False), "tolerance": (float, False), "rho_tolerance": (float, False)},
    "output": {"dir": (str, False), "snapshot_every": (int, False)},
}


def _where(node) -> str:
    return f"line {node.start_mark.line + 1}"


def _check_leaf(node, typ, path):
    if isinstance(typ, list):
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigurationError(f"{_where(node)}: '{path}' must be a list")
        for i, item in enumerate(node.value):
            if isinstance(typ[0], dict):
                _check_mapping(item, typ[0], f"{path}[{i}]")
            else:
                _check_leaf(item, typ[0], f"{path}[{i}]")
        return
    if typ is list:
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigurationError(f"{_where(node)}: '{path}' must be a list")
        return
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigurationError(f"{_where(node)}: '{path}' must be a scalar")
    tag = node.tag.rsplit(":", 1)[-1]
    ok = {
        int: tag == "int",
        float: tag in ("float", "int"),
        bool: tag == "bool",
        str: tag == "str",
    }[typ]
    if not ok:
        raise ConfigurationError(f"{_where(node)}: '{path}' must be of type {typ.__name__}, got {node.value!r}")


def _check_mapping(node, schema: dict, path: str):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigurationError(f"{_where(node)}: '{path or 'config'}' must be a mapping")
    seen = set()
    for knode, vnode in node.value:
        key = knode.value
        full = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigurationError(f"{_where(knode)}: unknown key '{full}'")
        if key in seen:
            raise ConfigurationError(f"{_where(knode)}: duplicate key '{full}'")
        seen.add(key)
        sub = schema[key]
        if isinstance(sub, dict):
            _check_mapping(vnode, sub, full)
        else:
            _check_leaf(vnode, sub[0], full)
    for key, sub in schema.items():
        if isinstance(sub, tuple) and sub[1] and key not in seen:
            raise ConfigurationError(f"{_where(node)}: missing required key '{path + '.' if path else ''}{key}'")


@dataclass(frozen=True)
class InitialData:
    kind: str = "modes"
    modes: Tuple[dict, ...] = ()
    s: float = 1.0
    amplitude: float = 0.5
    kmax: Optional[float] = None
    coulomb: bool = False


@dataclass(frozen=True)
class GFSOptions:
    count: int = 100
    calibration: Optional[str] = None
    calibrate: bool = False
    n_fields: int = 1000
    safety: float = 1.5


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    group: str = "SU2"
    seed: int = 0
    n: int = 16
    L: float = 2 * math.pi
    T: float = 0.25
    N: Optional[int] = None
    gamma: float = 2.0
    cfl_safety: float = 0.5
    a: float = 0.5
    b: float = 0.5
    tau: float = 0.0
    taus: Tuple[float, ...] = ()
    connection: InitialData = InitialData()
    variation: Optional[InitialData] = None
    recover_direct: bool = False
    recover_tolerance: float = 5e-3
    hardy_count: int = 100
    hardy_samples: int = 200
    gfs: GFSOptions = GFSOptions()
    identities: bool = False
    oracle_symbol: str = "continuum"
    oracle_tolerance: float = 5e-3
    oracle_rho_tolerance: float = 0.02
    out_dir: str = "out"
    snapshot_every: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.group not in ("U1", "SU2"):
            raise ConfigurationError(f"unknown group {self.group!r}")
        if self.n < 4 or self.n & (self.n - 1):
            raise ConfigurationError(f"grid.n must be a power of two >= 4, got {self.n}")
        if self.L <= 0 or self.T <= 0:
            raise ConfigurationError("grid.L and time.T must be positive")
        if self.T > 1.0 + 1e-12:
            raise ConfigurationError("time.T must not exceed 1")
        for name in ("a", "b"):
            v = getattr(self, name)
            if not 0.5 <= v < 1.0:
                raise ConfigurationError(f"exponents.{name} must lie in [1/2, 1), got {v}")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError("time.cfl_safety must lie in (0, 1]")
        if self.gamma < 1:
            raise ConfigurationError("time.gamma must be >= 1")
        for t in (self.tau,) + tuple(self.taus):
            if not 0 <= t <= self.T:
                raise ConfigurationError(f"tau = {t} outside [0, T]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if self.oracle_symbol not in ("continuum", "discrete"):
            raise ConfigurationError("oracle.symbol must be 'continuum' or 'discrete'")
        if self.scenario == "oracle" and self.group != "U1":
            raise ConfigurationError("the oracle scenario needs group U1")
        for d in (self.connection, self.variation):
            if d is not None and d.kind not in ("modes", "spectral"):
                raise ConfigurationError(f"initial data kind must be 'modes' or 'spectral', got {d.kind!r}")

    @property
    def extra_times(self) -> Tuple[float, ...]:
        return tuple(t for t in (self.tau,) + tuple(self.taus) if t > 0)

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("out_dir")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


def _initial(d: Optional[dict]) -> Optional[InitialData]:
    if d is None:
        return None
    return InitialData(
        kind=d["kind"],
        modes=tuple(dict(m) for m in d.get("modes", ())),
        s=float(d.get("s", 1.0)),
        amplitude=float(d.get("amplitude", 0.5)),
        kmax=None if d.get("kmax") is None else float(d["kmax"]),
        coulomb=bool(d.get("coulomb", False)),
    )


def from_dict(raw: Dict[str, Any]) -> ExperimentConfig:
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported schema_version {raw.get('schema_version')!r}; expected {SCHEMA_VERSION}")
    grid = raw.get("grid", {})
    tm = raw.get("time", {})
    ex = raw.get("exponents", {})
    init = raw.get("initial_data", {})
    rec = raw.get("recover", {})
    ch = raw.get("checks", {})
    gfs = ch.get("gfs", {})
    orc = raw.get("oracle", {})
    out = raw.get("output", {})
    kw = dict(
        scenario=raw["scenario"],
        group=raw.get("group", "SU2"),
        seed=int(raw.get("seed", 0)),
        n=int(grid["n"]) if "n" in grid else 16,
        L=float(grid.get("L", 2 * math.pi)),
        T=float(tm["T"]) if "T" in tm else 0.25,
        N=tm.get("N"),
        gamma=float(tm.get("gamma", 2.0)),
        cfl_safety=float(tm.get("cfl_safety", 0.5)),
        a=float(ex.get("a", 0.5)),
        b=float(ex.get("b", 0.5)),
        tau=float(raw.get("tau", 0.0)),
        taus=tuple(float(t) for t in raw.get("taus", ())),
        connection=_initial(init.get("connection")) or InitialData(),
        variation=_initial(init.get("variation")),
        recover_direct=bool(rec.get("direct", False)),
        recover_tolerance=float(rec.get("tolerance", 5e-3)),
        hardy_count=int(ch.get("hardy", {}).get("count", 100)),
        hardy_samples=int(ch.get("hardy", {}).get("samples", 200)),
        gfs=GFSOptions(
            count=int(gfs.get("count", 100)),
            calibration=gfs.get("calibration"),
            calibrate=bool(gfs.get("calibrate", False)),
            n_fields=int(gfs.get("n_fields", 1000)),
            safety=float(gfs.get("safety", 1.5)),
        ),
        identities=bool(ch.get("identities", False)),
        oracle_symbol=orc.get("symbol", "continuum"),
        oracle_tolerance=float(orc.get("tolerance", 5e-3)),
        oracle_rho_tolerance=float(orc.get("rho_tolerance", 0.02)),
        out_dir=out.get("dir", "out"),
        snapshot_every=int(out.get("snapshot_every", 0)),
    )
    return ExperimentConfig(**kw)


def loads(text: str) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config is not valid YAML: {exc}") from exc
    if node is None:
        raise ConfigurationError("config is empty")
    _check_mapping(node, SCHEMA, "")
    return from_dict(yaml.safe_load(text))


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


# -- seeds ----------------------------------------------------------------------


def stream(seed: int, label: str) -> np.random.Generator:
    """Independent Philox stream keyed by (master seed, label); order of use does not matter."""
    key = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(label.encode())])
    return np.random.Generator(np.random.Philox(key))
