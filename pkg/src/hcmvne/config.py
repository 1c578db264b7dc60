"""Flat ``key = value`` run configuration.

Files are plain text with ``#`` comments, read through :mod:`configparser`
with an implicit default section, so no ``[section]`` header is needed.
Unknown keys are rejected to catch typos early.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Union

from hcmvne.model import EmbedParams
from hcmvne.workload import WaxmanParams, WorkloadParams

ALGORITHM_NAMES = ("hcm", "no-coarsen", "greedy")


class ConfigError(ValueError):
    pass


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.replace(",", " ").split())


def _backtrack(text: str) -> Union[int, str, None]:
    text = text.strip()
    if text in ("inf", "none", "unbounded"):
        return None
    if text.endswith("n"):
        return text
    return int(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    # substrate
    substrate_nodes: int = 200
    substrate_links: int = 1000
    substrate_cpu: tuple[int, ...] = (3720, 5320)
    substrate_bw_min: int = 50
    substrate_bw_max: int = 100
    waxman_alpha: float = 0.5
    waxman_beta: float = 0.2
    plane_size: float = 100.0
    # workload
    vnr_count: int = 3000
    vn_nodes_min: int = 2
    vn_nodes_max: int = 20
    vn_density: float = 0.5
    vn_cpu: tuple[int, ...] = (500, 1000, 2000, 2500)
    vn_bw_min: int = 1
    vn_bw_max: int = 50
    arrival_rate: float = 0.1
    lifetime_min: int = 300
    lifetime_max: int = 700
    # embedding
    max_hops: int = 2
    max_backtrack: Union[int, str, None] = "3n"
    coarsening: bool = True
    bundle_check: str = "largest"
    # simulation
    algorithms: tuple[str, ...] = ALGORITHM_NAMES
    horizon: int = 30000
    sample_interval: int = 1000
    repetitions: int = 1
    out: str = "out"

    def __post_init__(self):
        for name in self.algorithms:
            if name not in ALGORITHM_NAMES:
                raise ConfigError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHM_NAMES)}")
        if self.vn_nodes_min < 1 or self.vn_nodes_max < self.vn_nodes_min:
            raise ConfigError("need 1 <= vn_nodes_min <= vn_nodes_max")
        if self.horizon < 0 or self.sample_interval <= 0 or self.repetitions < 1:
            raise ConfigError("horizon must be >= 0, sample_interval and repetitions >= 1")
        try:
            self.embed_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- derived parameter objects ------------------------------------------

    def substrate_params(self) -> WaxmanParams:
        return WaxmanParams(self.substrate_nodes, target_link_count=self.substrate_links,
                            alpha=self.waxman_alpha, beta=self.waxman_beta, plane_size=self.plane_size)

    def workload_params(self, seed: Optional[int] = None) -> WorkloadParams:
        return WorkloadParams(
            vnr_count=self.vnr_count,
            vn_node_range=(self.vn_nodes_min, self.vn_nodes_max),
            cpu_choices=self.vn_cpu,
            bw_range=(self.vn_bw_min, self.vn_bw_max),
            arrival_rate=self.arrival_rate,
            lifetime_range=(self.lifetime_min, self.lifetime_max),
            seed=self.seed if seed is None else seed,
            density=self.vn_density,
            alpha=self.waxman_alpha,
            beta=self.waxman_beta,
            plane_size=self.plane_size,
        )

    def embed_params(self) -> EmbedParams:
        return EmbedParams(self.max_hops, self.max_backtrack, self.coarsening, self.bundle_check)

    def with_overrides(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    # -- text form ----------------------------------------------------------

    def dumps(self) -> str:
        """Resolved parameters in the same syntax :func:`load_config` reads."""
        lines = ["# resolved run configuration"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                text = ", ".join(str(x) for x in value)
            elif isinstance(value, bool):
                text = "yes" if value else "no"
            elif value is None:
                text = "inf"
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    "substrate_cpu": _ints,
    "vn_cpu": _ints,
    "algorithms": _names,
    "max_backtrack": _backtrack,
    "coarsening": _bool,
    "bundle_check": str.strip,
    "out": str.strip,
}


def _parser_for(f):
    if f.name in _PARSERS:
        return _PARSERS[f.name]
    return {"int": int, "float": float}[f.type]


def loads(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), default_section="run",
                                   interpolation=None)
    try:
        cp.read_string("[run]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for key, raw in cp.defaults().items():
        if key not in known:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            values[key] = _parser_for(known[key])(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key}: {exc}") from None
    try:
        return RunConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text, str(path))
