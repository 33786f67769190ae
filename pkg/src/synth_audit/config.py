"""Run configuration: an INI file with a fixed set of sections and keys.

Grammar (``configparser`` syntax; ``#`` or ``;`` start comments)::

    [data]        scenario | csv, n_rows, minority_fraction, exclude, standardize, dequantize
    [split]       n_mem, n_ref, n_test
    [generator]   kind, knob, n_syn
    [attackers]   names (comma list), backend (default density backend)
    [attacker.NAME]  per-attacker options (see ATTACKER_KEYS)
    [flow]        flows, layers, hidden, batch, lr, epochs, polyak
    [subgroup]    predicate
    [sweep]       knob, values
    [shift]       group0, levels
    [run]         seeds, jobs

Unknown sections or keys are rejected. Every value, defaulted or not, is
echoed into the report metadata.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .attacks import ATTACKERS, NetConfig
from .data import Predicate
from .density.flow import FlowConfig
from .errors import ConfigError, ParameterError
from .generators import KINDS
from .scenarios import SCENARIOS

BACKENDS = ("kde", "flow", "closed_form")
SWEEP_KNOBS = ("n_mem", "n_ref", "n_syn", "generator.knob")

# options accepted in [attacker.NAME]
ATTACKER_KEYS = {
    "domias": {"backend", "bandwidth"},
    "eq1_only": {"backend", "bandwidth"},
    "gaussian_prior": {"backend", "bandwidth", "features", "means", "stds"},
    "logan0": {"hidden", "epochs", "lr", "batch", "latent"},
    "logan_d1": {"hidden", "epochs", "lr", "batch"},
    "mc": {"epsilon", "pca_components"},
    "ganleaks0": {"k"},
    "ganleaks_cal": {"k", "reference_kind", "reference_knob"},
}
_DENSITY_ATTACKERS = ("domias", "eq1_only", "gaussian_prior")


@dataclass(frozen=True)
class DataConfig:
    scenario: str | None = "gauss-mixture"
    csv: str | None = None
    n_rows: int = 20000
    minority_fraction: float = 0.1
    exclude: str | None = None
    standardize: bool = True
    dequantize: bool = False


@dataclass(frozen=True)
class SplitConfig:
    n_mem: int = 100
    n_ref: int = 2000
    n_test: int = 200


@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "additive_noise"
    knob: float = 0.1
    n_syn: int = 10000


@dataclass(frozen=True)
class SweepConfig:
    knob: str | None = None
    values: tuple = ()


@dataclass(frozen=True)
class ShiftConfig:
    group0: str | None = None
    levels: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = DataConfig()
    split: SplitConfig = SplitConfig()
    generator: GeneratorConfig = GeneratorConfig()
    attackers: tuple = ("domias", "eq1_only")
    backend: str = "kde"
    attacker_options: dict = field(default_factory=dict)
    flow: FlowConfig = FlowConfig()
    subgroup: str | None = None
    sweep: SweepConfig = SweepConfig()
    shift: ShiftConfig = ShiftConfig()
    seeds: tuple = (0,)
    jobs: int = 1

    def backend_for(self, attacker: str) -> str:
        return self.attacker_options.get(attacker, {}).get("backend", self.backend)

    def option(self, attacker: str, key: str, default=None):
        return self.attacker_options.get(attacker, {}).get(key, default)

    def net_config(self, attacker: str) -> NetConfig:
        opts = self.attacker_options.get(attacker, {})
        return NetConfig(**{k: v for k, v in opts.items() if k in {f.name for f in fields(NetConfig)}})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["attacker_options"] = {k: dict(sorted(v.items())) for k, v in sorted(self.attacker_options.items())}
        return d

    def validate(self) -> "RunConfig":
        if not self.attackers:
            raise ConfigError("no attackers configured")
        for name in self.attackers:
            if name not in ATTACKERS:
                raise ConfigError(f"unknown attacker {name!r}; expected one of {ATTACKERS}")
        if len(set(self.attackers)) != len(self.attackers):
            raise ConfigError("duplicate attacker names")
        for name, opts in self.attacker_options.items():
            if name not in ATTACKERS:
                raise ConfigError(f"options given for unknown attacker {name!r}")
            extra = set(opts) - ATTACKER_KEYS[name]
            if extra:
                raise ConfigError(f"unknown option(s) {sorted(extra)} for attacker {name!r}")
        d = self.data
        if (d.scenario is None) == (d.csv is None):
            raise ConfigError("[data] needs exactly one of 'scenario' or 'csv'")
        if d.scenario is not None and d.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {d.scenario!r}; expected one of {SCENARIOS}")
        if not 0.0 < d.minority_fraction < 1.0:
            raise ConfigError("minority_fraction must lie in (0, 1)")
        for name in self.attackers:
            backend = self.backend_for(name) if name in _DENSITY_ATTACKERS else None
            if backend is not None and backend not in BACKENDS:
                raise ConfigError(f"unknown density backend {backend!r}")
            if backend == "closed_form" and d.scenario != "fig2":
                raise ConfigError("the closed_form backend is only available for the fig2 scenario")
        if d.scenario == "fig2" and d.standardize:
            raise ConfigError("the fig2 scenario works in raw coordinates; set standardize = false")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown density backend {self.backend!r}")
        s = self.split
        if min(s.n_mem, s.n_ref, s.n_test) < 1 or s.n_test % 2:
            raise ConfigError("split sizes must be positive and n_test even")
        if s.n_test // 2 > s.n_mem:
            raise ConfigError("n_test/2 cannot exceed n_mem")
        g = self.generator
        if g.kind not in KINDS or g.kind == "closed_form_scenario":
            raise ConfigError(f"generator kind must be one of {KINDS[:3]}")
        if g.n_syn < 1 or g.knob < 0:
            raise ConfigError("generator needs n_syn >= 1 and knob >= 0")
        if "gaussian_prior" in self.attackers and not self.option("gaussian_prior", "features"):
            raise ConfigError("gaussian_prior needs [attacker.gaussian_prior] features/means/stds")
        for text in (self.subgroup, self.shift.group0, d.exclude):
            if text is not None:
                try:
                    Predicate.parse(text)
                except ParameterError as exc:
                    raise ConfigError(str(exc)) from None
        if self.sweep.knob is not None:
            if self.sweep.knob not in SWEEP_KNOBS:
                raise ConfigError(f"sweep knob must be one of {SWEEP_KNOBS}")
            if not self.sweep.values:
                raise ConfigError("sweep needs at least one value")
        if self.shift.levels:
            if any(not 0.0 <= p <= 1.0 for p in self.shift.levels):
                raise ConfigError("shift levels must lie in [0, 1]")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        return self


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _coerce(cls, section: str, raw: dict):
    """Build dataclass ``cls`` from string values, converting by default type."""
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, text in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        default = getattr(cls(), key)
        try:
            if isinstance(default, bool):
                kwargs[key] = _bool(text)
            elif isinstance(default, int):
                kwargs[key] = int(text)
            elif isinstance(default, float):
                kwargs[key] = float(text)
            elif isinstance(default, tuple):
                kwargs[key] = tuple(float(v) for v in _split_list(text))
            else:
                kwargs[key] = text.strip() or None
        except ValueError:
            raise ConfigError(f"invalid value {text!r} for {section}.{key}") from None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def _attacker_value(key: str, text: str):
    if key in ("backend", "reference_kind"):
        return text.strip()
    if key in ("features",):
        return tuple(_split_list(text))
    if key in ("means", "stds"):
        return tuple(float(v) for v in _split_list(text))
    if key in ("hidden", "epochs", "batch", "latent", "k", "pca_components"):
        return int(text)
    return float(text)


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    updates = {}
    attacker_options = {}
    for section in parser.sections():
        raw = dict(parser.items(section))
        if section == "data":
            if "csv" in raw and "scenario" not in raw:
                raw["scenario"] = ""
            updates["data"] = _coerce(DataConfig, section, raw)
        elif section == "split":
            updates["split"] = _coerce(SplitConfig, section, raw)
        elif section == "generator":
            updates["generator"] = _coerce(GeneratorConfig, section, raw)
        elif section == "flow":
            updates["flow"] = _coerce(FlowConfig, section, raw)
        elif section == "attackers":
            extra = set(raw) - {"names", "backend"}
            if extra:
                raise ConfigError(f"unknown key(s) {sorted(extra)} in [attackers]")
            if "names" in raw:
                updates["attackers"] = tuple(_split_list(raw["names"]))
            if "backend" in raw:
                updates["backend"] = raw["backend"].strip()
        elif section.startswith("attacker."):
            name = section.split(".", 1)[1]
            try:
                attacker_options[name] = {k: _attacker_value(k, v) for k, v in raw.items()}
            except ValueError:
                raise ConfigError(f"invalid value in [{section}]") from None
        elif section == "subgroup":
            extra = set(raw) - {"predicate"}
            if extra:
                raise ConfigError(f"unknown key(s) {sorted(extra)} in [subgroup]")
            updates["subgroup"] = raw.get("predicate")
        elif section == "sweep":
            if set(raw) - {"knob", "values"}:
                raise ConfigError(f"unknown key(s) in [sweep]: {sorted(set(raw) - {'knob', 'values'})}")
            knobs = _split_list(raw.get("knob", ""))
            if len(knobs) > 1:
                raise ConfigError("exactly one knob may be swept")
            try:
                values = tuple(float(v) for v in _split_list(raw.get("values", "")))
            except ValueError:
                raise ConfigError("sweep values must be numbers") from None
            updates["sweep"] = SweepConfig(knobs[0] if knobs else None, values)
        elif section == "shift":
            if set(raw) - {"group0", "levels"}:
                raise ConfigError("unknown key(s) in [shift]")
            try:
                levels = tuple(float(v) for v in _split_list(raw.get("levels", "")))
            except ValueError:
                raise ConfigError("shift levels must be numbers") from None
            updates["shift"] = ShiftConfig(raw.get("group0"), levels)
        elif section == "run":
            if set(raw) - {"seeds", "jobs"}:
                raise ConfigError("unknown key(s) in [run]")
            try:
                if "seeds" in raw:
                    updates["seeds"] = tuple(int(s) for s in _split_list(raw["seeds"]))
                if "jobs" in raw:
                    updates["jobs"] = int(raw["jobs"])
            except ValueError:
                raise ConfigError("seeds and jobs must be integers") from None
        else:
            raise ConfigError(f"unknown section [{section}]")
    if attacker_options:
        updates["attacker_options"] = attacker_options
    return replace(cfg, **updates)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
