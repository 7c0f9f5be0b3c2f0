"""Run configuration: YAML/JSON documents validated into a fully resolved RunConfig."""
from __future__ import annotations

import copy
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .bath import BathParams, temperature_to_ghz
from .pauli import ModelSpec, build_kink_chain


class ConfigError(ValueError):
    """Raised with every validation problem listed, one per line."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KinkChain(_Strict):
    n: int = Field(ge=2)
    j: float = Field(gt=0)
    delta: float = Field(ge=0)


class ModelSection(_Strict):
    kink_chain: Optional[KinkChain] = None
    n_qubits: Optional[int] = Field(default=None, ge=1)
    h: Optional[list[float]] = None
    delta: Optional[list[float]] = None
    # (i, j, J) with 1-based qubit indices
    couplings: list[tuple[int, int, float]] = []

    @model_validator(mode="after")
    def _one_form(self):
        explicit = self.n_qubits is not None
        if (self.kink_chain is None) == (not explicit):
            raise ValueError("model needs exactly one of 'kink_chain' or an explicit 'n_qubits' block")
        if explicit:
            n = self.n_qubits
            h = self.h if self.h is not None else [0.0] * n
            d = self.delta if self.delta is not None else [0.0] * n
            if len(h) != n or len(d) != n:
                raise ValueError(f"h and delta need {n} entries")
            for i, j, _ in self.couplings:
                if not (1 <= i <= n and 1 <= j <= n) or i == j:
                    raise ValueError(f"bad coupling pair ({i}, {j})")
        elif self.h is not None or self.delta is not None or self.couplings:
            raise ValueError("kink_chain shorthand cannot be combined with h/delta/couplings")
        return self

    def build(self) -> ModelSpec:
        if self.kink_chain is not None:
            kc = self.kink_chain
            return build_kink_chain(kc.n, kc.j, kc.delta)
        n = self.n_qubits
        return ModelSpec(n, tuple(self.h or [0.0] * n), tuple(self.delta or [0.0] * n),
                         {(i - 1, j - 1): J for i, j, J in self.couplings})

    @property
    def n(self) -> int:
        return self.kink_chain.n if self.kink_chain is not None else self.n_qubits


class EpsGrid(_Strict):
    start: float
    stop: float
    step: float = Field(gt=0)


class ProbeSection(_Strict):
    j_p: float = Field(gt=0)
    delta_p: float = Field(default=1.0, gt=0)
    epsilon: Union[Literal["auto"], EpsGrid] = "auto"
    epsilon_axis: Literal["relative", "raw"] = "relative"


class BathSection(_Strict):
    w_mk: Optional[float] = Field(default=None, gt=0)
    t_mk: Optional[float] = Field(default=None, gt=0)
    w_ghz: Optional[float] = Field(default=None, gt=0)
    eps_p_ghz: Optional[float] = Field(default=None, ge=0)
    t_ghz: Optional[float] = Field(default=None, gt=0)
    eta: float = Field(default=0.0, ge=0)
    omega_c_ghz: float = Field(default=10.0, gt=0)
    mode: Optional[Literal["fdt", "explicit"]] = None

    @model_validator(mode="after")
    def _one_mode(self):
        mk = self.w_mk is not None or self.t_mk is not None
        ghz = self.w_ghz is not None or self.eps_p_ghz is not None or self.t_ghz is not None
        if mk and ghz:
            raise ValueError("bath mode conflict: give either w_mk/t_mk (FDT) or w_ghz/eps_p_ghz/t_ghz, not both")
        if mk:
            if self.w_mk is None or self.t_mk is None:
                raise ValueError("FDT bath mode needs both w_mk and t_mk")
            resolved = "fdt"
        elif ghz:
            if None in (self.w_ghz, self.eps_p_ghz, self.t_ghz):
                raise ValueError("explicit bath mode needs w_ghz, eps_p_ghz and t_ghz")
            resolved = "explicit"
        else:
            raise ValueError("bath section needs w_mk/t_mk or w_ghz/eps_p_ghz/t_ghz")
        if self.mode is not None and self.mode != resolved:
            raise ValueError(f"bath mode {self.mode!r} contradicts the given keys ({resolved})")
        object.__setattr__(self, "mode", resolved)
        return self

    def build(self) -> BathParams:
        if self.mode == "fdt":
            return BathParams.from_millikelvin(self.w_mk, self.t_mk, self.eta, self.omega_c_ghz)
        return BathParams(self.w_ghz, self.eps_p_ghz, self.t_ghz, self.eta, self.omega_c_ghz, mode="explicit")

    @property
    def width_ghz(self) -> float:
        return temperature_to_ghz(self.w_mk) if self.mode == "fdt" else self.w_ghz


class EvolveSection(_Strict):
    l: int = Field(default=1, ge=1)
    epsilon_rel: float = 0.0
    n_down: int = Field(default=1, ge=1)
    t_max_ns: Optional[float] = Field(default=None, gt=0)
    t_max_escape: float = Field(default=10.0, gt=0)
    n_times: int = Field(default=201, ge=2)


class ExperimentSection(_Strict):
    command: Literal["spectrum", "sweep", "evolve"] = "sweep"
    l: Union[Literal["all"], list[int]] = "all"
    k: int = Field(default=10, ge=1)
    n_levels: int = Field(default=4, ge=1)
    seed: int = 0
    solver: Literal["auto", "lanczos", "dense"] = "auto"
    tol: float = Field(default=1e-10, gt=0)
    rate_mode: Literal["marcus", "lineshape"] = "marcus"
    peaks: bool = True
    evolve: EvolveSection = EvolveSection()


class OutputSection(_Strict):
    dir: str = "out"
    format: Literal["table", "tree"] = "table"
    normalize: bool = True


class RunConfig(_Strict):
    model: ModelSection
    probe: Optional[ProbeSection] = None
    bath: Optional[BathSection] = None
    experiment: ExperimentSection = ExperimentSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _cross(self):
        cmd = self.experiment.command
        if cmd in ("sweep", "evolve") and (self.probe is None or self.bath is None):
            raise ValueError(f"command {cmd!r} needs probe and bath sections")
        n = self.model.n
        if self.experiment.l != "all":
            bad = [l for l in self.experiment.l if not 1 <= l <= n + 1]
            if bad:
                raise ValueError(f"reference indices {bad} outside 1..{n + 1}")
        if cmd == "evolve" and not self.experiment.evolve.l <= n + 1:
            raise ValueError(f"evolve l outside 1..{n + 1}")
        if (cmd == "sweep" and self.experiment.peaks and isinstance(self.probe.epsilon, EpsGrid)):
            W = self.bath.width_ghz
            if self.probe.epsilon.step > W / 4:
                raise ValueError(
                    f"epsilon step {self.probe.epsilon.step} GHz exceeds W/4 = {W / 4:.6g} GHz "
                    "required for peak extraction")
        return self

    def resolved(self) -> dict:
        """Plain dict of every setting including defaults (stable key order)."""
        return self.model_dump(mode="json")


PRESETS: dict[str, dict] = {
    "fig3": {
        "model": {"kink_chain": {"n": 7, "j": 2.0, "delta": 2.0}},
        "probe": {"j_p": 2.0},
        "bath": {"w_mk": 10.0, "t_mk": 12.0},
        "experiment": {"command": "sweep", "k": 10, "n_levels": 4},
    },
    "fig4": {
        "model": {"kink_chain": {"n": 16, "j": 2.0, "delta": 2.0}},
        "probe": {"j_p": 2.0},
        "bath": {"w_mk": 10.0, "t_mk": 12.0},
        "experiment": {"command": "sweep", "k": 10, "n_levels": 4, "solver": "lanczos"},
    },
    # one qubit, -X; the huge coupler makes the probe-down ground state |down> / |up>
    "smoke": {
        "model": {"n_qubits": 1, "h": [0.0], "delta": [1.0]},
        "probe": {"j_p": 1000.0},
        "bath": {"w_mk": 10.0, "t_mk": 12.0},
        "experiment": {"command": "sweep", "k": 2, "n_levels": 2},
    },
}


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "\n".join(lines)


def from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def parse_config(text: str) -> RunConfig:
    """Parse a YAML (or JSON) document into a validated RunConfig."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed config: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return from_dict(data)


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Apply dotted-path overrides such as ``{"experiment.seed": 3}``."""
    data = cfg.resolved()
    for path, value in overrides.items():
        node = data
        *parents, leaf = path.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    # defaults filled in by resolved() would otherwise look like user keys
    return from_dict(_prune_none(data))


def _prune_none(d):
    if isinstance(d, dict):
        return {k: _prune_none(v) for k, v in d.items() if v is not None}
    return d

