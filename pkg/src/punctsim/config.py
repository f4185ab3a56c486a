"""Plain-text run configuration.

Files hold `key = value` lines with dotted keys grouped by domain
(cell, traffic, phy, channel, scheduler, topology, agent, curriculum,
run).  Unknown keys are rejected; every error names the offending key.
The format round-trips: parse(dumps(cfg)) == cfg.
"""

import math
from dataclasses import dataclass

from .core import CellConfig
from .engine import POLICIES, CurriculumStage, DEFAULT_CURRICULUM
from .phy import ChannelParams, DecodabilityModel
from .sac import AgentHyper
from .traffic import TrafficConfig

# Default cell layout: per-user (x, y) offsets from the base station, m.
_DEFAULT_EMBB_XY = (
    -164.2, 841.0, 1.2, 581.4, -813.3, 98.1, 958.1, 159.3, 573.9, -412.3,
    -754.9, 509.7, 302.0, 445.6, 430.8, 96.3, 67.6, -155.8, 308.7, -530.3,
)


def _parse_int(s: str) -> int:
    return int(s, 10)


def _parse_float(s: str) -> float:
    return float(s)


def _parse_str(s: str) -> str:
    return s


def _parse_float_or_none(s: str):
    return None if s.lower() == "none" else float(s)


def _parse_ints(s: str) -> tuple:
    return tuple(int(v.strip(), 10) for v in s.split(",") if v.strip())


def _parse_floats(s: str) -> tuple:
    return tuple(float(v.strip()) for v in s.split(",") if v.strip())


def _parse_stages(s: str) -> tuple:
    stages = []
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        fields = part.split(":")
        if len(fields) != 3:
            raise ValueError(f"stage '{part}' is not packets:window:episodes")
        stages.append(CurriculumStage(packets=int(fields[0]),
                                      window=int(fields[1]),
                                      episodes=int(fields[2])))
    return tuple(stages)


def _fmt_scalar(v) -> str:
    if v is None:
        return "none"
    return repr(v) if isinstance(v, float) else str(v)


def _fmt_seq(v) -> str:
    return ", ".join(_fmt_scalar(x) for x in v)


def _fmt_stages(v) -> str:
    return ", ".join(f"{st.packets}:{st.window}:{st.episodes}" for st in v)


_DEFAULT_STAGES = DEFAULT_CURRICULUM

# key -> (parser, formatter, default)
SCHEMA = {
    "cell.total_scs": (_parse_int, _fmt_scalar, 780),
    "cell.num_embb": (_parse_int, _fmt_scalar, 10),
    "cell.urllc_sc_len": (_parse_int, _fmt_scalar, 300),
    "cell.minislots": (_parse_int, _fmt_scalar, 7),
    "cell.rb_size": (_parse_int, _fmt_scalar, 12),
    "traffic.num_urllc": (_parse_int, _fmt_scalar, 12),
    "traffic.per_ue_prob": (_parse_float, _fmt_scalar, 0.08),
    "phy.decode_kind": (_parse_str, _fmt_scalar, "threshold"),
    "phy.decode_margin": (_parse_float_or_none, _fmt_scalar, None),
    "phy.code_seed": (_parse_int, _fmt_scalar, 0),
    "channel.tx_power_dbm": (_parse_float, _fmt_scalar, 46.0),
    "channel.noise_dbm": (_parse_float, _fmt_scalar, -84.0),
    "channel.pathloss_ref_db": (_parse_float, _fmt_scalar, 30.0),
    "channel.ref_distance_m": (_parse_float, _fmt_scalar, 1.0),
    "channel.pathloss_exponent": (_parse_float, _fmt_scalar, 3.0),
    "channel.shadowing_std_db": (_parse_float, _fmt_scalar, 4.0),
    "scheduler.ewma_beta": (_parse_float, _fmt_scalar, 0.01),
    "topology.embb_xy": (_parse_floats, _fmt_seq, _DEFAULT_EMBB_XY),
    "agent.discount": (_parse_float, _fmt_scalar, 0.95),
    "agent.zeta": (_parse_float, _fmt_scalar, 0.2),
    "agent.batch": (_parse_int, _fmt_scalar, 256),
    "agent.soft_rate": (_parse_float, _fmt_scalar, 0.005),
    "agent.lr": (_parse_float, _fmt_scalar, 3e-4),
    "agent.buffer_capacity": (_parse_int, _fmt_scalar, 20_000),
    "agent.actor_hidden": (_parse_ints, _fmt_seq, (128,)),
    "agent.critic_hidden": (_parse_ints, _fmt_seq, (256, 256)),
    "agent.actor_final_scale": (_parse_float, _fmt_scalar, 0.01),
    "curriculum.stages": (_parse_stages, _fmt_stages, _DEFAULT_STAGES),
    "run.ttis": (_parse_int, _fmt_scalar, 10_000),
    "run.policy": (_parse_str, _fmt_scalar, "cyrus"),
    "run.seed": (_parse_int, _fmt_scalar, 0),
}

_DOMAINS = sorted({k.split(".", 1)[0] for k in SCHEMA})


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    values: tuple   # ((key, value), ...) in schema order

    def get(self, key: str):
        for k, v in self.values:
            if k == key:
                return v
        raise KeyError(key)

    def replace(self, **overrides) -> "SimConfig":
        """Override by key with dots replaced by underscores."""
        by_key = {k.replace(".", "_"): k for k in SCHEMA}
        mapping = dict(self.values)
        for name, value in overrides.items():
            if name not in by_key:
                raise ConfigError(f"unknown config key '{name}'")
            mapping[by_key[name]] = value
        return SimConfig(values=tuple((k, mapping[k]) for k in SCHEMA))

    def cell(self) -> CellConfig:
        return CellConfig(total_scs=self.get("cell.total_scs"),
                          num_embb=self.get("cell.num_embb"),
                          urllc_sc_len=self.get("cell.urllc_sc_len"),
                          minislots=self.get("cell.minislots"),
                          rb_size=self.get("cell.rb_size"))

    def traffic(self) -> TrafficConfig:
        return TrafficConfig(num_urllc=self.get("traffic.num_urllc"),
                             per_ue_prob=self.get("traffic.per_ue_prob"))

    def channel(self) -> ChannelParams:
        return ChannelParams(
            tx_power_dbm=self.get("channel.tx_power_dbm"),
            noise_dbm=self.get("channel.noise_dbm"),
            pathloss_ref_db=self.get("channel.pathloss_ref_db"),
            ref_distance_m=self.get("channel.ref_distance_m"),
            pathloss_exponent=self.get("channel.pathloss_exponent"),
            shadowing_std_db=self.get("channel.shadowing_std_db"))

    def decoder(self) -> DecodabilityModel:
        return DecodabilityModel(kind=self.get("phy.decode_kind"),
                                 margin=self.get("phy.decode_margin"),
                                 code_seed=self.get("phy.code_seed"))

    def hyper(self) -> AgentHyper:
        return AgentHyper(
            discount=self.get("agent.discount"),
            zeta=self.get("agent.zeta"),
            batch=self.get("agent.batch"),
            soft_rate=self.get("agent.soft_rate"),
            lr=self.get("agent.lr"),
            buffer_capacity=self.get("agent.buffer_capacity"),
            actor_hidden=self.get("agent.actor_hidden"),
            critic_hidden=self.get("agent.critic_hidden"),
            actor_final_scale=self.get("agent.actor_final_scale"))

    def stages(self) -> tuple:
        return self.get("curriculum.stages")

    def distances(self) -> tuple:
        xy = self.get("topology.embb_xy")
        n = self.get("cell.num_embb")
        if len(xy) != 2 * n:
            raise ConfigError(
                f"topology.embb_xy holds {len(xy)} values; "
                f"cell.num_embb = {n} needs {2 * n}")
        return tuple(math.hypot(xy[2 * i], xy[2 * i + 1]) for i in range(n))

    def validate(self) -> "SimConfig":
        """Build every derived object once so bad values fail early."""
        try:
            self.cell()
            self.traffic()
            self.channel()
            self.decoder()
            self.hyper()
            self.distances()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.get("run.policy") not in POLICIES:
            raise ConfigError(
                f"run.policy must be one of {', '.join(POLICIES)}")
        if self.get("run.ttis") < 1:
            raise ConfigError("run.ttis must be >= 1")
        if self.get("scheduler.ewma_beta") <= 0 or self.get("scheduler.ewma_beta") > 1:
            raise ConfigError("scheduler.ewma_beta must lie in (0, 1]")
        return self


def default_config() -> SimConfig:
    return SimConfig(values=tuple((k, SCHEMA[k][2]) for k in SCHEMA))


def parse_config(text: str) -> SimConfig:
    mapping = {k: SCHEMA[k][2] for k in SCHEMA}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA:
            raise ConfigError(
                f"line {lineno}: unknown config key '{key}' "
                f"(domains: {', '.join(_DOMAINS)})")
        parser = SCHEMA[key][0]
        try:
            mapping[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(
                f"line {lineno}: bad value for '{key}': {exc}") from exc
    return SimConfig(values=tuple((k, mapping[k]) for k in SCHEMA))


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dumps(cfg: SimConfig) -> str:
    lines = []
    domain = None
    for key, value in cfg.values:
        d = key.split(".", 1)[0]
        if d != domain:
            if domain is not None:
                lines.append("")
            lines.append(f"# {d}")
            domain = d
        lines.append(f"{key} = {SCHEMA[key][1](value)}")
    return "\n".join(lines) + "\n"
