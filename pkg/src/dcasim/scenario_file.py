"""Line-oriented scenario files.

A file is a sequence of bracketed sections holding ``key = value`` lines::

    # two FAST flows sharing a 10000 pkt/s link
    [flow]
    count = 2
    alpha = 200
    prop_delay = 0.1

    [fwd_link]
    capacity = 10000
    buffer = 1000

    [sim]
    duration = 60
    step = 0.001

``[flow]`` and ``[cross]`` may repeat; every other section appears at most
once. ``#`` starts a comment. Sweeps override keys by ``section.key`` before
the ScenarioSpec is built, so the same builder serves both paths.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from enum import Enum
from typing import Callable, Optional

from .errors import ParseError
from .model import (
    CrossTraffic,
    Discipline,
    FlowConfig,
    LinkConfig,
    LinkSide,
    Protocol,
    RedConfig,
    Remedy,
    RemedyParams,
    RenoConfig,
    ScenarioSpec,
    UNLOADED_LINK,
    validate_scenario,
)

REPEATABLE = {"flow", "cross"}
REQUIRED = ("flow", "fwd_link", "sim")

# Largest step picked by ``step = auto``.
AUTO_STEP_CAP = 0.002


@dataclass
class Section:
    name: str
    line: int
    values: dict = field(default_factory=dict)  # key -> (raw text, line)


def _number(raw: str) -> float:
    x = float(raw)
    if math.isnan(x):
        raise ValueError("nan is not a number here")
    return x


def _integer(raw: str) -> int:
    x = _number(raw)
    if x != int(x):
        raise ValueError("expected an integer")
    return int(x)


def _boolean(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _enum(kind):
    def conv(raw: str):
        try:
            return kind(raw.lower())
        except ValueError:
            choices = ", ".join(m.value for m in kind)
            raise ValueError(f"expected one of {choices}") from None

    return conv


def _remedies(raw: str) -> frozenset:
    conv = _enum(Remedy)
    return frozenset(conv(part.strip()) for part in raw.split(",") if part.strip())


def _interval(raw: str) -> Optional[float]:
    if raw.lower() in ("rtt", "per_rtt", "per-rtt"):
        return None
    return _number(raw)


@dataclass(frozen=True)
class Key:
    convert: Callable
    check: Optional[Callable] = None
    rule: str = ""


def _in(lo, hi, lo_open=False, hi_open=False) -> Key:
    def check(x):
        return (x > lo if lo_open else x >= lo) and (x < hi if hi_open else x <= hi)

    left = "(" if lo_open else "["
    right = ")" if hi_open else "]"
    return Key(_number, check, f"in {left}{lo}, {hi}{right}")


_POS = Key(_number, lambda x: x > 0, "> 0")
_NONNEG = Key(_number, lambda x: x >= 0, ">= 0")

FLOW_KEYS = {
    "count": Key(_integer, lambda x: x >= 1, ">= 1"),
    "start_spacing": _NONNEG,
    "id": Key(_integer, lambda x: x >= 0, ">= 0"),
    "protocol": Key(_enum(Protocol)),
    "alpha": _POS,
    "gamma": _in(0, 1, lo_open=True),
    "w0": Key(_number, lambda x: x >= 1, ">= 1"),
    "fwd_prop": _NONNEG,
    "bwd_prop": _NONNEG,
    "prop_delay": _POS,
    "update_interval": Key(_interval, lambda x: x is None or x > 0, "rtt or > 0"),
    "start_time": _NONNEG,
    "remedies": Key(_remedies),
    "mu": _POS,
    "vegas_alpha": _NONNEG,
    "vegas_beta": _NONNEG,
    "reverse_bottleneck": Key(_boolean),
    # remedy tuning
    "settle_tolerance": _in(0, 1, lo_open=True, hi_open=True),
    "settle_updates": Key(_integer, lambda x: x >= 1, ">= 1"),
    "pause_cap": _POS,
    "probe_burst": _POS,
    "probe_fraction": _in(0, 1, lo_open=True),
    "ee_oracle": Key(_boolean),
    "adapt_eta": _in(0, 1, lo_open=True),
    "adapt_period_rtts": _POS,
    "adapt_memory": _in(0, 1, lo_open=True),
    "alpha_min": _POS,
    "alpha_max": _POS,
}

LINK_KEYS = {
    "capacity": _POS,
    "buffer": _POS,
    "discipline": Key(_enum(Discipline)),
    "red_min_th": _NONNEG,
    "red_max_th": _POS,
    "red_avg_weight": _in(0, 1, lo_open=True),
}

SIM_KEYS = {
    "duration": _NONNEG,
    "step": Key(lambda raw: None if raw.lower() == "auto" else _number(raw), lambda x: x is None or x > 0, "auto or > 0"),
    "sample_every": _POS,
    "window_start": _NONNEG,
    "window_end": _NONNEG,
    "seed": Key(_integer, lambda x: 0 <= x < 2**64, "64-bit unsigned"),
    "ack_ratio": _in(0, 1),
    "red_random": Key(_boolean),
}

CROSS_KEYS = {
    "target": Key(_enum(LinkSide)),
    "rate": _NONNEG,
    "on": _NONNEG,
    "off": _NONNEG,
}

RENO_KEYS = {
    "kappa": _POS,
    "beta_exponent": _POS,
    "additive_increase": _POS,
    "multiplicative_decrease": _in(0, 1, lo_open=True, hi_open=True),
}

SECTIONS = {
    "flow": FLOW_KEYS,
    "fwd_link": LINK_KEYS,
    "bwd_link": LINK_KEYS,
    "sim": SIM_KEYS,
    "cross": CROSS_KEYS,
    "reno": RENO_KEYS,
}

_PARAM_KEYS = {f.name for f in fields(RemedyParams)}


def read_sections(text: str) -> list:
    """Split ``text`` into sections, checking syntax and key names only."""
    sections: list = []
    seen: set = set()
    current: Optional[Section] = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(lineno, f"unterminated section header {line!r}")
            name = line[1:-1].strip().lower()
            if name not in SECTIONS:
                raise ParseError(lineno, f"unknown section [{name}]")
            if name in seen and name not in REPEATABLE:
                raise ParseError(lineno, f"section [{name}] appears twice")
            seen.add(name)
            current = Section(name, lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise ParseError(lineno, "expected 'key = value'")
        if current is None:
            raise ParseError(lineno, "key outside of any section")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if not key or not raw:
            raise ParseError(lineno, "empty key or value")
        if key not in SECTIONS[current.name]:
            raise ParseError(lineno, f"unknown key {key!r} in [{current.name}]", code="UNKNOWN_KEY")
        if key in current.values:
            raise ParseError(lineno, f"duplicate key {key!r} in [{current.name}]")
        current.values[key] = (raw, lineno)
    for name in REQUIRED:
        if name not in seen:
            raise ParseError(None, f"section [{name}] is required", code="MISSING_SECTION")
    return sections


def _convert(section: Section) -> dict:
    table = SECTIONS[section.name]
    out = {}
    for key, (raw, lineno) in section.values.items():
        spec = table[key]
        try:
            value = spec.convert(raw)
        except ValueError as exc:
            raise ParseError(lineno, f"{key}: {exc}") from None
        if spec.check is not None and not spec.check(value):
            raise ParseError(lineno, f"{key} = {raw} must be {spec.rule}")
        out[key] = value
    return out


def _link(section: Optional[Section], default: LinkConfig) -> LinkConfig:
    if section is None:
        return default
    v = _convert(section)
    for key in ("capacity", "buffer"):
        if key not in v:
            raise ParseError(section.line, f"[{section.name}] needs {key}")
    red = None
    discipline = v.get("discipline", Discipline.DROP_TAIL)
    if discipline is Discipline.RED:
        if "red_min_th" not in v or "red_max_th" not in v:
            raise ParseError(section.line, f"[{section.name}] RED needs red_min_th and red_max_th")
        red = RedConfig(v["red_min_th"], v["red_max_th"], v.get("red_avg_weight", 0.002))
    return LinkConfig(v["capacity"], v["buffer"], discipline, red)


def _flows(sections: list) -> list:
    flows = []
    used: set = set()
    for sec in sections:
        v = _convert(sec)
        if "prop_delay" in v:
            if "fwd_prop" in v or "bwd_prop" in v:
                raise ParseError(sec.line, "prop_delay excludes fwd_prop and bwd_prop")
            v["fwd_prop"] = v["bwd_prop"] = v.pop("prop_delay") / 2.0
        if "fwd_prop" not in v or "bwd_prop" not in v:
            raise ParseError(sec.line, "[flow] needs fwd_prop and bwd_prop (or prop_delay)")
        count = v.pop("count", 1)
        spacing = v.pop("start_spacing", 0.0)
        params = {k: v.pop(k) for k in list(v) if k in _PARAM_KEYS}
        first_id = v.pop("id", None)
        start = v.pop("start_time", 0.0)
        for j in range(count):
            fid = first_id + j if first_id is not None else len(flows)
            if fid in used:
                raise ParseError(sec.line, f"flow id {fid} used twice")
            used.add(fid)
            flows.append(
                FlowConfig(
                    id=fid,
                    start_time=start + j * spacing,
                    params=RemedyParams(**params),
                    **v,
                )
            )
    return flows


def build_spec(sections: list) -> ScenarioSpec:
    """Turn checked sections into a validated ScenarioSpec."""
    by_name: dict = {}
    for sec in sections:
        by_name.setdefault(sec.name, []).append(sec)
    flows = _flows(by_name["flow"])
    fwd = _link(by_name["fwd_link"][0], UNLOADED_LINK)
    bwd = _link(by_name.get("bwd_link", [None])[0], UNLOADED_LINK)

    sim_sec = by_name["sim"][0]
    sim = _convert(sim_sec)
    for key in ("duration", "step"):
        if key not in sim:
            raise ParseError(sim_sec.line, f"[sim] needs {key}")
    step = sim["step"]
    if step is None:
        step = min(AUTO_STEP_CAP, min(f.prop_delay for f in flows) / 10.0)
    window = None
    if "window_start" in sim or "window_end" in sim:
        window = (sim.get("window_start", sim["duration"] / 2.0), sim.get("window_end", sim["duration"]))

    cross = []
    for sec in by_name.get("cross", []):
        v = _convert(sec)
        if "target" not in v or "rate" not in v:
            raise ParseError(sec.line, "[cross] needs target and rate")
        cross.append(CrossTraffic(v["target"], v["rate"], v.get("on", 0.0), v.get("off", math.inf)))

    reno = RenoConfig(**_convert(by_name["reno"][0])) if "reno" in by_name else RenoConfig()

    spec = ScenarioSpec(
        flows=tuple(flows),
        fwd_link=fwd,
        bwd_link=bwd,
        duration=sim["duration"],
        step=step,
        reno=reno,
        cross_traffic=tuple(cross),
        sample_every=sim.get("sample_every"),
        measure_window=window,
        seed=sim.get("seed", 0),
        ack_ratio=sim.get("ack_ratio", 0.05),
        red_random=sim.get("red_random", False),
    )
    return validate_scenario(spec)


def parse_scenario(text: str) -> ScenarioSpec:
    return build_spec(read_sections(text))


def override(sections: list, axis: str, raw: str) -> list:
    """Copy of ``sections`` with ``section.key`` set to ``raw`` wherever the section occurs."""
    name, _, key = axis.partition(".")
    name, key = name.lower(), key.lower()
    if name not in SECTIONS or key not in SECTIONS[name]:
        raise ParseError(None, f"unknown sweep axis {axis!r}", code="UNKNOWN_KEY")
    out = []
    hit = False
    for sec in sections:
        values = dict(sec.values)
        if sec.name == name:
            values[key] = (raw, 0)
            if key == "prop_delay":
                values.pop("fwd_prop", None)
                values.pop("bwd_prop", None)
            hit = True
        out.append(Section(sec.name, sec.line, values))
    if not hit:
        out.append(Section(name, 0, {key: (raw, 0)}))
    return out


def _canonical(obj):
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj):
        return {k: _canonical(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return sorted(_canonical(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj)
    return obj


def spec_hash(spec: ScenarioSpec) -> str:
    """SHA-256 over every ScenarioSpec field; layout and comments of the file do not count."""
    # asdict recurses into nested dataclasses but leaves enums and frozensets alone
    blob = json.dumps(_canonical(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
