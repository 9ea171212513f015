"""Run specifications, stats records and their file formats."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..channel import ChannelConfig, EveStrategy, SourceConfig
from ..qkd.config import PROTOCOLS, ProtocolConfig

RUN_PROTOCOLS = PROTOCOLS + ("commit-demo",)
FORMATS = ("json", "csv")

# fixed column order for JSON objects and CSV rows
STATS_COLUMNS = (
    "protocol",
    "role",
    "seed",
    "n_pulses",
    "mu",
    "survive_prob",
    "flip_x_prob",
    "flip_z_prob",
    "eve",
    "sample_fraction",
    "abort_threshold",
    "pa_safety",
    "ec_passes",
    "n_detected",
    "sifted_len",
    "qber_est",
    "qber_true",
    "aborted",
    "ec_leak_bits",
    "final_len",
    "eve_accuracy",
    "chsh",
    "verdict",
)


class SpecError(ValueError):
    """Invalid run specification; the message names the offending field path."""

    def __init__(self, path: str, problem: str):
        super().__init__(f"{path}: {problem}")
        self.path = path


@dataclass
class CommitDemo:
    photons: int = 20
    cheat: str = "epr"  # none | classical | epr
    trials: int = 20


@dataclass
class RunSpec:
    protocol: str = "bb84"
    config: ProtocolConfig = field(default_factory=ProtocolConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    eve: EveStrategy = field(default_factory=EveStrategy.none)
    seed: int | None = None
    out: str | None = None
    format: str = "json"
    commit: CommitDemo = field(default_factory=CommitDemo)

    def validate(self) -> "RunSpec":
        if self.protocol not in RUN_PROTOCOLS:
            raise SpecError("protocol", f"must be one of {', '.join(RUN_PROTOCOLS)}, got {self.protocol!r}")
        if self.seed is None:
            raise SpecError("seed", "required (runs are never seeded from the clock)")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise SpecError("seed", "must be a 64-bit unsigned integer")
        if self.format not in FORMATS:
            raise SpecError("format", f"must be json or csv, got {self.format!r}")
        if self.protocol == "epr" and not self.source.ideal:
            raise SpecError("source.mu", "the EPR source emits exactly one pair per pulse")
        if self.commit.cheat not in ("none", "classical", "epr"):
            raise SpecError("commit.cheat", "must be none, classical or epr")
        if self.commit.photons < 1:
            raise SpecError("commit.photons", "must be >= 1")
        if self.commit.trials < 1:
            raise SpecError("commit.trials", "must be >= 1")
        return self

    def with_param(self, name: str, value) -> "RunSpec":
        """Copy with one sweepable parameter replaced."""
        if name == "noise":
            return replace(self, channel=replace(self.channel, flip_x_prob=float(value), flip_z_prob=float(value)))
        if name == "mu":
            return replace(self, source=SourceConfig(float(value)))
        if name == "t":
            return replace(self, channel=replace(self.channel, survive_prob=float(value)))
        if name == "threshold":
            return replace(self, config=replace(self.config, abort_threshold=float(value)))
        if name == "n_pulses":
            return replace(self, config=replace(self.config, n_pulses=int(value)))
        raise SpecError("parameter", f"{name!r} is not sweepable (noise, mu, t, threshold, n_pulses)")


SWEEPABLE = ("noise", "mu", "t", "threshold", "n_pulses")


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise SpecError(path, "must be an object")
    names = {f.name for f in fields(cls)}
    for k in data:
        if k not in names:
            raise SpecError(f"{path}.{k}", "unknown field")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise SpecError(path, str(exc)) from exc


def spec_from_dict(data: dict) -> RunSpec:
    """Build a RunSpec from the JSON config-file layout (field names mirror RunSpec)."""
    spec = RunSpec()
    for k, v in data.items():
        if k == "config":
            spec.config = _build(ProtocolConfig, v, "config")
        elif k == "source":
            spec.source = _build(SourceConfig, v, "source")
        elif k == "channel":
            spec.channel = _build(ChannelConfig, v, "channel")
        elif k == "commit":
            spec.commit = _build(CommitDemo, v, "commit")
        elif k == "eve":
            try:
                spec.eve = EveStrategy.parse(v)
            except (ValueError, AttributeError) as exc:
                raise SpecError("eve", str(exc)) from exc
        elif k in ("protocol", "seed", "out", "format"):
            setattr(spec, k, v)
        else:
            raise SpecError(k, "unknown field")
    return spec


def load_spec(path: str | Path) -> RunSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError("config", f"not valid JSON: {exc}") from exc
    return spec_from_dict(data)


def stats_record(spec: RunSpec, stats: dict, role: str = "session") -> dict:
    """Flat record in STATS_COLUMNS order."""
    rec = {
        "protocol": spec.protocol,
        "role": role,
        "seed": spec.seed,
        "n_pulses": spec.config.n_pulses,
        "mu": spec.source.mu,
        "survive_prob": spec.channel.survive_prob,
        "flip_x_prob": spec.channel.flip_x_prob,
        "flip_z_prob": spec.channel.flip_z_prob,
        "eve": str(spec.eve),
        "sample_fraction": spec.config.sample_fraction,
        "abort_threshold": spec.config.abort_threshold,
        "pa_safety": spec.config.pa_safety,
        "ec_passes": spec.config.ec_passes,
    }
    for col in STATS_COLUMNS:
        if col not in rec:
            rec[col] = stats.get(col)
    if rec["verdict"] is None and stats.get("qber_est") is not None:
        rec["verdict"] = "abort" if stats["qber_est"] > spec.config.abort_threshold else "proceed"
    return rec


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v) if not isinstance(v, float) else repr(v)


def to_csv(records: list[dict], columns=STATS_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def to_json(record: dict) -> str:
    return json.dumps(record) + "\n"


def render(records: list[dict], fmt: str) -> str:
    if fmt == "csv":
        return to_csv(records)
    return "".join(to_json(r) for r in records)


def key_paths(out: str | None) -> tuple[Path, Path] | None:
    if not out:
        return None
    stem = Path(out)
    stem = stem.with_suffix("") if stem.suffix in (".json", ".csv") else stem
    return Path(f"{stem}.alice.key"), Path(f"{stem}.bob.key")


def write_key(path: Path, hexkey: str) -> None:
    path.write_text(hexkey + "\n")
