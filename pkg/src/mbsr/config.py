"""Flat key-value run configuration with dotted section keys.

Files are plain text: one ``section.key = value`` per line, ``#`` comments.
Environment variables override file values: ``MBSR_TRAIN__MAX_ITERS=500``
sets ``train.max_iters`` (prefix ``MBSR_``, double underscore for the dot,
case-insensitive).  Values stay strings until a typed getter reads them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .dataset import SplitSpec
from .network import SrModelConfig
from .synthetic import CompoundSpec, SynthSpec
from .training import TrainConfig

ENV_PREFIX = "MBSR_"


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def apply_env_overrides(cfg: dict[str, str], environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = dict(cfg)
    for name, value in environ.items():
        if not name.upper().startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower().replace("__", ".")
        out[key] = value
    return out


def load_config(path, environ=None) -> "RunConfig":
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig(apply_env_overrides(cfg, environ))


@dataclass
class RunConfig:
    values: dict[str, str] = field(default_factory=dict)

    def get(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is None:
            raise ConfigError(f"missing required config key {key!r}")
        return default

    def get_int(self, key: str, default: int | None = None) -> int:
        raw = self.get(key, None if default is None else str(default))
        try:
            return int(float(raw)) if "e" in raw.lower() or "." in raw else int(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected integer, got {raw!r}") from exc

    def get_float(self, key: str, default: float | None = None) -> float:
        raw = self.get(key, None if default is None else repr(default))
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected number, got {raw!r}") from exc

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self.get(key, str(default)).strip().lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key!r}: expected boolean, got {raw!r}")

    def get_list(self, key: str, default: str = "") -> list[str]:
        raw = self.get(key, default)
        return [part.strip() for part in raw.split(",") if part.strip()]

    # ------------------------------------------------------------------
    # Section builders

    def split_spec(self) -> SplitSpec:
        return SplitSpec(seed=self.get_int("split.seed", 0))

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr_max=self.get_float("train.lr_max", 1e-4),
            lr_min=self.get_float("train.lr_min", 1e-7),
            max_iters=self.get_int("train.max_iters", 300_000),
            val_every=self.get_int("train.val_every", 1000),
            patience=self.get_int("train.patience", 10),
            batch_size=self.get_int("train.batch_size", 16),
            seed=self.get_int("train.seed", 0),
        )

    def model_config(self, in_channels: int) -> SrModelConfig:
        return SrModelConfig(
            in_channels=in_channels,
            features=self.get_int("model.features", 32),
            blocks=self.get_int("model.blocks", 5),
            attention_reduction=self.get_int("model.reduction", 8),
            dtype=self.get("model.dtype", "float32"),
        )

    def synth_spec(self) -> SynthSpec:
        compounds = []
        raw = self.get("synth.compounds")
        for part in raw.split(";"):
            part = part.strip()
            if not part:
                continue
            fields = part.split(":")
            if len(fields) != 4:
                raise ConfigError(
                    f"synth.compounds entry {part!r}: expected tag:rho:sparsity_q:gamma"
                )
            try:
                compounds.append(CompoundSpec(
                    tag=fields[0].strip(),
                    rho=float(fields[1]),
                    sparsity_q=float(fields[2]),
                    gamma=float(fields[3]),
                ))
            except ValueError as exc:
                raise ConfigError(f"synth.compounds entry {part!r}: {exc}") from exc
        if not compounds:
            raise ConfigError("synth.compounds is empty")
        try:
            return SynthSpec(
                rows=self.get_int("synth.rows", 256),
                cols=self.get_int("synth.cols", 256),
                compounds=tuple(compounds),
                correlation_length=self.get_float("synth.correlation_length", 6.0),
                seed_shared=self.get_int("synth.seed_shared", 0),
                seed_compounds=self.get_int("synth.seed_compounds", 1),
                mode=self.get("synth.mode", "independent"),
                hf_sigma=self.get_float("synth.hf_sigma", 2.0),
                n_dates=self.get_int("synth.n_dates", 1),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
