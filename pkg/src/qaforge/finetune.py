"""Training-run configuration emitted alongside the exported dataset.

Defaults mirror the fine-tuning recipe the datasets are built for: LoRA
rank/alpha/dropout, cosine schedule, 8-bit AdamW, and the decoding settings
used at evaluation time. Everything is overridable and serializes bit-stably.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import UnknownKey


@dataclass(frozen=True)
class DecodeSettings:
    max_new_tokens: int = 1024
    temperature: float = 0.7
    top_p: float = 0.95
    top_k: int = 50


@dataclass(frozen=True)
class FineTuneConfig:
    lora_rank: int = 16
    lora_alpha: int = 32
    lora_dropout: float = 0.1
    max_epochs: int = 50
    learning_rate: float = 2e-4
    schedule: str = "cosine"
    batch_size: int = 16
    gradient_accumulation: bool = True
    optimizer: str = "adamw_8bit"
    gradient_clipping: bool = True
    context_tokens: int = 2048
    decode: DecodeSettings = field(default_factory=DecodeSettings)
    early_stopping: str = "validation_loss"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def emit_finetune_config(
    overrides: Mapping[str, Any] | None = None,
    out: Path | str | None = None,
) -> FineTuneConfig:
    """Build the config with overrides applied; unknown keys are rejected.

    Decode settings override through a nested "decode" mapping or dotted
    keys like "decode.temperature".
    """
    config = FineTuneConfig()
    decode_kwargs: dict[str, Any] = {}
    top_kwargs: dict[str, Any] = {}
    top_fields = set(FineTuneConfig.__dataclass_fields__)
    decode_fields = set(DecodeSettings.__dataclass_fields__)
    for key, value in (overrides or {}).items():
        if key == "decode":
            if not isinstance(value, Mapping):
                raise UnknownKey("decode override must be a mapping")
            for dkey, dvalue in value.items():
                if dkey not in decode_fields:
                    raise UnknownKey(f"unknown decode key {dkey!r}")
                decode_kwargs[dkey] = dvalue
        elif key.startswith("decode."):
            dkey = key.split(".", 1)[1]
            if dkey not in decode_fields:
                raise UnknownKey(f"unknown decode key {dkey!r}")
            decode_kwargs[dkey] = value
        elif key in top_fields:
            top_kwargs[key] = value
        else:
            raise UnknownKey(f"unknown fine-tune key {key!r}")
    if decode_kwargs:
        top_kwargs["decode"] = replace(config.decode, **decode_kwargs)
    if top_kwargs:
        config = replace(config, **top_kwargs)
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(config.to_json())
    return config
