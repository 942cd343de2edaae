"""Training configuration: nested dataclasses, flat dotted-key config files,
and named presets.

Config files are plain text, one `dotted.key=value` per line; `#` starts a
comment. Overrides use the same syntax and are applied after the file.
Unknown keys are hard errors.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace

from .degrade import FILTER_FAMILIES
from .dsp import StftConfig
from .losses import LossWeights
from .models.discriminators import DiscriminatorConfig
from .models.generator import GeneratorConfig, UpsamplerConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DegradeConfig:
    source_rate: int = 2000
    filter_families: tuple = FILTER_FAMILIES
    order_min: int = 2
    order_max: int = 10


@dataclass(frozen=True)
class TrainConfig:
    task: str = "bwe"  # bwe | se
    sample_rate: int = 16000
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    degrade: DegradeConfig = field(default_factory=DegradeConfig)
    segment_length: int = 8192
    batch_size: int = 16
    total_steps: int = 100000
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    lr_decay: float = 0.999  # per-epoch exponential factor
    adam_betas: tuple = (0.8, 0.99)
    seed: int = 0
    checkpoint_every: int = 1000
    validate_every: int = 1000
    log_every: int = 10
    max_validation_clips: int = 16

    def __post_init__(self):
        if self.task not in ("bwe", "se"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.segment_length % 256 != 0:
            raise ConfigError(f"segment_length must be a multiple of 256, got {self.segment_length}")
        if self.generator.sample_rate != self.sample_rate:
            # the top-level rate is authoritative; keep the generator in sync
            object.__setattr__(self, "generator", replace(self.generator, sample_rate=self.sample_rate))


def _parse_value(raw: str, current):
    raw = raw.strip()
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        elem = current[0] if current else raw
        if isinstance(elem, tuple):
            # nested tuples use ';' between groups: "1,3,5;1,3,5"
            return tuple(
                tuple(int(p) for p in group.split(",") if p.strip())
                for group in raw.split(";") if group.strip()
            )
        items = [p.strip() for p in raw.split(",") if p.strip()]
        if isinstance(elem, int) and not isinstance(elem, bool):
            return tuple(int(p) for p in items)
        if isinstance(elem, float):
            return tuple(float(p) for p in items)
        return tuple(items)
    return raw


def apply_override(cfg, key: str, raw_value: str):
    """Return a copy of cfg with the dotted key replaced by the parsed value."""
    head, _, rest = key.partition(".")
    if not dataclasses.is_dataclass(cfg) or head not in {f.name for f in dataclasses.fields(cfg)}:
        raise ConfigError(f"unknown config key: {key}")
    current = getattr(cfg, head)
    if rest:
        if not dataclasses.is_dataclass(current):
            raise ConfigError(f"unknown config key: {key}")
        try:
            new_child = apply_override(current, rest, raw_value)
        except ConfigError:
            raise ConfigError(f"unknown config key: {key}") from None
        return replace(cfg, **{head: new_child})
    if dataclasses.is_dataclass(current):
        raise ConfigError(f"key {key} names a section, not a value")
    return replace(cfg, **{head: _parse_value(raw_value, current)})


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    # merge into a flat dict first so that interdependent fields (e.g. tuple
    # pairs validated for equal length) are applied together
    flat = config_to_flat_dict(base if base is not None else TrainConfig())
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        flat[key.strip()] = value.strip()
    return config_from_flat_dict(flat)


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), base)


def config_to_flat_dict(cfg, prefix="") -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        key = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(value):
            out.update(config_to_flat_dict(value, prefix=f"{key}."))
        elif isinstance(value, tuple):
            if value and isinstance(value[0], tuple):
                out[key] = ";".join(",".join(str(x) for x in t) for t in value)
            else:
                out[key] = ",".join(str(x) for x in value)
        else:
            out[key] = str(value)
    return out


def config_from_flat_dict(flat: dict, cls=TrainConfig, _prefix=""):
    """Rebuild a config from a flat dotted-key dict in one shot.

    Unlike repeated apply_override calls, all values of a section are applied
    together, so cross-field invariants never see a half-updated state.
    """
    template = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    nested = {}
    for key, raw in flat.items():
        head, _, rest = key.partition(".")
        if head not in names:
            raise ConfigError(f"unknown config key: {_prefix}{key}")
        if rest:
            nested.setdefault(head, {})[rest] = raw
        else:
            current = getattr(template, head)
            if dataclasses.is_dataclass(current):
                raise ConfigError(f"key {_prefix}{key} names a section, not a value")
            kwargs[head] = _parse_value(raw, current)
    for head, sub in nested.items():
        child = getattr(template, head)
        if not dataclasses.is_dataclass(child):
            raise ConfigError(f"unknown config key: {_prefix}{head}.{next(iter(sub))}")
        kwargs[head] = config_from_flat_dict(sub, type(child), _prefix=f"{_prefix}{head}.")
    return cls(**kwargs)


def _tiny_generator(**kwargs) -> GeneratorConfig:
    # halved widths for desk-scale smoke runs
    return GeneratorConfig(
        spectral_unet_widths=(4, 8, 16, 32),
        upsampler=UpsamplerConfig(initial_channels=64, out_channels=4),
        wave_unet_widths=(5, 10, 20, 40),
        wave_unet_out_channels=2,
        masknet_widths=(4, 6, 12, 16),
        **kwargs,
    )


def preset(name: str) -> TrainConfig:
    """Named training setups, including the ablation variants whose upsampler
    capacity is grown to match the baseline parameter count."""
    if name == "bwe":
        return TrainConfig(task="bwe")
    if name == "se":
        return TrainConfig(task="se")
    if name == "tiny":
        return TrainConfig(
            task="bwe",
            generator=_tiny_generator(),
            batch_size=2,
            segment_length=8192,
        )
    if name == "msd_tuned":
        # single multi-scale ensemble with retuned mel weight and D learning rate
        return TrainConfig(
            discriminator=DiscriminatorConfig(kind="msd"),
            weights=LossWeights(lambda_mel=15.0),
            lr_d=1e-5,
        )
    if name == "msd_orig":
        return TrainConfig(
            discriminator=DiscriminatorConfig(kind="msd", spectral_norm_first=True)
        )
    if name == "mpd":
        return TrainConfig(discriminator=DiscriminatorConfig(kind="mpd"))
    if name == "ablation.no_spectralunet":
        return TrainConfig(
            generator=GeneratorConfig(
                use_spectral_unet=False,
                upsampler=UpsamplerConfig(initial_channels=154),
            )
        )
    if name == "ablation.no_waveunet":
        return TrainConfig(
            generator=GeneratorConfig(
                use_wave_unet=False,
                upsampler=UpsamplerConfig(initial_channels=154),
            )
        )
    if name == "ablation.no_masknet":
        return TrainConfig(
            generator=GeneratorConfig(
                use_spectral_masknet=False,
                wave_unet_out_channels=1,
                upsampler=UpsamplerConfig(initial_channels=138),
            )
        )
    if name == "ablation.vanilla_hifi":
        return TrainConfig(
            generator=GeneratorConfig(
                use_spectral_unet=False,
                use_wave_unet=False,
                use_spectral_masknet=False,
                concat_input=False,
                upsampler=UpsamplerConfig(initial_channels=256, out_channels=1),
            )
        )
    raise ConfigError(f"unknown preset {name!r}")


ABLATION_PRESETS = (
    "ablation.no_spectralunet",
    "ablation.no_waveunet",
    "ablation.no_masknet",
)
