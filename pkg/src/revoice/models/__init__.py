from .generator import Generator, GeneratorConfig
from .discriminators import (
    DiscriminatorConfig,
    DiscriminatorOutput,
    ScaleDiscriminator,
    DiscriminatorEnsemble,
    build_discriminators,
)

__all__ = [
    "Generator",
    "GeneratorConfig",
    "DiscriminatorConfig",
    "DiscriminatorOutput",
    "ScaleDiscriminator",
    "DiscriminatorEnsemble",
    "build_discriminators",
]
