"""Generator, discriminator and their configuration."""

from efgn.model.config import DiscriminatorConfig, GeneratorConfig
from efgn.model.conformer import ConformerBlock, MultiHeadAttention, TSConformer, mha_forward
from efgn.model.discriminator import Discriminator, discriminator_forward, spectral_normalize
from efgn.model.generator import (
    Enhancement,
    Generator,
    GeneratorOutput,
    apply_mask,
    generator_forward,
    param_breakdown,
    receptive_field,
)

__all__ = [
    "ConformerBlock",
    "Discriminator",
    "DiscriminatorConfig",
    "Enhancement",
    "Generator",
    "GeneratorConfig",
    "GeneratorOutput",
    "MultiHeadAttention",
    "TSConformer",
    "apply_mask",
    "discriminator_forward",
    "generator_forward",
    "mha_forward",
    "param_breakdown",
    "receptive_field",
    "spectral_normalize",
]
