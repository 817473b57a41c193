"""Encoder hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

DEFAULT_COMPONENT_SIZES = (73, 13, 4, 4, 3, 3)


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and switches for the encoder stack.

    The defaults are the full-scale configuration; tests shrink input_dim,
    ffn_dim and num_layers. component_sizes fixes the six output groups and
    must sum to output_dim.
    """

    input_dim: int = 256
    num_heads: int = 4
    ffn_dim: int = 1024
    num_layers: int = 4
    depthwise_kernel: int = 31
    output_dim: int = 100
    cqt_bins: int = 252
    dropout_rate: float = 0.1
    component_sizes: tuple[int, ...] = field(default=DEFAULT_COMPONENT_SIZES)
    max_offset: int = 1000          # relative-position table half-span
    bn_momentum: float = 0.1
    eps: float = 1e-5

    def __post_init__(self):
        if sum(self.component_sizes) != self.output_dim:
            raise ValueError(
                f"component sizes {self.component_sizes} sum to "
                f"{sum(self.component_sizes)}, expected output_dim={self.output_dim}")
        if self.input_dim % self.num_heads != 0:
            raise ValueError("input_dim must be divisible by num_heads")
        if self.depthwise_kernel % 2 != 1:
            raise ValueError("depthwise_kernel must be odd")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.max_offset < 1:
            raise ValueError("max_offset must be at least 1")

    @property
    def head_dim(self) -> int:
        return self.input_dim // self.num_heads

    def to_dict(self) -> dict:
        d = asdict(self)
        d["component_sizes"] = list(self.component_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["component_sizes"] = tuple(d["component_sizes"])
        return cls(**d)
