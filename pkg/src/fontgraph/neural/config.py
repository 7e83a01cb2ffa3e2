"""Model hyperparameters shared by every learned component."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class ModelConfig:
    s_fonts: int
    c_glyphs: int = 26
    m_points: int = 200
    n_nodes: int = 150
    point_dim: int = 4
    latent_dim: int = 128
    d_model: int = 256
    image_size: int = 128
    w_cls: float = 1.0
    w_rec: float = 1.0
    w_adj: float = 1.0
    w_img: float = 1.0
    adjacency_loss: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        if self.s_fonts < 1:
            raise ValueError("need at least one font")
        if self.m_points < self.n_nodes:
            raise ValueError(
                f"m_points {self.m_points} must be >= n_nodes {self.n_nodes}"
            )
        if self.image_size % 32 != 0:
            raise ValueError("image_size must survive five stride-2 halvings")
        for name in ("latent_dim", "d_model"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(obj: dict) -> "ModelConfig":
        return ModelConfig(**obj)
