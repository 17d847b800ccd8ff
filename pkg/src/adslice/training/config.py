"""Training hyperparameters."""
from dataclasses import asdict, dataclass, fields

from ..network.optim import DEFAULT_EPS, DEFAULT_RHO

WEIGHTING_MODES = ("none", "inverse_frequency")


def _bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 70
    batch_size: int = 100
    lr: float = 1e-4
    rho: float = DEFAULT_RHO
    eps: float = DEFAULT_EPS
    class_weighting: str = "none"
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.class_weighting not in WEIGHTING_MODES:
            raise ValueError(f"class_weighting must be one of {WEIGHTING_MODES}, got {self.class_weighting!r}")

    @classmethod
    def from_mapping(cls, m):
        """Build from string values (config files, CLI); unknown keys are ignored."""
        casts = {"epochs": int, "batch_size": int, "lr": float, "rho": float, "eps": float,
                 "class_weighting": str, "seed": int, "deterministic": _bool}
        names = {f.name for f in fields(cls)}
        return cls(**{k: casts[k](v) for k, v in m.items() if k in names and v is not None})

    def as_dict(self):
        return asdict(self)
