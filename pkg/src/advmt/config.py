"""Plain-text ``key = value`` configuration for training runs."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TaskConfig:
    name: str
    corpus_path: str
    min_frequency: int


@dataclass
class Config:
    d_e: int = 128
    d_h: int = 256
    d_m2: int = 50
    learning_rate: float = 0.001
    # the paper is silent on the discriminator's optimizer; a faster rate
    # keeps it competitive with the shared encoder (None -> 10x learning_rate)
    disc_learning_rate: float | None = None
    batch_size: int = 128
    margin: float = 0.5
    max_steps: int = 2000
    eval_interval: int = 200
    seed: int = 0
    adversarial: bool = True
    resample_negatives: bool = True
    tasks: list[TaskConfig] = field(default_factory=list)

    @property
    def effective_disc_learning_rate(self) -> float:
        if self.disc_learning_rate is not None:
            return self.disc_learning_rate
        return 10.0 * self.learning_rate

    def validate(self):
        for key in ("d_e", "d_h", "d_m2", "batch_size", "max_steps", "eval_interval"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.disc_learning_rate is not None and self.disc_learning_rate <= 0:
            raise ConfigError(
                f"disc_learning_rate must be positive, got {self.disc_learning_rate}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be positive, got {self.margin}")
        if self.eval_interval > self.max_steps:
            raise ConfigError(
                f"eval_interval ({self.eval_interval}) must not exceed "
                f"max_steps ({self.max_steps})")
        if not self.tasks:
            raise ConfigError("at least one task is required")
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate task names: {names}")
        for t in self.tasks:
            if t.min_frequency < 1:
                raise ConfigError(
                    f"task {t.name}: min_frequency must be >= 1, got {t.min_frequency}")

    def to_dict(self) -> dict:
        return {
            "d_e": self.d_e, "d_h": self.d_h, "d_m2": self.d_m2,
            "learning_rate": self.learning_rate,
            "disc_learning_rate": self.disc_learning_rate,
            "batch_size": self.batch_size,
            "margin": self.margin, "max_steps": self.max_steps,
            "eval_interval": self.eval_interval, "seed": self.seed,
            "adversarial": self.adversarial,
            "resample_negatives": self.resample_negatives,
            "tasks": [
                {"name": t.name, "corpus_path": t.corpus_path,
                 "min_frequency": t.min_frequency}
                for t in self.tasks
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "Config":
        tasks = [TaskConfig(t["name"], t["corpus_path"], int(t["min_frequency"]))
                 for t in d.get("tasks", [])]
        cfg = Config(
            d_e=int(d["d_e"]), d_h=int(d["d_h"]), d_m2=int(d["d_m2"]),
            learning_rate=float(d["learning_rate"]),
            disc_learning_rate=(None if d.get("disc_learning_rate") is None
                                else float(d["disc_learning_rate"])),
            batch_size=int(d["batch_size"]), margin=float(d["margin"]),
            max_steps=int(d["max_steps"]), eval_interval=int(d["eval_interval"]),
            seed=int(d["seed"]), adversarial=bool(d["adversarial"]),
            resample_negatives=bool(d["resample_negatives"]), tasks=tasks,
        )
        return cfg


_INT_KEYS = {"d_e", "d_h", "d_m2", "batch_size", "max_steps", "eval_interval", "seed"}
_FLOAT_KEYS = {"learning_rate", "disc_learning_rate", "margin"}
_BOOL_KEYS = {"adversarial", "resample_negatives"}


def _parse_bool(key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def parse_config(path) -> Config:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    The ``task`` key may repeat; its value is ``name,corpus_path,min_frequency``.
    """
    cfg = Config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key == "task":
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 3:
                raise ConfigError(
                    f"{path}:{lineno}: task expects 'name,corpus_path,min_frequency'")
            try:
                cfg.tasks.append(TaskConfig(parts[0], parts[1], int(parts[2])))
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: bad min_frequency: {e}") from e
        elif key in _INT_KEYS:
            try:
                setattr(cfg, key, int(raw))
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: {key}: {e}") from e
        elif key in _FLOAT_KEYS:
            try:
                setattr(cfg, key, float(raw))
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: {key}: {e}") from e
        elif key in _BOOL_KEYS:
            setattr(cfg, key, _parse_bool(key, raw))
        else:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
    cfg.validate()
    return cfg
