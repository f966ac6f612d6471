"""
Runtime settings for the lab.
Values come from the environment (optionally a .env file) with DLAB_ prefixed overrides.
"""

import os
import logging
from dataclasses import dataclass, asdict, replace
from typing import Dict, Any

from dotenv import load_dotenv

from src.services.errors import ConfigError

load_dotenv()

VERSION = '1.0.0'

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f'{name} must be an integer, got {raw!r}')


@dataclass
class Settings:
    prec: int = 128
    seed: int = 0
    threads: int = 1
    log_level: str = 'INFO'
    out_dir: str = 'runs'
    enum_budget: int = 2_000_000
    alive_samples: int = 9
    subset_budget: int = 50_000

    @classmethod
    def from_env(cls) -> 'Settings':
        settings = cls(
            prec=_env_int('DLAB_PREC', cls.prec),
            seed=_env_int('DLAB_SEED', cls.seed),
            threads=_env_int('DLAB_THREADS', cls.threads),
            log_level=os.environ.get('DLAB_LOG_LEVEL', cls.log_level).upper(),
            out_dir=os.environ.get('DLAB_OUT', cls.out_dir),
            enum_budget=_env_int('DLAB_ENUM_BUDGET', cls.enum_budget),
            alive_samples=_env_int('DLAB_ALIVE_SAMPLES', cls.alive_samples),
            subset_budget=_env_int('DLAB_SUBSET_BUDGET', cls.subset_budget),
        )
        settings.validate()
        return settings

    def validate(self):
        if self.prec < 53:
            raise ConfigError('precision must be at least 53 bits', prec=self.prec)
        if self.threads < 1:
            raise ConfigError('threads must be positive', threads=self.threads)
        if self.enum_budget < 1:
            raise ConfigError('enumeration budget must be positive', enum_budget=self.enum_budget)
        if self.alive_samples < 1:
            raise ConfigError('alive sample count must be positive', alive_samples=self.alive_samples)
        if self.subset_budget < 1:
            raise ConfigError('subset budget must be positive', subset_budget=self.subset_budget)
        if self.log_level not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            raise ConfigError(f'unknown log level {self.log_level!r}')

    def update(self, **overrides) -> 'Settings':
        """Apply non-None overrides in place so every service sees them; invalid overrides leave nothing changed"""
        candidate = replace(self, **{key: value for key, value in overrides.items() if value is not None})
        candidate.validate()
        for key, value in asdict(candidate).items():
            setattr(self, key, value)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def configure_logging(level: str = 'INFO'):
    """Configure the root logger once; repeated calls only adjust the level"""
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level, format=LOG_FORMAT)
    root.setLevel(level)


settings = Settings.from_env()
