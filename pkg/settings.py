import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
TOOL_VERSION = "1.0.0"

ENV_KEYS = {
    'threads': 'EVOLV_THREADS',
    'seed': 'EVOLV_SEED',
    'log_level': 'EVOLV_LOG_LEVEL',
    'depth': 'EVOLV_DEPTH',
    'budget': 'EVOLV_BUDGET',
}


class Settings(BaseModel):
    """Process-wide defaults; CLI flags override them."""

    model_config = ConfigDict(frozen=True)

    threads: int = 1
    seed: int = 0
    log_level: str = "WARNING"
    depth: int = 8
    budget: int = 20000

    @field_validator('threads')
    @classmethod
    def threads_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("threads must be at least 1")
        return value

    @field_validator('log_level')
    @classmethod
    def known_level(cls, value: str) -> str:
        value = value.upper()
        if value not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            raise ValueError(f"unknown log level {value}")
        return value

    @field_validator('depth')
    @classmethod
    def depth_range(cls, value: int) -> int:
        if not 1 <= value <= 32:
            raise ValueError("depth must be between 1 and 32")
        return value

    @field_validator('budget')
    @classmethod
    def budget_positive(cls, value: int) -> int:
        if value < 100:
            raise ValueError("budget must be at least 100 evaluations")
        return value


def load_settings(environ: Optional[dict] = None) -> Settings:
    """
    Build Settings from the environment (after .env has been loaded).

    Args:
        environ: mapping to read instead of os.environ (tests)

    Returns:
        Validated Settings instance
    """
    environ = os.environ if environ is None else environ
    values = {}
    for field, key in ENV_KEYS.items():
        raw = environ.get(key)
        if raw is not None and raw != "":
            values[field] = raw

    try:
        return Settings(**values)
    except ValidationError as e:
        bad = [ENV_KEYS[str(err['loc'][0])] for err in e.errors()]
        logger.error(f"Invalid environment configuration: {bad}")
        raise ValueError(f"Invalid value in environment variable(s): {', '.join(bad)}") from e


def configure_logging(level: str = "WARNING") -> None:
    """Configure root logging for the command-line entry point (stderr only)."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING), format=LOG_FORMAT)
