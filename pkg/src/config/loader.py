import logging
import yaml
from pydantic import ValidationError
from src.config.settings import AppConfig
from src.errors import ConfigError

logger = logging.getLogger(__name__)


def load_config(path: str) -> AppConfig:
    """Reads a JSON (or YAML) run configuration and validates it"""
    try:
        with open(path, 'r', encoding="utf-8") as f:
            config_dict = yaml.safe_load(f) or {}
        return AppConfig(**config_dict)
    except (OSError, yaml.YAMLError, ValidationError, TypeError) as e:
        logger.error("Failed to load configuration: %s", e)
        raise ConfigError(f"Invalid configuration {path}: {e}") from e
