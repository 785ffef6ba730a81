import logging
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import ValidationError

VERSION = "1.0.0"

logger = logging.getLogger(__name__)

class Settings(BaseSettings):
    # Reproducibility
    SEED: int = 20140617
    TRIALS: int = 20000
    THREADS: int = 1
    BATCH_SIZE: int = 2048  # trials per RNG substream

    # Output
    OUTPUT_DIR: str = "results"
    LOG_LEVEL: str = "INFO"

    # Numerics
    QUAD_EPSABS: float = 1e-10
    QUAD_EPSREL: float = 1e-8
    QUAD_LIMIT: int = 200
    TAU_CAP: int = 1024
    SIGNIFICANCE_RATIO: float = 1e6

    model_config = SettingsConfigDict(
        env_prefix="D2D_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )

def configure_logging(level: str = None):
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s [%(levelname)s] [%(name)s] %(message)s",
    )

try:
    settings = Settings()
except ValidationError as e:
    logger.error(f"Configuration Error: {e}")
    raise
