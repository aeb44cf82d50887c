from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
import logging


class Settings(BaseSettings):
    # Search key buffer (1000 entries matches the on-chip buffer)
    max_batch: int = 1000

    # Tree construction
    default_order: int = 16
    default_seed: int = 7
    wide_keys: bool = False

    # Benchmark harness
    bench_repeats: int = 10

    # Thread pool used by partitioned search and the threaded baseline
    partition_workers: int = 4

    # Artifacts
    artifact_dir: str = "."
    tree_path: str = ""  # tree served by the HTTP API

    # API
    api_host: str = "0.0.0.0"
    api_port: int = 8000
    debug: bool = False

    # Logging
    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="BATCHSEARCH_",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache()
def get_settings():
    return Settings()


settings = get_settings()


def setup_logging(level: str = None):
    """Configure the root logger once for command-line runs"""
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
