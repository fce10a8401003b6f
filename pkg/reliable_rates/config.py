from __future__ import annotations

from functools import lru_cache
from typing import Literal

from pydantic import Field, NonNegativeInt, PositiveFloat, PositiveInt
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime configuration for reliability assessment and CAR fitting.

    Values are loaded from ``RELRATES_*`` environment variables (or a ``.env``
    file) and may be overridden via CLI flags by the command entrypoints. The
    MCMC defaults reproduce the published protocol: 100,000 iterations, the
    first 50,000 discarded, thinned by 10.
    """

    # Worker pool for independent stratum-year chains
    workers: PositiveInt = 1

    # MCMC protocol
    iterations: PositiveInt = 100_000
    burn_in: NonNegativeInt = 50_000
    thin: PositiveInt = 10
    seed: int = Field(default=2010, ge=0, lt=2**64)
    proposal_sd: PositiveFloat = 0.5

    # Restriction and informativeness
    a0_max: PositiveFloat = 5.0
    m0: PositiveInt = 3

    # Reliability
    level: float = Field(default=0.95, gt=0.0, lt=1.0)
    prior_a: PositiveFloat = 0.5

    # Fail when the counts name regions missing from the edges file
    strict_regions: bool = False

    # Logging
    log_level: str = "INFO"
    log_format: Literal["plain", "json"] = "plain"

    # pydantic-settings v2 configuration
    model_config = SettingsConfigDict(
        env_prefix="RELRATES_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
