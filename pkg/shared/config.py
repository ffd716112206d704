"""Shared configuration across services."""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Config:
    """Base configuration class."""

    # Backends
    EXACT_MAX_N: int = 200
    DEFAULT_N_MAX: int = 1_000_000
    FLOAT_RESCALE_HIGH: float = 1e280
    FLOAT_RESCALE_LOW: float = 1e-280

    # Cost guards
    ENUMERATION_MAX_N: int = 40
    BRUTEFORCE_MAX_N: int = 14
    BRUTEFORCE_MAX_R: int = 5
    RUZSA_MAX_N: int = 12

    # Sampling
    POISSON_INVERSION_MAX_LAMBDA: float = 10.0
    DEFAULT_MAX_ATTEMPTS: int = 1_000_000
    SAMPLER_CACHE_SIZE: int = 8

    # Strassen distance
    STRASSEN_TOL: float = 1e-6

    # Feller series: allowed max/min of terms over comparison-integral elements
    FELLER_MAX_SPREAD: float = 16.0

    # Output
    CSV_FLOAT_FORMAT: str = "%.12g"
    TOOL_VERSION: str = "0.1.0"


class Settings(BaseSettings):
    """Runtime settings read from the environment (or a .env file)."""

    model_config = SettingsConfigDict(env_prefix="ASSEMBLY_", env_file=".env", extra="ignore")

    threads: int = 1


def get_settings() -> Settings:
    """Load runtime settings."""
    return Settings()
