from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", env_prefix="PROSUMER_QAOA_")

    APP_NAME: str = "Prosumer QAOA"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Overrides the base seed of experiment specs (PROSUMER_QAOA_SEED)
    SEED: int | None = None

    # Size limits
    EXHAUSTIVE_LIMIT_BITS: int = 24  # Enumeration and brute-force diagonal
    STATEVECTOR_QUBIT_LIMIT: int = 24

    # Run defaults
    DEFAULT_SHOTS: int = 4096
    DEFAULT_RESTARTS: int = 5
    DEFAULT_RUNS: int = 20  # Runs per experiment cell

    # Optimizer settings
    MAX_EVALUATIONS_PER_REP: int = 1000  # Nelder-Mead budget is this times reps
    OPTIMIZER_TOLERANCE: float = 1e-6

    NORM_TOLERANCE: float = 1e-10  # Allowed drift of |psi| from 1 before sampling warns


@lru_cache
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
