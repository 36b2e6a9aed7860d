from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide defaults, overridable from the environment or .env"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SUBEIG_",
        extra="ignore"
    )

    TOOL_NAME: str = "subelliptic-eigen"
    VERSION: str = "1.0.0"
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "results"

    # frames
    SPAN_TOL: float = 1e-10
    ZERO_TOL: float = 1e-12
    S_MAX: int = 4

    # metric
    STENCIL_RADIUS: int = 2
    METRIC_SPAN_TOL: float = 1e-8


settings = Settings()
