from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="USERDP_", extra="ignore"
    )

    log_dir: str = Field(default="logs")
    log_level: str = Field(default="INFO")
    log_to_file: bool = Field(default=True)
    output_dir: str = Field(default="results")

    seed: int = Field(default=0)

    # constants the analysis only fixes up to O(.)
    truncation_constant: float = Field(default=3.0, gt=0)
    noise_constant: float = Field(default=6.0, ge=0)
    batch_constant: float = Field(default=100.0, gt=0)
    tau_constant: float = Field(default=1.0, gt=0)

    trim_fraction: float = Field(default=0.25, ge=0, lt=0.5)
    epsilon_warning: float = Field(default=2.0, gt=0)

    # None calibrates the sample spread to the default tau
    quadratic_noise_std: Optional[float] = Field(default=None, ge=0)
    quadratic_beta: float = Field(default=1.0, gt=0)

    insecure_debug: bool = Field(default=False)
    certify_scale: float = Field(default=1.0, gt=0)
