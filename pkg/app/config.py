from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    # read from .env; unknown keys in .env are ignored
    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    CHIRPLET_HOST: str = "0.0.0.0"
    CHIRPLET_PORT: int = 9010

    # default artifact directory for CLI runs and the HTTP service
    OUTPUT_DIR: str = Field(
        default="out",
        validation_alias="OUTPUT_DIR",
    )

    # spectrum grid: omega_p = p * OMEGA_MAX / N_FREQ, p = -N..N
    OMEGA_MAX: float = Field(default=4.0, gt=0)
    N_FREQ: int = Field(default=512, ge=2)

    PHASE_FLOOR_RATIO: float = 1e-6
    BOUNDARY_TOL_RATIO: float = 1e-3

    # extrema detection
    PROMINENCE_RATIO: float = 1e-3
    DEGENERATE_CURVATURE_RATIO: float = 1e-9

    WIDTH_FLOOR: float = 1e-8

    # pointwise selection
    POINTWISE_TOL: float = 1e-9
    POINTWISE_MAX_ITER: int = 200
    POINTWISE_GUARD_LIMIT: int = 10

    # L2 steepest ascent
    L2_MAX_ITER: int = 5000
    L2_GRAD_TOL: float = 1e-6
    # initial step in the natural metric, dimensionless
    L2_STEP_SCALE: float = 0.1
    L2_STEP_GROWTH: float = 1.2
    L2_MAX_REJECTIONS: int = 20

    # hierarchy
    HIERARCHY_MAX_LEVELS: int = 8
    HIERARCHY_PAD_FACTOR: float = Field(default=4.0, ge=1.0)
    L2_EPS_RATIO: float = 1e-4
    POINTWISE_EPS_RATIO: float = 1e-3
    # extrema below this fraction of the level peak are left unfitted; 0 keeps all
    NOISE_FLOOR_RATIO: float = Field(default=0.0, ge=0.0, lt=1.0)


settings = Settings()
