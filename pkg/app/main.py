from fastapi import FastAPI

from app.config import settings
from app.utils.logging import log_event

from app.routers.health import router as health_router
from app.routers.decompose import router as decompose_router

from app.services.pipeline_service import DecompositionService

app = FastAPI(title="Chirplet Pipeline", version="0.1")

# ----------------------------
# services singletons
# ----------------------------
decomposition_service = DecompositionService(
    omega_max=settings.OMEGA_MAX,
    n_freq=settings.N_FREQ,
)

# routers read it from request.app.state
app.state.decomposition_service = decomposition_service

# ----------------------------
# routes
# ----------------------------
app.include_router(health_router)
app.include_router(decompose_router)


@app.on_event("startup")
def on_startup():
    log_event(
        "chirplet_service_started",
        host=settings.CHIRPLET_HOST,
        port=settings.CHIRPLET_PORT,
        omega_max=settings.OMEGA_MAX,
        n_freq=settings.N_FREQ,
    )
