from fastapi import APIRouter
from datetime import datetime, timezone

from app.config import settings

router = APIRouter(prefix="/chirplet/v1", tags=["health"])


@router.get("/health")
def health():
    return {
        "ok": True,
        "time": datetime.now(timezone.utc).isoformat(),
        "omegaMax": settings.OMEGA_MAX,
        "nFreq": settings.N_FREQ,
    }
