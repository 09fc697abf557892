# tests/conftest.py
import sys
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

# =========================================================
# make the project root importable when pytest runs from anywhere
# =========================================================
# this file: .../chirplet-pipeline/tests/conftest.py
PROJECT_ROOT = Path(__file__).resolve().parent.parent

if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from app.main import app
from app.services.generators import academic_amplitude, lolo_amplitude
from app.utils.grids import frequency_grid


@pytest.fixture()
def client():
    """
    FastAPI TestClient fixture
    """
    return TestClient(app)


@pytest.fixture()
def academic_grid():
    """(omega, A) of the academic amplitude on p = -512..512 over [-2, 2]"""
    omega = frequency_grid(2.0, 512)
    return omega, academic_amplitude(omega)


@pytest.fixture()
def lolo_grid():
    """(omega, A) of the lolo amplitude on p = -256..256 over [-4, 4]"""
    omega = frequency_grid(4.0, 256)
    return omega, lolo_amplitude(omega)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240611)
