import os
import sys

import pytest

# Add the project root directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from fbm_gen import clear_cache  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_factor_cache():
    """Every test starts without cached Cholesky factors or circulant spectra"""
    clear_cache()
    yield
    clear_cache()
