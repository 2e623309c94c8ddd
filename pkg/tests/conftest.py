import math
import os
import sys

import numpy as np
import pytest

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from poly_core import parse_operator  # noqa: E402

# name -> (text, n, classification, omega0)
CORPUS = {
    'heat': ("d0 - d1^2", 1, 'bounded', 0.0),
    'backward_heat': ("d0 + d1^2", 1, 'unbounded', math.inf),
    'wave': ("d0^2 - d1^2", 1, 'bounded', 0.0),
    'schrodinger': ("d0 - i*d1^2", 1, 'bounded', 0.0),
    'shifted': ("d0 - 3", 1, 'bounded', 3.0),
    'shifted_schrodinger': ("d0 - i*d1^2 - 1", 1, 'bounded', 1.0),
    'transport': ("d0 + d1", 1, 'bounded', 0.0),
    'degenerate': ("d1*d0 + 1", 1, 'bounded', 0.0),
    'pure_space': ("d1", 1, 'unbounded', math.inf),
    'hormander': ("d0 - i*(d1+1)^2", 1, 'unbounded', math.inf),
    'cubic': ("d0^2 - d1^3", 1, 'unbounded', math.inf),
    'constant': ("1", 1, 'bounded', -math.inf),
}


@pytest.fixture(scope="session")
def corpus():
    """Regression operators with their known verdicts"""
    return CORPUS


@pytest.fixture(scope="session")
def symbols():
    """Parsed corpus symbols keyed by name"""
    return {name: parse_operator(text, n) for name, (text, n, _, _) in CORPUS.items()}


@pytest.fixture
def rng():
    """Seeded generator so random oracles stay reproducible"""
    return np.random.default_rng(0)


@pytest.fixture
def clean_env(monkeypatch):
    """Remove EVOLV_* variables inherited from the shell"""
    for key in list(os.environ):
        if key.startswith('EVOLV_'):
            monkeypatch.delenv(key, raising=False)
    yield
