"""
Shared fixtures: models, a synthetic connection and a real-ODE sub-threshold candidate.
"""

import math

import numpy as np
import pytest

from src.core.dynamics import Trajectory, hamiltonian, integrate
from src.core.heteroclinic import make_candidate
from src.core.nonlinearity import build_model

SYNTHETIC_RATE = 0.5
FAST_SYNTHETIC_RATE = 1.0
SYNTHETIC_SPAN = 60.0


def make_synthetic_state(rate):
    """Exact blend of sin t e_0 into sin(2t)/2 e_1 with a tanh switch.

    Not an ODE solution; it has the limiting modes of m ≡ 1, H₀ = 1, λ = 2
    and approaches them like e^{-2 rate |t|} at both ends.
    """

    def state(t):
        t = np.asarray(t, dtype=float)
        s = 0.5 * (1.0 + np.tanh(rate * t))
        ds = 0.5 * rate / np.cosh(rate * t) ** 2
        v = (1.0 - s) * np.sin(t)
        dv = -ds * np.sin(t) + (1.0 - s) * np.cos(t)
        w = 0.5 * s * np.sin(2.0 * t)
        dw = 0.5 * ds * np.sin(2.0 * t) + s * np.cos(2.0 * t)
        return np.array([v, dv, w, dw])

    return state


def synthetic_connection(model, rate):
    """Candidate built from the synthetic blend at the given switch rate."""
    trajectory = Trajectory.from_interpolant(
        model, 2.0, make_synthetic_state(rate), -SYNTHETIC_SPAN, SYNTHETIC_SPAN,
        breakpoints=np.linspace(-SYNTHETIC_SPAN, SYNTHETIC_SPAN, 2401), reference_energy=1.0)
    return make_candidate(trajectory, H0=1.0, lam=2.0)


@pytest.fixture(scope="session")
def constant_model():
    """m ≡ 1."""
    return build_model("constant", [1.0])


@pytest.fixture(scope="session")
def affine_model():
    """m(σ) = 1 + σ."""
    return build_model("affine", [1.0, 1.0])


@pytest.fixture(scope="session")
def synthetic_candidate(constant_model):
    """Synthetic connection between the m ≡ 1 modes at H₀ = 1, λ = 2."""
    return synthetic_connection(constant_model, SYNTHETIC_RATE)


@pytest.fixture(scope="session")
def fast_synthetic_candidate(constant_model):
    """Same connection with a switch twice as sharp."""
    return synthetic_connection(constant_model, FAST_SYNTHETIC_RATE)


@pytest.fixture(scope="session")
def ode_candidate(affine_model):
    """A genuine unforced trajectory wrapped as a (sub-threshold) candidate."""
    initial = np.array([0.3, 0.1, 0.2, -0.4])
    H0 = math.sqrt(hamiltonian(affine_model, 2.0, initial))
    backward = integrate(affine_model, 2.0, initial, (0.0, -30.0))
    forward = integrate(affine_model, 2.0, initial, (0.0, 30.0))
    return make_candidate(Trajectory.join(backward, forward), H0=H0, lam=2.0)
