"""Shared fixtures: the calibrated S&P-500 parameter set used throughout."""

import pytest

from three_halves.model import JumpParams, ModelParams


@pytest.fixture(scope="session")
def snp_params() -> ModelParams:
    """Default calibrated parameter set (kappa=22.84, theta=4.979, ...)."""
    return ModelParams.with_constant_theta(
        kappa=22.84,
        theta=4.979,
        epsilon=8.56,
        v0=0.060025,
        rho=-0.99,
        s0=100.0,
        r=0.015,
        q=0.0,
    )


@pytest.fixture(scope="session")
def timer_params() -> ModelParams:
    """Timer-option study variant: rho=-0.5, V0=0.087, otherwise default."""
    return ModelParams.with_constant_theta(
        kappa=22.84,
        theta=4.979,
        epsilon=8.56,
        v0=0.087,
        rho=-0.5,
        s0=100.0,
        r=0.015,
        q=0.0,
    )


@pytest.fixture(scope="session")
def jump_params() -> ModelParams:
    return ModelParams.with_constant_theta(
        kappa=22.84,
        theta=4.979,
        epsilon=8.56,
        v0=0.060025,
        rho=-0.99,
        s0=100.0,
        r=0.015,
        q=0.0,
        jumps=JumpParams(lam=0.5, mu=-0.1, sigma=0.2),
    )
