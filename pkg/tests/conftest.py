"""Pytest configuration and fixtures for CloudControl tests."""

import logging

import pytest

from cloudcontrol.config import reset_config
from cloudcontrol.error_handling import error_handler
from cloudcontrol.gestalt import CloudControlGame
from cloudcontrol.scenario import load_scenario
from cloudcontrol.signaling import SignalingUtilities
from cloudcontrol.vehicle import GainVector, VehicleParams


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "slow: property sweeps over many random draws")


@pytest.fixture(autouse=True)
def reset_global_state():
    """Reset the configuration singleton and handler metrics around each test."""
    reset_config()
    error_handler.clear_metrics()
    root = logging.getLogger()
    root_level = root.level
    yield
    reset_config()
    error_handler.clear_metrics()
    for handler in root.handlers[:]:
        if type(handler) is logging.StreamHandler:
            root.removeHandler(handler)
    root.setLevel(root_level)
    logging.getLogger("cloudcontrol").setLevel(logging.NOTSET)


@pytest.fixture
def fig4_utilities() -> SignalingUtilities:
    """Quadrant I for p < 0.4, Quadrant IV above (TB_H = 2 - 5p, TB_L > 0)."""
    return load_scenario("fig4-family").signaling.to_utilities()


@pytest.fixture
def quadrant_one_utilities() -> SignalingUtilities:
    return load_scenario("quadrant-one").signaling.to_utilities()


@pytest.fixture
def no_attack_utilities() -> SignalingUtilities:
    return load_scenario("no-attack").signaling.to_utilities()


@pytest.fixture
def fig4_game() -> CloudControlGame:
    return load_scenario("fig4-family").to_game()


@pytest.fixture
def quadrant_one_game() -> CloudControlGame:
    return load_scenario("quadrant-one").to_game()


@pytest.fixture
def no_attack_game() -> CloudControlGame:
    return load_scenario("no-attack").to_game()


@pytest.fixture
def unit_vehicle() -> VehicleParams:
    return VehicleParams(speed=1.0, cg_to_rear=1.0, wheelbase=1.0)


@pytest.fixture
def unit_gains() -> GainVector:
    """Places both closed-loop eigenvalues of the unit vehicle at -1."""
    return GainVector(k1=1.0, k2=1.0)
