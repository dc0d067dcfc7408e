import pytest

from spdc.crystal_optics import (
    CrystalConfig, group_delay_mismatch, gvd, solve_collinear_pm_angle
)
from spdc.spectral_model import DetuningGrid, build_type1, build_type2

PUMP_NM = 351.1
DEGENERATE_NM = 702.2


@pytest.fixture(scope="session")
def crystal() -> CrystalConfig:
    return CrystalConfig.bbo()


@pytest.fixture(scope="session")
def theta_type2(crystal) -> float:
    return solve_collinear_pm_angle(PUMP_NM, DEGENERATE_NM, "II", crystal)


@pytest.fixture(scope="session")
def D(crystal, theta_type2) -> float:
    return group_delay_mismatch(crystal, DEGENERATE_NM, theta_type2)


@pytest.fixture(scope="session")
def Dpp(crystal) -> float:
    return float(gvd(crystal, DEGENERATE_NM, "o"))


@pytest.fixture(scope="session")
def type2(crystal, D):
    grid = DetuningGrid.for_type2(D, crystal.length_um, 64, 4096)
    return build_type2(D, crystal.length_um, grid)


@pytest.fixture(scope="session")
def type1(crystal, Dpp):
    grid = DetuningGrid.for_type1(Dpp, crystal.length_um, 8, 8192)
    return build_type1(Dpp, crystal.length_um, grid)
