import numpy as np
import pytest

from fbgrail.fiber import ConstantCurvatureField, FiberSpec, NoiseModel, simulate_sequence, simulate_wavelengths

RADII = (30.0, 50.0, 70.0, 90.0, 110.0)
SILENT = NoiseModel()


@pytest.fixture
def fiber():
    return FiberSpec()


def groove_frames(fiber, radius, noise=SILENT, n_frames=30, phi=0.0):
    pos = fiber.grating_positions()
    kappa = 0.0 if radius is None else 1.0 / radius
    return simulate_sequence(fiber, ConstantCurvatureField(kappa, phi).sample(pos), noise, n_frames)


def groove_array(fiber, radius, noise=SILENT, n_frames=30, phi=0.0):
    pos = fiber.grating_positions()
    return simulate_wavelengths(fiber, ConstantCurvatureField(1.0 / radius, phi).sample(pos), noise, n_frames)


def straight_reference(fiber):
    return np.repeat(np.array(fiber.base_wavelengths)[:, None], fiber.total_core_count, axis=1)
