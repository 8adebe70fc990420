import numpy as np
import pytest

from fchsim.spectral import SpectralGrid, VectorField, to_spectral


def random_field(grid, seed, amplitude=1.0, band=None):
    """Seeded random real field, optionally band-limited to |m| in band."""
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((grid.dim,) + grid.shape)
    f = VectorField(grid, data, "physical")
    if band is not None:
        fh = to_spectral(f)
        mag = np.sqrt(np.sum(grid.mode_numbers ** 2, axis=0))
        mask = (mag >= band[0]) & (mag <= band[1])
        f = VectorField(grid, fh.data * mask, "spectral")
        from fchsim.spectral import to_physical
        f = to_physical(f)
    scale = np.max(np.abs(f.data))
    if scale > 0:
        f = f * (amplitude / scale)
    return f


def random_divfree(grid, seed, amplitude=1.0, band=None, dealiased=True):
    """Seeded random divergence-free field, dealiased by default."""
    from fchsim.fields import leray_project
    from fchsim.spectral import dealias, to_physical
    f = random_field(grid, seed, amplitude, band)
    fh = to_spectral(f)
    if dealiased:
        fh = dealias(fh)
    return to_physical(leray_project(fh).field)


@pytest.fixture
def grid64():
    return SpectralGrid(2, 64, 2.0 * np.pi)


@pytest.fixture
def grid32():
    return SpectralGrid(2, 32, 2.0 * np.pi)
