"""Discrete Fourier infrastructure on periodic boxes.

Grids, forward/inverse transforms, Fourier multipliers (including the
fractional Laplacian), spectral differentiation and 2/3-rule dealiasing.

Conventions fixed here and relied on everywhere else:
  - forward transform is the unnormalized DFT (numpy fftn), the inverse
    carries the 1/N^n factor
  - physical quadrature weight is (L/N)^n, so the Parseval pairing is
    sum|f|^2 (L/N)^n = sum|F|^2 L^n/N^(2n)
  - wavenumbers are k = (2*pi/L)*m with integer m in [-N/2, N/2)
"""

import numpy as np

FORWARD = "forward"
INVERSE = "inverse"
PHYSICAL = "physical"
SPECTRAL = "spectral"


class SpectralGrid(object):
    """Periodic box discretization with its wavenumber lattice."""

    def __init__(self, dim, points_per_axis, box_length):
        if dim not in (2, 3):
            raise ValueError("dim must be 2 or 3, got %r" % (dim,))
        n = int(points_per_axis)
        if n != points_per_axis or n < 8 or n % 2 != 0:
            raise ValueError("points_per_axis must be an even integer >= 8")
        if not (box_length > 0):
            raise ValueError("box_length must be positive")
        self.dim = dim
        self.points_per_axis = n
        self.box_length = float(box_length)
        self.shape = (n,) * dim
        self.spacing = self.box_length / n
        # integer mode numbers m per axis, fft ordering 0,1,..,-N/2,..,-1
        m1d = np.fft.fftfreq(n, d=1.0 / n)
        mesh = np.meshgrid(*([m1d] * dim), indexing="ij")
        self.mode_numbers = np.stack(mesh)
        self.wavenumbers = (2.0 * np.pi / self.box_length) * self.mode_numbers
        self.k_squared = np.sum(self.wavenumbers ** 2, axis=0)
        # odd-order derivatives of real fields need the unpaired Nyquist
        # mode zeroed, else the result picks up a spurious imaginary part
        self.derivative_wavenumbers = np.where(
            np.abs(self.mode_numbers) == n // 2, 0.0, self.wavenumbers)
        # |m| > N/3 on any axis is zeroed by the 2/3 rule
        cutoff = n / 3.0
        self.dealias_mask = np.all(np.abs(self.mode_numbers) <= cutoff, axis=0)
        # quadrature weights: physical cell volume and spectral mode weight
        self.cell_volume = self.spacing ** dim
        self.mode_weight = self.box_length ** dim / float(n) ** (2 * dim)

    def axis_coordinates(self):
        """Physical sample points along one axis."""
        return np.arange(self.points_per_axis) * self.spacing

    def coordinate_mesh(self):
        """Dense (dim, N, ..., N) array of physical coordinates."""
        x = self.axis_coordinates()
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"))

    def __eq__(self, other):
        return (isinstance(other, SpectralGrid)
                and self.dim == other.dim
                and self.points_per_axis == other.points_per_axis
                and self.box_length == other.box_length)

    def __repr__(self):
        return "SpectralGrid(dim=%d, points_per_axis=%d, box_length=%g)" % (
            self.dim, self.points_per_axis, self.box_length)


class VectorField(object):
    """dim-component field with a physical or spectral representation.

    Physical data is real float64 of shape (dim, N, ..., N); spectral data
    is complex128 in unnormalized-DFT layout.  Fields are value-like: the
    operations in this package return new fields and never mutate inputs.
    """

    def __init__(self, grid, data, representation):
        if representation not in (PHYSICAL, SPECTRAL):
            raise ValueError("unknown representation %r" % (representation,))
        data = np.asarray(data)
        if data.shape != (grid.dim,) + grid.shape:
            raise ValueError("data shape %s does not match grid %s"
                             % (data.shape, grid))
        if representation == PHYSICAL:
            if np.iscomplexobj(data):
                raise ValueError("physical representation requires real data")
            data = data.astype(np.float64, copy=False)
        else:
            data = data.astype(np.complex128, copy=False)
        self.grid = grid
        self.data = data
        self.representation = representation

    @classmethod
    def zeros(cls, grid, representation=PHYSICAL):
        dtype = np.float64 if representation == PHYSICAL else np.complex128
        return cls(grid, np.zeros((grid.dim,) + grid.shape, dtype), representation)

    @classmethod
    def from_components(cls, grid, components, representation=PHYSICAL):
        return cls(grid, np.stack([np.asarray(c) for c in components]),
                   representation)

    @property
    def is_spectral(self):
        return self.representation == SPECTRAL

    def copy(self):
        return VectorField(self.grid, self.data.copy(), self.representation)

    def _check_same(self, other):
        if self.grid != other.grid:
            raise ValueError("grid mismatch")
        if self.representation != other.representation:
            raise ValueError("representation mismatch")

    def __add__(self, other):
        self._check_same(other)
        return VectorField(self.grid, self.data + other.data, self.representation)

    def __sub__(self, other):
        self._check_same(other)
        return VectorField(self.grid, self.data - other.data, self.representation)

    def __mul__(self, scalar):
        return VectorField(self.grid, self.data * scalar, self.representation)

    __rmul__ = __mul__

    def __repr__(self):
        return "VectorField(%s, %s)" % (self.grid, self.representation)


def _spatial_axes(grid):
    return tuple(range(1, grid.dim + 1))


def transform(field, direction):
    """Forward (physical -> spectral) or inverse DFT of a field."""
    if direction == FORWARD:
        if field.is_spectral:
            raise ValueError("forward transform needs a physical field")
        data = np.fft.fftn(field.data, axes=_spatial_axes(field.grid))
        return VectorField(field.grid, data, SPECTRAL)
    if direction == INVERSE:
        if not field.is_spectral:
            raise ValueError("inverse transform needs a spectral field")
        data = np.fft.ifftn(field.data, axes=_spatial_axes(field.grid))
        return VectorField(field.grid, data.real, PHYSICAL)
    raise ValueError("direction must be %r or %r" % (FORWARD, INVERSE))


def to_spectral(field):
    return field if field.is_spectral else transform(field, FORWARD)


def to_physical(field):
    return transform(field, INVERSE) if field.is_spectral else field


def hermitian_defect(field):
    """Max imaginary residue left by the inverse transform.

    Zero (to roundoff) exactly when the spectral data is Hermitian
    symmetric, i.e. represents a real field.
    """
    if not field.is_spectral:
        return 0.0
    back = np.fft.ifftn(field.data, axes=_spatial_axes(field.grid))
    return float(np.max(np.abs(back.imag)))


class Multiplier(object):
    """Even real Fourier symbol applied coefficient-wise.

    The symbol must be a vectorized function of the (dim, ...) wavenumber
    array.  Evenness (symbol(-k) == symbol(k)) is what keeps real fields
    real, so it is checked at construction on probe vectors.
    """

    def __init__(self, symbol, name=None):
        self.symbol = symbol
        self.name = name or getattr(symbol, "__name__", "multiplier")
        probes = np.array([[0.0, 0.7, -1.3, 2.0, 3.9],
                           [0.0, -2.1, 0.4, 2.0, -1.7],
                           [0.0, 1.1, -0.6, 2.0, 0.3]])
        vals = np.asarray(symbol(probes))  # dim-agnostic: 3 rows, extras ignored
        if np.iscomplexobj(vals) and np.max(np.abs(vals.imag)) > 0:
            raise ValueError("symbol must be real-valued")
        if not np.all(np.isfinite(vals)):
            raise ValueError("symbol not finite on probe wavenumbers")
        neg = np.asarray(symbol(-probes))
        if not np.allclose(vals, neg, rtol=1e-12, atol=0.0):
            raise ValueError("symbol must be even in k to preserve realness")

    def values_on(self, grid):
        vals = np.asarray(self.symbol(grid.wavenumbers), dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise ValueError("symbol not finite on the %r lattice" % (grid,))
        return vals

    def __repr__(self):
        return "Multiplier(%s)" % self.name


def apply_multiplier(field, mult):
    """Scale each spectral coefficient by the symbol at its wavenumber."""
    if not field.is_spectral:
        raise ValueError("apply_multiplier needs a spectral field")
    vals = mult.values_on(field.grid)
    return VectorField(field.grid, field.data * vals, SPECTRAL)


def fractional_laplacian_symbol(grid, beta):
    """|k|^(2*beta) on the lattice, with the zero mode explicitly 0."""
    ksq = grid.k_squared
    out = np.zeros_like(ksq)
    nz = ksq > 0
    out[nz] = ksq[nz] ** beta
    return out


def fractional_laplacian(field, beta):
    """(-Laplace)^beta via the multiplier |k|^(2*beta).

    Accepts either representation and returns the same one.
    """
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1], got %r" % (beta,))
    fh = to_spectral(field)
    vals = fractional_laplacian_symbol(field.grid, beta)
    out = VectorField(field.grid, fh.data * vals, SPECTRAL)
    return out if field.is_spectral else to_physical(out)


def _scalar_forward(grid, f):
    return np.fft.fftn(f, axes=tuple(range(grid.dim)))


def _scalar_inverse(grid, fh):
    return np.fft.ifftn(fh, axes=tuple(range(grid.dim))).real


def scalar_gradient(grid, f, spectral_in=False, spectral_out=False):
    """Gradient of a scalar array, returned as a VectorField."""
    fh = f if spectral_in else _scalar_forward(grid, f)
    gh = 1j * grid.derivative_wavenumbers * fh[np.newaxis]
    out = VectorField(grid, gh, SPECTRAL)
    return out if spectral_out else to_physical(out)


def gradient(field, grid=None):
    """Spectral gradient.

    For a scalar array (with grid supplied) returns the gradient as a
    VectorField.  For a VectorField returns a list whose entry i is the
    gradient of component i, each itself a VectorField, in the input's
    representation.
    """
    if isinstance(field, VectorField):
        fh = to_spectral(field)
        out = []
        for i in range(field.grid.dim):
            gi = scalar_gradient(field.grid, fh.data[i], spectral_in=True,
                                 spectral_out=True)
            out.append(gi if field.is_spectral else to_physical(gi))
        return out
    if grid is None:
        raise ValueError("scalar gradient needs the grid")
    return scalar_gradient(grid, field)


def divergence(field):
    """Spectral divergence of a VectorField, as a scalar array."""
    fh = to_spectral(field)
    dh = np.sum(1j * field.grid.derivative_wavenumbers * fh.data, axis=0)
    return dh if field.is_spectral else _scalar_inverse(field.grid, dh)


def laplacian(field, grid=None):
    """Laplacian of a VectorField or of a scalar array (grid required)."""
    if isinstance(field, VectorField):
        fh = to_spectral(field)
        out = VectorField(field.grid, -field.grid.k_squared * fh.data, SPECTRAL)
        return out if field.is_spectral else to_physical(out)
    if grid is None:
        raise ValueError("scalar laplacian needs the grid")
    return _scalar_inverse(grid, -grid.k_squared * _scalar_forward(grid, field))


def curl(field):
    """Curl of a VectorField: a VectorField in 3D, a scalar array in 2D."""
    fh = to_spectral(field)
    k = field.grid.derivative_wavenumbers
    if field.grid.dim == 2:
        ch = 1j * (k[0] * fh.data[1] - k[1] * fh.data[0])
        return ch if field.is_spectral else _scalar_inverse(field.grid, ch)
    ch = np.stack([
        1j * (k[1] * fh.data[2] - k[2] * fh.data[1]),
        1j * (k[2] * fh.data[0] - k[0] * fh.data[2]),
        1j * (k[0] * fh.data[1] - k[1] * fh.data[0]),
    ])
    out = VectorField(field.grid, ch, SPECTRAL)
    return out if field.is_spectral else to_physical(out)


def dealias(field):
    """Zero every coefficient with |m| > N/3 on any axis (2/3 rule)."""
    if not field.is_spectral:
        raise ValueError("dealias acts on spectral fields")
    return VectorField(field.grid, field.data * field.grid.dealias_mask,
                       SPECTRAL)


def zero_mean(field):
    """Force the k=0 mode to zero (finite-energy velocity convention)."""
    fh = to_spectral(field)
    data = fh.data.copy()
    data[(slice(None),) + (0,) * field.grid.dim] = 0.0
    out = VectorField(field.grid, data, SPECTRAL)
    return out if field.is_spectral else to_physical(out)
