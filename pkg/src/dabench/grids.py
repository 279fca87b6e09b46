"""Cell-centered 2-D grids, scalar fields, and the cosine spectral transform.

The spectral basis is the set of Neumann-Laplacian eigenfunctions
cos(i*pi*x/L)*cos(j*pi*y/L) evaluated at cell centers, excluding the
constant mode.  On a cell-centered grid these are exactly the DCT-II
basis vectors, so the transform pair is orthonormal to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn, idctn


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centered grid on the square domain [0, L] x [0, L]."""

    nx: int
    ny: int
    length: float

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid must have at least 2 cells per axis, got {self.nx}x{self.ny}")
        if not self.length > 0:
            raise ValueError(f"domain side must be positive, got {self.length}")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dy(self) -> float:
        return self.length / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def cell_centers(self):
        """Coordinate arrays (x, y), each of shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Indices of the cell containing the point (x, y), which must lie strictly inside D."""
        if not (0.0 < x < self.length and 0.0 < y < self.length):
            raise ValueError(f"point ({x}, {y}) not strictly inside the domain")
        ix = min(int(x / self.dx), self.nx - 1)
        iy = min(int(y / self.dy), self.ny - 1)
        return ix, iy

    def flat_index(self, ix: int, iy: int) -> int:
        return ix * self.ny + iy


@dataclass(frozen=True)
class Field:
    """Scalar field on a Grid2D, stored as a flat row-major (x-major) vector."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size != self.grid.n_cells:
            raise ValueError(f"expected {self.grid.n_cells} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must all be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def as_array(self) -> np.ndarray:
        """Values reshaped to (nx, ny)."""
        return self.values.reshape(self.grid.nx, self.grid.ny)

    def spatial_mean(self) -> float:
        return float(self.values.mean())

    def l2_norm(self) -> float:
        """Discrete L2(D) norm (cell-area weighted)."""
        return float(np.sqrt(self.grid.cell_area * np.sum(self.values**2)))

    def __add__(self, other):
        if isinstance(other, Field):
            _check_same_grid(self.grid, other.grid)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            _check_same_grid(self.grid, other.grid)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __mul__(self, scalar):
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def constant_field(grid: Grid2D, value: float) -> Field:
    return Field(grid, np.full(grid.n_cells, float(value)))


def _check_same_grid(a: Grid2D, b: Grid2D):
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


class SpectralBasis:
    """Nonconstant Neumann-Laplacian eigenpairs on a grid.

    Modes (i, j) run over the DCT wavenumbers 0..nx-1 x 0..ny-1 with (0, 0)
    excluded, sorted by increasing eigenvalue lam_A = (pi/L)^2 (i^2 + j^2)
    with lexicographic (i, j) tie-breaking.  Coefficients are with respect
    to the L2(D)-orthonormal eigenfunctions.
    """

    def __init__(self, grid: Grid2D):
        self.grid = grid
        ii, jj = np.meshgrid(np.arange(grid.nx), np.arange(grid.ny), indexing="ij")
        ii = ii.ravel()
        jj = jj.ravel()
        keep = (ii != 0) | (jj != 0)
        ii, jj = ii[keep], jj[keep]
        lam = (np.pi / grid.length) ** 2 * (ii**2 + jj**2).astype(float)
        order = np.lexsort((jj, ii, lam))
        self.modes = np.column_stack((ii[order], jj[order]))
        self.eigenvalues = lam[order]
        # flat positions of each sorted mode in the (nx, ny) DCT array
        self._dct_index = self.modes[:, 0] * grid.ny + self.modes[:, 1]
        self._sqrt_area = np.sqrt(grid.cell_area)

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    def to_spectral(self, f: Field) -> np.ndarray:
        """Coefficients of f minus its spatial mean in the orthonormal cosine basis."""
        _check_same_grid(f.grid, self.grid)
        coeff = dctn(f.as_array(), norm="ortho")
        return self._sqrt_area * coeff.ravel()[self._dct_index]

    def from_spectral(self, c: np.ndarray) -> Field:
        """Field with the given coefficients; has zero spatial average."""
        c = np.asarray(c, dtype=float).reshape(-1)
        if c.size != self.n_modes:
            raise ValueError(f"expected {self.n_modes} coefficients, got {c.size}")
        coeff = np.zeros((self.grid.nx, self.grid.ny))
        coeff.ravel()[self._dct_index] = c / self._sqrt_area
        return Field(self.grid, idctn(coeff, norm="ortho").ravel())

    def values_to_spectral(self, values: np.ndarray) -> np.ndarray:
        """Batched transform of raw value arrays (..., n_cells) to coefficients (..., n_modes)."""
        values = np.asarray(values, dtype=float)
        shaped = values.reshape(values.shape[:-1] + (self.grid.nx, self.grid.ny))
        coeff = dctn(shaped, axes=(-2, -1), norm="ortho")
        flat = coeff.reshape(values.shape[:-1] + (self.grid.n_cells,))
        return self._sqrt_area * flat[..., self._dct_index]

    def rows_to_modes(self, rows: np.ndarray) -> np.ndarray:
        """Transpose of the synthesis map: entry k is sum_cells row * e_k(cell).

        This is how a Jacobian with respect to cell values transforms into a
        Jacobian with respect to spectral coefficients; it differs from the
        field transform by the quadrature weight.
        """
        return self.values_to_spectral(rows) / self.grid.cell_area

    def values_from_spectral(self, c: np.ndarray) -> np.ndarray:
        """Batched inverse transform, coefficients (..., n_modes) to values (..., n_cells)."""
        c = np.asarray(c, dtype=float)
        flat = np.zeros(c.shape[:-1] + (self.grid.n_cells,))
        flat[..., self._dct_index] = c / self._sqrt_area
        shaped = flat.reshape(c.shape[:-1] + (self.grid.nx, self.grid.ny))
        out = idctn(shaped, axes=(-2, -1), norm="ortho")
        return out.reshape(c.shape[:-1] + (self.grid.n_cells,))

    def mode_field(self, k: int) -> Field:
        """The k-th orthonormal eigenfunction as a grid field."""
        c = np.zeros(self.n_modes)
        c[k] = 1.0
        return self.from_spectral(c)


def to_spectral(f: Field, basis: SpectralBasis) -> np.ndarray:
    return basis.to_spectral(f)


def from_spectral(c: np.ndarray, basis: SpectralBasis) -> Field:
    return basis.from_spectral(c)


def write_field_csv(f: Field, path) -> None:
    """Serialize a field: header line `nx,ny,length`, then one value per line, row-major."""
    with open(path, "w") as fh:
        fh.write("nx,ny,length\n")
        fh.write(f"{f.grid.nx},{f.grid.ny},{float(f.grid.length)!r}\n")
        for v in f.values:
            fh.write(f"{float(v)!r}\n")


def read_field_csv(path) -> Field:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "nx,ny,length":
            raise ValueError(f"unexpected field CSV header: {header}")
        nx_s, ny_s, length_s = fh.readline().strip().split(",")
        grid = Grid2D(int(nx_s), int(ny_s), float(length_s))
        values = np.array([float(line) for line in fh if line.strip()])
    return Field(grid, values)
