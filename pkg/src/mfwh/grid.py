"""
Cartesian grids, grid functions and finite-difference Laplacians.

A grid covers a box in one or two dimensions with ``N_l`` cells per axis.
Grid functions store values at every point including ``n_g`` ghost layers
(``n_g = 1`` for second order, ``n_g = 2`` for fourth order). Array axis
``l`` of a grid function is grid axis ``l`` (x first), so ``u.values[i, j]``
is the value at ``(x_i, y_j)`` shifted by the ghost width.

Boundary closures
-----------------
Dirichlet faces eliminate the boundary value; the first ghost is the odd
reflection of ``u - g`` and the second ghost (fourth order) is the degree-4
one-sided extrapolation through the first ghost and the next four points.
Neumann faces keep the boundary point as an unknown; the first ghost is the
even reflection corrected by the centered difference ``D0 u = du/dn``, and
the second ghost uses the same extrapolation as Dirichlet.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
_KINDS = (DIRICHLET, NEUMANN)

# weights for the second ghost: u[-2] from u[-1], u[0], ..., u[3]
_EXTRAP = np.array([5.0, -10.0, 10.0, -5.0, 1.0])


def ghost_width(order: int) -> int:
    check_order(order)
    return order // 2


def check_order(order: int) -> None:
    if order not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {order!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian grid with ghost layers.

    Attributes
    ----------
    lower, upper : tuple of float
        Box corners per axis.
    cells : tuple of int
        Number of cells ``N_l`` per axis.
    ghost : int
        Ghost width ``n_g``.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    cells: tuple[int, ...]
    ghost: int

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / n for a, b, n in zip(self.lower, self.upper, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        """Array shape including ghosts."""
        return tuple(n + 1 + 2 * self.ghost for n in self.cells)

    @property
    def closure_slices(self) -> tuple[slice, ...]:
        """Slices selecting all non-ghost points (the closed grid)."""
        g = self.ghost
        return tuple(slice(g, g + n + 1) for n in self.cells)

    @property
    def interior_slices(self) -> tuple[slice, ...]:
        """Slices selecting the strictly interior points."""
        g = self.ghost
        return tuple(slice(g + 1, g + n) for n in self.cells)

    @property
    def num_interior(self) -> int:
        return int(np.prod([n - 1 for n in self.cells]))

    def coordinates(self, axis: int) -> np.ndarray:
        """Point coordinates along ``axis``, ghosts included (``x_j = a + j h``)."""
        a = self.lower[axis]
        h = self.spacing[axis]
        j = np.arange(-self.ghost, self.cells[axis] + 1 + self.ghost)
        return a + j * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*(self.coordinates(l) for l in range(self.dim)), indexing="ij")

    def closure_mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(x[self.closure_slices] for x in self.mesh())

    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.interior_slices] = True
        return m

    def closure_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.closure_slices] = True
        return m

    def boundary_mask(self) -> np.ndarray:
        return self.closure_mask() & ~self.interior_mask()

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.shape))


def make_grid(bounds: Sequence[tuple[float, float]], cells: Sequence[int] | int, order: int) -> Grid:
    """Build a grid over ``bounds`` with ``cells`` cells per axis.

    Raises
    ------
    ValueError
        For a degenerate box, a bad order, or fewer than ``4 n_g`` cells.
    """
    bounds = [tuple(map(float, b)) for b in bounds]
    if isinstance(cells, (int, np.integer)):
        cells = [int(cells)] * len(bounds)
    cells = tuple(int(n) for n in cells)
    if len(bounds) not in (1, 2) or len(cells) != len(bounds):
        raise ValueError("grids are 1D or 2D with one cell count per axis")
    g = ghost_width(order)
    for (a, b), n in zip(bounds, cells):
        if not b > a:
            raise ValueError(f"degenerate bounds ({a}, {b})")
        if n < 4 * g:
            raise ValueError(f"need at least {4 * g} cells per axis for order {order}, got {n}")
    return Grid(tuple(a for a, _ in bounds), tuple(b for _, b in bounds), cells, g)


class GridFunction:
    """Real values on every point of a grid, ghosts included."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: np.ndarray | None = None):
        self.grid = grid
        if values is None:
            values = np.zeros(grid.shape)
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not match grid shape {grid.shape}")
        self.values = values

    @classmethod
    def from_function(cls, grid: Grid, func) -> "GridFunction":
        """Sample ``func(*coords)`` at every point, ghosts included."""
        return cls(grid, np.broadcast_to(func(*grid.mesh()), grid.shape).copy())

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    @property
    def closure(self) -> np.ndarray:
        return self.values[self.grid.closure_slices]

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior_slices]

    def _check(self, other: "GridFunction") -> None:
        if other.grid != self.grid:
            raise ValueError("grid functions live on different grids")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "GridFunction":
        return GridFunction(self.grid, a * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def axpy(self, a: float, x: "GridFunction") -> "GridFunction":
        """In place ``self += a x``; returns self."""
        self._check(x)
        self.values += a * x.values
        return self

    def __repr__(self) -> str:
        return f"GridFunction(cells={self.grid.cells}, max={np.abs(self.values).max():.3e})"


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary kind per face: ``kinds[axis] = (lower_kind, upper_kind)``."""

    kinds: tuple[tuple[str, str], ...]

    def __post_init__(self):
        for pair in self.kinds:
            if len(pair) != 2 or any(k not in _KINDS for k in pair):
                raise ValueError(f"each axis needs two kinds from {_KINDS}, got {pair!r}")

    @classmethod
    def uniform(cls, kind: str, dim: int) -> "BoundaryCondition":
        return cls(tuple((kind, kind) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.kinds)

    def unknown_range(self, grid: Grid, axis: int) -> tuple[int, int]:
        """First and last (inclusive) unknown index along ``axis``, in point numbering."""
        lo, hi = self.kinds[axis]
        n = grid.cells[axis]
        return (0 if lo == NEUMANN else 1, n if hi == NEUMANN else n - 1)

    def unknown_slices(self, grid: Grid) -> tuple[slice, ...]:
        """Points where the discrete equation is imposed, as array slices."""
        self._check_grid(grid)
        g = grid.ghost
        out = []
        for l in range(grid.dim):
            j0, j1 = self.unknown_range(grid, l)
            out.append(slice(g + j0, g + j1 + 1))
        return tuple(out)

    def unknown_shape(self, grid: Grid) -> tuple[int, ...]:
        return tuple(s.stop - s.start for s in self.unknown_slices(grid))

    def num_unknowns(self, grid: Grid) -> int:
        return int(np.prod(self.unknown_shape(grid)))

    def _check_grid(self, grid: Grid) -> None:
        if grid.dim != self.dim:
            raise ValueError(f"boundary condition is {self.dim}D but grid is {grid.dim}D")


def _face(axis: int, index: int, dim: int) -> tuple:
    idx: list = [slice(None)] * dim
    idx[axis] = index
    return tuple(idx)


def fill_ghosts(
    u: GridFunction,
    bc: BoundaryCondition,
    data: GridFunction | None = None,
    order: int | None = None,
) -> GridFunction:
    """Apply boundary conditions in place and fill the ghost layers.

    ``data`` holds Dirichlet values or outward normal derivatives at the
    boundary points; ``None`` means homogeneous. Returns ``u``.
    """
    grid = u.grid
    bc._check_grid(grid)
    order = 2 * grid.ghost if order is None else order
    check_order(order)
    if ghost_width(order) > grid.ghost:
        raise ValueError("grid has too few ghost layers for this order")
    if data is not None and data.grid != grid:
        raise ValueError("boundary data must live on the same grid as u")
    g = data.values if data is not None else None
    v = u.values
    d = grid.dim
    h = grid.spacing
    gw = grid.ghost

    # boundary values first so corner points shared by faces are settled
    for l in range(d):
        for side, kind in enumerate(bc.kinds[l]):
            if kind == DIRICHLET:
                b = gw if side == 0 else gw + grid.cells[l]
                v[_face(l, b, d)] = 0.0 if g is None else g[_face(l, b, d)]

    for l in range(d):
        # restrict the other axes to the closed grid
        other = list(grid.closure_slices)
        for side, kind in enumerate(bc.kinds[l]):
            b = gw if side == 0 else gw + grid.cells[l]
            s = 1 if side == 0 else -1

            def at(k):
                idx = list(other)
                idx[l] = b + k * s
                return tuple(idx)

            gb = 0.0 if g is None else g[at(0)]
            if kind == DIRICHLET:
                v[at(-1)] = 2.0 * gb - v[at(1)]
            else:
                v[at(-1)] = v[at(1)] + 2.0 * h[l] * gb
            if order == 4:
                v[at(-2)] = sum(w * v[at(k)] for w, k in zip(_EXTRAP, (-1, 0, 1, 2, 3)))
    return u


def _second_difference(v: np.ndarray, axis: int, order: int, h: float, core: tuple[slice, ...]) -> np.ndarray:
    def shifted(k):
        idx = list(core)
        s = core[axis]
        idx[axis] = slice(s.start + k, s.stop + k)
        return v[tuple(idx)]

    if order == 2:
        return (shifted(-1) - 2.0 * shifted(0) + shifted(1)) / h**2
    return (-shifted(-2) + 16.0 * shifted(-1) - 30.0 * shifted(0) + 16.0 * shifted(1) - shifted(2)) / (12.0 * h**2)


def apply_laplacian(u: GridFunction, order: int, c: float = 1.0) -> GridFunction:
    """Return ``c^2`` times the discrete Laplacian of ``u``.

    The result is evaluated at every non-ghost point (ghosts of ``u`` must be
    filled) and is zero on the ghost layers.
    """
    check_order(order)
    grid = u.grid
    if ghost_width(order) > grid.ghost:
        raise ValueError("grid has too few ghost layers for this order")
    core = grid.closure_slices
    out = np.zeros(grid.shape)
    acc = out[core]
    for l in range(grid.dim):
        acc += _second_difference(u.values, l, order, grid.spacing[l], core)
    acc *= c * c
    return GridFunction(grid, out)


def gather(u: GridFunction, bc: BoundaryCondition) -> np.ndarray:
    """Unknown values of ``u`` as a flat vector (C order)."""
    return u.values[bc.unknown_slices(u.grid)].ravel()


def scatter(vec: np.ndarray, u: GridFunction, bc: BoundaryCondition) -> GridFunction:
    """Write an unknown vector into ``u`` in place; returns ``u``."""
    u.values[bc.unknown_slices(u.grid)] = np.reshape(vec, bc.unknown_shape(u.grid))
    return u


def _extension_1d(n: int, kinds: tuple[str, str], order: int) -> tuple[sp.csr_matrix, int]:
    """Map 1D unknowns to the full ghosted line under homogeneous conditions."""
    g = ghost_width(order)
    j0 = 0 if kinds[0] == NEUMANN else 1
    j1 = n if kinds[1] == NEUMANN else n - 1
    nu = j1 - j0 + 1
    npts = n + 1 + 2 * g
    E = np.zeros((npts, nu))
    for j in range(j0, j1 + 1):
        E[g + j, j - j0] = 1.0
    for side, kind in enumerate(kinds):
        b = g if side == 0 else g + n
        s = 1 if side == 0 else -1
        E[b - s] = (-1.0 if kind == DIRICHLET else 1.0) * E[b + s]
        if order == 4:
            E[b - 2 * s] = sum(w * E[b + k * s] for w, k in zip(_EXTRAP, (-1, 0, 1, 2, 3)))
    return sp.csr_matrix(E), j0


def _stencil_1d(n: int, j0: int, nu: int, order: int, h: float) -> sp.csr_matrix:
    g = ghost_width(order)
    if order == 2:
        offs, w = (-1, 0, 1), np.array([1.0, -2.0, 1.0]) / h**2
    else:
        offs, w = (-2, -1, 0, 1, 2), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h**2)
    rows, cols, vals = [], [], []
    for r in range(nu):
        k = g + j0 + r
        for o, wk in zip(offs, w):
            rows.append(r)
            cols.append(k + o)
            vals.append(wk)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nu, n + 1 + 2 * g))


def assemble_1d(n: int, h: float, kinds: tuple[str, str], order: int) -> sp.csr_matrix:
    """Assembled 1D second-difference operator on the unknowns of one axis."""
    check_order(order)
    E, j0 = _extension_1d(n, kinds, order)
    D = _stencil_1d(n, j0, E.shape[1], order, h)
    A = (D @ E).tocsr()
    A.eliminate_zeros()
    return A


def assemble_operator(grid: Grid, order: int, bc: BoundaryCondition, c: float = 1.0) -> sp.csr_matrix:
    """Sparse ``c^2 L_h`` on the unknowns of ``bc`` with homogeneous boundary data.

    Unknowns are ordered as ``gather`` orders them.
    """
    check_order(order)
    bc._check_grid(grid)
    ops = [assemble_1d(grid.cells[l], grid.spacing[l], bc.kinds[l], order) for l in range(grid.dim)]
    if grid.dim == 1:
        A = ops[0]
    else:
        nx, ny = ops[0].shape[0], ops[1].shape[0]
        A = sp.kron(ops[0], sp.identity(ny)) + sp.kron(sp.identity(nx), ops[1])
    return (c * c * A).tocsr()


def boundary_lift(grid: Grid, order: int, bc: BoundaryCondition, data: GridFunction | None, c: float = 1.0) -> np.ndarray:
    """Contribution of boundary data to ``c^2 L_h`` at the unknowns.

    ``L_h u = A u_unknowns + lift`` when ``u`` carries boundary data ``data``.
    """
    if data is None:
        return np.zeros(bc.num_unknowns(grid))
    u = grid.zeros()
    fill_ghosts(u, bc, data, order)
    return gather(apply_laplacian(u, order, c), bc)


def write_field(path, u: GridFunction) -> None:
    """Write the non-ghost values of ``u``.

    Header ``nx ny xa xb ya yb`` (cell counts and bounds; ``ny = 0`` and
    ``ya = yb = 0`` in 1D), then one value per line in C order of the
    ``[i, j]`` array, 17 significant digits.
    """
    grid = u.grid
    nx = grid.cells[0]
    ny = grid.cells[1] if grid.dim == 2 else 0
    xa, xb = grid.lower[0], grid.upper[0]
    ya, yb = (grid.lower[1], grid.upper[1]) if grid.dim == 2 else (0.0, 0.0)
    with open(path, "w") as fh:
        fh.write(f"{nx} {ny} {xa:.17g} {xb:.17g} {ya:.17g} {yb:.17g}\n")
        fh.writelines(f"{x:.17g}\n" for x in u.closure.ravel())


def read_field(path, order: int = 2) -> GridFunction:
    """Read a field written by ``write_field``; ghosts are left zero."""
    with open(path) as fh:
        head = fh.readline().split()
        vals = np.array([float(line) for line in fh if line.strip()])
    nx, ny = int(head[0]), int(head[1])
    xa, xb, ya, yb = map(float, head[2:6])
    if ny == 0:
        grid = make_grid([(xa, xb)], [nx], order)
    else:
        grid = make_grid([(xa, xb), (ya, yb)], [nx, ny], order)
    u = grid.zeros()
    u.values[grid.closure_slices] = vals.reshape(tuple(n + 1 for n in grid.cells))
    return u
