"""Tensor-product grids, discrete Laplacians and quadrature.

Uniform grids on an interval or a rectangle, second-order centered
Laplacians with ghost-node elimination for the two boundary conditions
that occur in the model (homogeneous Neumann for the phase, Robin
-dw/dn = alpha*(w - g) for the transformed temperature), and trapezoid
quadrature over the domain and its boundary.

The combination is deliberate: with trapezoid weights the eliminated
ghost nodes make the discrete divergence theorem exact, so the heat
balance of the forward solver and the transpose identities of the
adjoint hold to rounding error, not to discretization error.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid",
    "RobinOperator",
    "trapezoid_weights",
    "apply_laplacian_neumann",
    "apply_laplacian_robin",
    "integrate_omega",
    "integrate_gamma",
    "norm_equivalent",
]


def trapezoid_weights(count: int, spacing: float) -> np.ndarray:
    """Composite trapezoid weights for `count` uniformly spaced nodes."""
    if count < 2:
        raise ValueError("trapezoid rule needs at least two nodes")
    w = np.full(count, spacing, dtype=float)
    w[0] = w[-1] = 0.5 * spacing
    return w


def _lap1d_neumann(n: int, h: float) -> sp.csr_matrix:
    # Interior rows are the usual (1, -2, 1)/h^2 stencil; boundary rows use the
    # reflected ghost value, giving (2*w[1] - 2*w[0])/h^2 and its mirror.
    main = np.full(n, -2.0, dtype=float)
    off = np.ones(n - 1, dtype=float)
    lap = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    lap[0, 1] = 2.0
    lap[n - 1, n - 2] = 2.0
    return (lap / (h * h)).tocsr()


class Grid:
    """Uniform tensor-product grid in one or two dimensions.

    Nodes include the boundary; 2d nodes are flattened in row-major order
    (index = ix * ny + iy).  Precomputes quadrature weights for the domain
    (`omega`) and the boundary (`gamma`), the index partition into boundary
    and interior nodes, and the ghost-eliminated Neumann Laplacian.
    """

    def __init__(self, extents, counts):
        extents = tuple(float(e) for e in np.atleast_1d(extents))
        counts = tuple(int(c) for c in np.atleast_1d(counts))
        if len(extents) != len(counts) or len(counts) not in (1, 2):
            raise ValueError("extents and counts must both have length 1 or 2")
        if any(e <= 0.0 for e in extents):
            raise ValueError("extents must be positive")
        if any(c < 3 for c in counts):
            raise ValueError("need at least 3 nodes per axis")

        self.dim = len(counts)
        self.extents = extents
        self.counts = counts
        self.spacing = tuple(e / (c - 1) for e, c in zip(extents, counts))
        self.n_nodes = int(np.prod(counts))

        axes = [np.linspace(0.0, e, c) for e, c in zip(extents, counts)]
        weights = [trapezoid_weights(c, h) for c, h in zip(counts, self.spacing)]

        if self.dim == 1:
            (n,) = counts
            (h,) = self.spacing
            self.coords = axes[0][:, None]
            self.omega = weights[0]
            self.boundary_index = np.array([0, n - 1])
            gamma = np.array([1.0, 1.0])  # surface measure in 1d is counting measure
            robin_scale = np.array([2.0 / h, 2.0 / h])
            self.lap_neumann = _lap1d_neumann(n, h)
        else:
            nx, ny = counts
            hx, hy = self.spacing
            ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
            ix, iy = ix.ravel(), iy.ravel()
            self.coords = np.column_stack([axes[0][ix], axes[1][iy]])
            self.omega = np.kron(weights[0], weights[1])
            on_x = (ix == 0) | (ix == nx - 1)
            on_y = (iy == 0) | (iy == ny - 1)
            self.boundary_index = np.flatnonzero(on_x | on_y)
            # Edge quadrature: a node's boundary weight is the trapezoid weight
            # along each edge through it, so corners collect (hx + hy)/2.
            gamma_full = np.zeros(self.n_nodes)
            gamma_full[on_x] += weights[1][iy[on_x]]
            gamma_full[on_y] += weights[0][ix[on_y]]
            gamma = gamma_full[self.boundary_index]
            scale_full = np.zeros(self.n_nodes)
            scale_full[on_x] += 2.0 / hx
            scale_full[on_y] += 2.0 / hy
            robin_scale = scale_full[self.boundary_index]
            self.lap_neumann = (
                sp.kron(_lap1d_neumann(nx, hx), sp.identity(ny))
                + sp.kron(sp.identity(nx), _lap1d_neumann(ny, hy))
            ).tocsr()

        self.gamma = gamma
        self._robin_scale = robin_scale
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_index] = False
        self.interior_index = np.flatnonzero(mask)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_index)

    def check_field(self, w, name="field"):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_nodes,):
            raise ValueError(f"{name} has shape {w.shape}, grid has {self.n_nodes} nodes")
        return w

    def check_boundary_field(self, b, name="boundary field"):
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n_boundary,):
            raise ValueError(
                f"{name} has shape {b.shape}, grid has {self.n_boundary} boundary nodes"
            )
        return b


class RobinOperator:
    """Ghost-eliminated Laplacian with the flux condition -dw/dn = alpha*(w - g).

    Splits into `matrix_a @ w + matrix_b @ g`; matrix_a is the Neumann
    Laplacian plus the boundary absorption, matrix_b injects the boundary
    data.  alpha may be a scalar or one value per boundary node, all > 0.
    """

    def __init__(self, grid: Grid, alpha):
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (grid.n_boundary,)).copy()
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
            raise ValueError("alpha must be positive and finite on the whole boundary")
        self.grid = grid
        self.alpha = alpha
        coeff = alpha * grid._robin_scale
        diag = np.zeros(grid.n_nodes)
        diag[grid.boundary_index] = -coeff
        self.matrix_a = (grid.lap_neumann + sp.diags(diag)).tocsr()
        self.matrix_b = sp.csr_matrix(
            (coeff, (grid.boundary_index, np.arange(grid.n_boundary))),
            shape=(grid.n_nodes, grid.n_boundary),
        )


def apply_laplacian_neumann(grid: Grid, w) -> np.ndarray:
    """Discrete Laplacian with reflecting ghosts; every row sums to zero."""
    w = grid.check_field(w)
    return grid.lap_neumann @ w


def apply_laplacian_robin(op: RobinOperator, w, g) -> np.ndarray:
    """Discrete Laplacian of w under -dw/dn = alpha*(w - g)."""
    w = op.grid.check_field(w)
    g = op.grid.check_boundary_field(g)
    return op.matrix_a @ w + op.matrix_b @ g


def integrate_omega(grid: Grid, w) -> float:
    """Trapezoid integral of a nodal field over the domain."""
    return float(grid.omega @ grid.check_field(w))


def integrate_gamma(grid: Grid, b) -> float:
    """Trapezoid integral of a boundary field over the boundary."""
    return float(grid.gamma @ grid.check_boundary_field(b, "boundary field"))


def norm_equivalent(grid: Grid, alpha, w) -> float:
    """Diagnostic squared norm: integral of |grad w|^2 plus boundary alpha*w^2.

    Equivalent to the usual first-order Sobolev norm when alpha is bounded
    away from zero; used only for monitoring, never in the solvers.
    """
    w = grid.check_field(w)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (grid.n_boundary,))
    if grid.dim == 1:
        (h,) = grid.spacing
        grad = float(np.sum((np.diff(w) / h) ** 2) * h)
    else:
        nx, ny = grid.counts
        hx, hy = grid.spacing
        w2 = w.reshape(nx, ny)
        wx = trapezoid_weights(nx, hx)
        wy = trapezoid_weights(ny, hy)
        dx = np.diff(w2, axis=0) / hx
        dy = np.diff(w2, axis=1) / hy
        # midpoint differences along each axis, trapezoid across the other
        grad = hx * float(np.einsum("ij,j->", dx * dx, wy))
        grad += hy * float(np.einsum("ij,i->", dy * dy, wx))
    wb = w[grid.boundary_index]
    return float(grad + grid.gamma @ (alpha * wb * wb))
