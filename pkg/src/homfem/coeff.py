"""Diffusion tensor fields a_ij^{ab}(eps, x).

A :class:`TensorField` is a periodic base tensor on the unit cell, optionally
rescaled by a small parameter ``eps`` (values are then ``base((x/eps) mod 1)``)
and optionally perturbed by a localized defect evaluated at ``x/eps`` without
wrapping, so the defect is seen once instead of repeating with the period.

Entries come from three evaluator kinds: constants, piecewise-constant tables
on a uniform grid over the unit cell, and closed-form expression strings (see
:mod:`homfem.expressions`).  Arbitrary callbacks are deliberately not
supported so that problem configs stay serializable.

Ellipticity bookkeeping is observational: the pointwise quadratic-form margin
and the magnitude bound are sampled on a grid (default 256 per axis) and
reported as observed values, since the entries are only essentially bounded.
"""

from __future__ import annotations

import json

import numpy as np

from .expressions import compile_expression

__all__ = [
    "TensorField",
    "HomogenizedTensor",
    "legendre_margin",
    "scale_periodic",
    "add_defect",
    "DEFAULT_SAMPLE_GRID",
]

DEFAULT_SAMPLE_GRID = 256


def _as_entry_array(n, dim, value):
    """Normalize a tensor entry spec to shape (n, n, dim, dim)."""
    if np.isscalar(value):
        out = np.zeros((n, n, dim, dim))
        for a in range(n):
            for i in range(dim):
                out[a, a, i, i] = float(value)
        return out
    arr = np.asarray(value, dtype=float)
    if arr.shape == (n, n, dim, dim):
        return arr.copy()
    if n == 1 and arr.shape == (dim, dim):
        return arr.reshape(1, 1, dim, dim).copy()
    if dim == 1 and arr.shape == (n, n):
        return arr.reshape(n, n, 1, 1).copy()
    raise ValueError(
        f"cannot interpret entry of shape {arr.shape} as an "
        f"(n={n}, n={n}, N={dim}, N={dim}) tensor")


class _ConstantEntries:
    kind = "constant"

    def __init__(self, n, dim, value):
        self.array = _as_entry_array(n, dim, value)

    def __call__(self, pts):
        return np.broadcast_to(self.array, (pts.shape[0],) + self.array.shape).copy()


def _flatten_table(values, grid):
    """Flatten a possibly nested table to a row-major entry list.

    Entries may themselves be scalars or arrays, so numpy's automatic
    nesting detection cannot be used here.  Accepts either a flat row-major
    list or nesting that follows the grid shape.
    """
    if len(grid) == 1:
        return list(values)
    values = list(values)
    if len(values) == grid[0]:
        try:
            return [v for row in values
                    for v in _flatten_table(row, grid[1:])]
        except TypeError:
            pass
    return values


class _PiecewiseEntries:
    """Piecewise-constant values on a uniform grid over the unit cell."""

    kind = "piecewise"

    def __init__(self, n, dim, grid, values, zero_outside=False):
        grid = tuple(int(g) for g in grid)
        if len(grid) != dim or any(g < 1 for g in grid):
            raise ValueError(f"grid {grid} does not match dimension {dim}")
        flat = _flatten_table(values, grid)
        if len(flat) != int(np.prod(grid)):
            raise ValueError(
                f"piecewise table has {len(flat)} entries, grid needs "
                f"{int(np.prod(grid))}")
        table = np.stack([_as_entry_array(n, dim, v) for v in flat])
        self.grid = grid
        self.table = table.reshape(grid + (n, n, dim, dim))
        self.zero_outside = zero_outside

    def __call__(self, pts):
        m = pts.shape[0]
        idx = []
        inside = np.ones(m, dtype=bool)
        for axis, g in enumerate(self.grid):
            raw = np.floor(pts[:, axis] * g).astype(int)
            inside &= (raw >= 0) & (raw < g)
            idx.append(np.clip(raw, 0, g - 1))
        out = self.table[tuple(idx)].copy()
        if self.zero_outside:
            out[~inside] = 0.0
        return out


class _ExpressionEntries:
    kind = "expression"

    def __init__(self, n, dim, entries):
        if isinstance(entries, str):
            full = [[[[entries if (a == b and i == j) else 0.0
                       for j in range(dim)] for i in range(dim)]
                     for b in range(n)] for a in range(n)]
            entries = full
        self.n, self.dim = n, dim
        self.fns = np.empty((n, n, dim, dim), dtype=object)
        for a in range(n):
            for b in range(n):
                for i in range(dim):
                    for j in range(dim):
                        e = entries[a][b][i][j]
                        if isinstance(e, str):
                            self.fns[a, b, i, j] = compile_expression(e, dim)
                        else:
                            self.fns[a, b, i, j] = float(e)

    def __call__(self, pts):
        m = pts.shape[0]
        out = np.empty((m, self.n, self.n, self.dim, self.dim))
        for a in range(self.n):
            for b in range(self.n):
                for i in range(self.dim):
                    for j in range(self.dim):
                        f = self.fns[a, b, i, j]
                        out[:, a, b, i, j] = f(pts) if callable(f) else f
        return out


class TensorField:
    """Diffusion tensor a(eps, x) = base((x/eps) mod 1) + defect(x/eps).

    ``epsilon=None`` means the base is evaluated at x directly (no rescale);
    the defect, when present, is always evaluated unwrapped.
    """

    def __init__(self, n, dim, base_entries, epsilon=None, defect=None,
                 triangular=None, declared_localized=True):
        self.n = int(n)
        self.dim = int(dim)
        self.base = base_entries
        self.epsilon = epsilon
        self.defect = defect  # entries evaluated at x/eps, unwrapped
        self.declared_localized = declared_localized
        self._margin = None
        self._magnitude = None
        if epsilon is not None and epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        detected = self._detect_triangular()
        if triangular is None:
            self.triangular = detected
        elif triangular and not detected:
            raise ValueError("tensor declared triangular but has entries "
                             "with row index above column index")
        else:
            self.triangular = bool(triangular)

    # -- constructors ---------------------------------------------------

    @classmethod
    def constant(cls, n, dim, value, **kw):
        return cls(n, dim, _ConstantEntries(n, dim, value), **kw)

    @classmethod
    def piecewise(cls, n, dim, grid, values, zero_outside=False, **kw):
        return cls(n, dim,
                   _PiecewiseEntries(n, dim, grid, values, zero_outside),
                   **kw)

    @classmethod
    def from_expressions(cls, n, dim, entries, **kw):
        return cls(n, dim, _ExpressionEntries(n, dim, entries), **kw)

    # -- evaluation -----------------------------------------------------

    def evaluate(self, points):
        """Tensor values at physical points, shape (m, n, n, N, N)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        y = pts if self.epsilon is None else pts / self.epsilon
        vals = self.base(np.mod(y, 1.0))
        if self.defect is not None:
            vals = vals + self.defect(y)
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals).reshape(len(pts), -1).all(axis=1))
            raise ValueError(
                f"tensor evaluation failed at point {pts[bad[0, 0]]}")
        return vals

    def with_epsilon(self, epsilon):
        """The same coefficient family member at scale ``epsilon``."""
        return TensorField(self.n, self.dim, self.base, epsilon=epsilon,
                           defect=self.defect, triangular=self.triangular,
                           declared_localized=self.declared_localized)

    def without_defect(self):
        """The periodic base alone; the cell problems and the effective
        tensor are defined through it, never through the defect."""
        if self.defect is None:
            return self
        return TensorField(self.n, self.dim, self.base, epsilon=self.epsilon,
                           triangular=self.triangular)

    # -- validation -----------------------------------------------------

    def _detect_triangular(self):
        if self.n == 1:
            return True
        vals = self._sample_values(16)
        lower = [abs(vals[:, a, b]).max()
                 for a in range(self.n) for b in range(self.n) if a > b]
        scale = max(abs(vals).max(), 1.0)
        return max(lower) <= 1e-14 * scale

    def _sample_values(self, per_axis):
        # samples the physical domain, so rescaled oscillations are included
        return self.evaluate(sample_grid(self.dim, per_axis))

    def observed_margin(self, per_axis=DEFAULT_SAMPLE_GRID):
        if self._margin is None:
            self._margin = legendre_margin(self, per_axis)
        return self._margin

    def observed_magnitude(self, per_axis=DEFAULT_SAMPLE_GRID):
        if self._magnitude is None:
            self._magnitude = float(np.abs(self._sample_values(per_axis)).max())
        return self._magnitude

    def require_elliptic(self, per_axis=DEFAULT_SAMPLE_GRID):
        margin = self.observed_margin(per_axis)
        if margin <= 0.0:
            raise ValueError(
                f"tensor fails the pointwise ellipticity check: observed "
                f"quadratic-form margin {margin:.3e} <= 0")
        if not np.isfinite(self.observed_magnitude(per_axis)):
            raise ValueError("tensor magnitude unbounded on sample grid")
        return margin


def sample_grid(dim, per_axis):
    """Midpoints of a uniform per_axis**dim grid over (0,1)^dim."""
    ticks = (np.arange(per_axis) + 0.5) / per_axis
    if dim == 1:
        return ticks.reshape(-1, 1)
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def _quadratic_form_margin(values):
    """Smallest eigenvalue of the symmetrized (nN)x(nN) form, per point."""
    m, n = values.shape[0], values.shape[1]
    dim = values.shape[3]
    q = np.transpose(values, (0, 1, 3, 2, 4)).reshape(m, n * dim, n * dim)
    sym = 0.5 * (q + np.transpose(q, (0, 2, 1)))
    return np.linalg.eigvalsh(sym)[:, 0]


def legendre_margin(tensor, per_axis=DEFAULT_SAMPLE_GRID):
    """Minimum over a sample grid of the pointwise quadratic-form margin.

    A negative value means the pointwise ellipticity condition fails on the
    grid; the value is reported and the caller decides.
    """
    if per_axis < 1:
        raise ValueError("sample grid must be non-empty")
    vals = tensor.evaluate(sample_grid(tensor.dim, per_axis))
    return float(_quadratic_form_margin(vals).min())


def scale_periodic(base: TensorField, epsilon: float) -> TensorField:
    """Rescale a unit-cell tensor to oscillate at period ``epsilon``."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return base.with_epsilon(epsilon)


def _mean_density_profile(entries, radii, centers, spacing=1.0 / 32.0):
    """max over centers of (1/r^N) * integral of |b| over the r-ball.

    The sample spacing is held fixed across radii so the estimates at
    different r are comparable.
    """
    dim = centers.shape[1]
    out = []
    for r in radii:
        grid = max(8, int(np.ceil(2.0 * r / spacing)))
        worst = 0.0
        for c in centers:
            ticks = [np.linspace(c[k] - r, c[k] + r, grid, endpoint=False)
                     + r / grid for k in range(dim)]
            if dim == 1:
                pts = ticks[0].reshape(-1, 1)
            else:
                xx, yy = np.meshgrid(*ticks, indexing="ij")
                pts = np.column_stack([xx.ravel(), yy.ravel()])
            inside = np.linalg.norm(pts - c, axis=1) < r
            vol_el = (2.0 * r / grid) ** dim
            vals = np.abs(entries(pts)).sum(axis=(1, 2, 3, 4))
            worst = max(worst, float(vals[inside].sum()) * vol_el / r ** dim)
        out.append(worst)
    return out


def add_defect(base: TensorField, defect: TensorField, epsilon: float) -> TensorField:
    """Perturb a periodic tensor family by a localized defect.

    The defect's declared vanishing-mean-density property is spot-checked:
    the mean of |defect| over balls of growing radius around a few sample
    centers must decay.  The combined field must keep a positive observed
    ellipticity margin.
    """
    if base.n != defect.n or base.dim != defect.dim:
        raise ValueError("base and defect dimensions do not match")
    if not defect.declared_localized:
        raise ValueError("defect must declare vanishing mean density")
    centers = np.full((3, base.dim), 0.5)
    centers[1] = 0.0
    centers[2] = 3.0
    profile = _mean_density_profile(defect.base, [1.0, 2.0, 4.0, 8.0], centers)
    if profile[0] > 0.0 and profile[-1] > 0.25 * profile[0]:
        raise ValueError(
            "defect fails the localization spot-check: ball-mean of |b| "
            f"does not decay with radius ({profile})")
    combined = TensorField(base.n, base.dim, base.base, epsilon=epsilon,
                           defect=defect.base,
                           triangular=base.triangular and defect.triangular)
    margin = combined.observed_margin()
    if margin <= 0.0:
        raise ValueError(
            f"base plus defect loses ellipticity: observed margin {margin:.3e}")
    return combined


class HomogenizedTensor:
    """A constant effective diffusion tensor."""

    def __init__(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 4 or arr.shape[0] != arr.shape[1] or arr.shape[2] != arr.shape[3]:
            raise ValueError(f"expected shape (n,n,N,N), got {arr.shape}")
        self.values = arr
        self.n = arr.shape[0]
        self.dim = arr.shape[2]
        self.margin = float(_quadratic_form_margin(arr[None, ...])[0])
        if self.margin <= 0.0:
            raise ValueError(
                f"effective tensor fails the ellipticity condition "
                f"(margin {self.margin:.3e}); the cell mesh is likely "
                f"under-resolved")

    def as_tensor_field(self) -> TensorField:
        return TensorField.constant(self.n, self.dim, self.values)

    def matrix(self):
        """For one space dimension, the n x n coefficient matrix."""
        if self.dim != 1:
            raise ValueError("matrix() only applies in one space dimension")
        return self.values[:, :, 0, 0].copy()

    @property
    def is_symmetric(self):
        q = np.transpose(self.values, (0, 2, 1, 3)).reshape(
            self.n * self.dim, self.n * self.dim)
        return bool(np.allclose(q, q.T, atol=1e-12 * max(1.0, abs(q).max())))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "N": self.dim,
                           "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "HomogenizedTensor":
        doc = json.loads(text)
        return cls(np.asarray(doc["values"], dtype=float))
