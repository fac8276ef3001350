"""The d-dimensional Hankel transform h_a and its eigenfunction kernel.

h_a f(x) = int phi_y^a(x) f(y) y^{2a} dy with

    phi_y^a(x) = prod_j (x_j y_j)^{-a_j+1/2} J_{a_j-1/2}(x_j y_j),

self-inverse and an L^2 isometry. A HankelPlan freezes the per-axis dense
kernel matrices (eigenfunction factor times source quadrature weight) for
a fixed source grid and target grid, contracted axis by axis on apply.
Radial multipliers m(|y|) sandwiched between two transforms give the heat,
Poisson and inverse-square-root functional calculus of B_a downstream.
"""

import numpy as np

from .grids import GridFunction, MultiIndexAlpha
from .special_fn import scaled_j

__all__ = ["phi", "HankelPlan", "hankel_apply", "hankel_apply_stack",
           "multiplier_apply", "hankel_eval"]

# Plans reject axis sampling coarser than 4 nodes per oscillation period:
# max node gap * max opposite coordinate <= pi/2 (spacing x frequency in
# cycles <= 1/4). Composite Gauss-Legendre panels are comfortably spectral
# at this density; anything coarser silently aliases the kernel.
_MAX_GAP_PHASE = 0.5 * np.pi


def phi(alpha, x, y):
    """Eigenfunction phi_y^a(x) = prod_j scaled_j(a_j - 1/2, x_j y_j).

    x, y are points of R_+^d (scalars accepted for d = 1). Finite through
    x_j y_j -> 0, where the factor tends to 2^{-mu}/Gamma(mu+1).
    """
    if not isinstance(alpha, MultiIndexAlpha):
        alpha = MultiIndexAlpha(alpha)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape[-1] != alpha.d or y.shape[-1] != alpha.d:
        raise ValueError("points must have d = %d components" % alpha.d)
    out = 1.0
    for j, a in enumerate(alpha.alpha):
        out = out * scaled_j(a - 0.5, x[..., j] * y[..., j])
    return out if np.ndim(out) else float(out)


class HankelPlan:
    """Precomputed per-axis kernel matrices for h_alpha: source -> target.

    target defaults to the source grid (the self-dual case used for the
    multiplier sandwich). Shifted plans (alpha + e_i on the same grids) are
    memoized via .shifted(i), which chains for double shifts.
    """

    def __init__(self, alpha, source, target=None):
        if not isinstance(alpha, MultiIndexAlpha):
            alpha = MultiIndexAlpha(alpha)
        if target is None:
            target = source
        if source.d != alpha.d or target.d != alpha.d:
            raise ValueError("grid dimension does not match alpha")
        self.alpha = alpha
        self.source = source
        self.target = target
        self.matrices = []
        for j, a in enumerate(alpha.alpha):
            xs = source.axes[j]
            xt = target.axes[j]
            gap = source.max_gap(j)
            if gap * xt.max() > _MAX_GAP_PHASE:
                raise ValueError(
                    "axis %d undersampled for the oscillation budget: "
                    "gap*freq = %.3f > pi/2" % (j, gap * xt.max())
                )
            # weights follow the plan's alpha, not the grid's: shifted plans
            # integrate against y^{2(a_j+1)} on the same nodes
            K = scaled_j(a - 0.5, np.multiply.outer(xt, xs))
            K *= (source.base_weights[j] * xs ** (2.0 * a))[None, :]
            if not np.all(np.isfinite(K)):
                raise ValueError("non-finite kernel matrix on axis %d" % j)
            self.matrices.append(K)
        self._shifts = {}

    def shifted(self, i):
        """Plan for alpha + e_i on the same source/target grids."""
        if i not in self._shifts:
            self._shifts[i] = HankelPlan(self.alpha.shifted(i), self.source, self.target)
        return self._shifts[i]

    @property
    def self_dual(self):
        return self.target is self.source or self.target.compatible(self.source)


def _contract(matrices, values, offset=0):
    v = values
    for j, K in enumerate(matrices):
        v = np.moveaxis(np.tensordot(K, v, axes=(1, j + offset)), 0, j + offset)
    return v


def hankel_apply(plan, f):
    """h_alpha f on the plan's target grid."""
    if not f.grid.compatible(plan.source):
        raise ValueError("grid mismatch: f not on the plan's source grid")
    return GridFunction(plan.target, _contract(plan.matrices, f.values))


def hankel_apply_stack(plan, values):
    """Batched transform of a stack with shape (m, n_1, ..., n_d)."""
    if values.shape[1:] != plan.source.shape:
        raise ValueError("stack shape does not match the plan's source grid")
    return _contract(plan.matrices, values, offset=1)


def multiplier_apply(plan, f, m, out_plan=None):
    """h_a(m(|.|) h_a f): the radial functional calculus of B_alpha.

    plan must be self-dual (analysis leg); out_plan chooses the synthesis
    leg and defaults to plan. Passing out_plan = plan.shifted(i) or a plan
    targeting an evaluation lattice gives the shifted/off-grid variants
    used by the semigroup derivative formulas.
    """
    if not plan.self_dual:
        raise ValueError("analysis plan must have target == source")
    if out_plan is None:
        out_plan = plan
    if not out_plan.source.compatible(plan.source):
        raise ValueError("synthesis plan source differs from analysis target")
    coeffs = hankel_apply(plan, f)
    mult = np.asarray(m(plan.source.modulus()), dtype=float)
    if not np.all(np.isfinite(mult)):
        raise ValueError("multiplier is singular on the spectral grid")
    return GridFunction(out_plan.target, _contract(out_plan.matrices, mult * coeffs.values))


def hankel_eval(alpha, f, points):
    """h_alpha f evaluated at arbitrary points of R_+^d.

    points has shape (m, d) (or (m,) for d = 1). Direct quadrature against
    the eigenfunction kernel; O(m * n^d), meant for modest m.
    """
    if not isinstance(alpha, MultiIndexAlpha):
        alpha = MultiIndexAlpha(alpha)
    pts = np.asarray(points, dtype=float)
    if alpha.d == 1 and pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != alpha.d:
        raise ValueError("points must have shape (m, %d)" % alpha.d)
    g = f.grid
    acc = None
    for j, a in enumerate(alpha.alpha):
        K = scaled_j(a - 0.5, np.multiply.outer(pts[:, j], g.axes[j]))
        K *= (g.base_weights[j] * g.axes[j] ** (2.0 * a))[None, :]
        if acc is None:
            acc = np.tensordot(K, f.values, axes=(1, 0))  # (m, n2, ..., nd)
        else:
            # contract axis j of the remaining tensor against the point index
            acc = np.einsum("ms,ms...->m...", K, acc)
    return acc
