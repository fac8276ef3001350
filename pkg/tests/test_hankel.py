import numpy as np
import pytest

from bessel_riesz.families import make_family
from bessel_riesz.grids import GridFunction, MultiIndexAlpha, build_grid, lp_norm
from bessel_riesz.hankel import (
    HankelPlan,
    hankel_apply,
    hankel_apply_stack,
    hankel_eval,
    multiplier_apply,
    phi,
)

GAUSS_LAW_CASES = [
    (MultiIndexAlpha([0.0]), 0.8),
    (MultiIndexAlpha([2.3]), 0.8),
    (MultiIndexAlpha([0.5, 1.0]), 1.1),
]


def gaussian(grid, a):
    return GridFunction(grid, np.exp(-a * grid.modulus() ** 2))


@pytest.mark.parametrize("alpha,a", GAUSS_LAW_CASES)
def test_gaussian_law(alpha, a, grid_of, plan_of):
    # closed form: the transform of exp(-a|x|^2) is
    # (2a)^{-(|alpha|+d/2)} exp(-|x|^2/(4a))
    g = grid_of(alpha)
    out = hankel_apply(plan_of(alpha), gaussian(g, a))
    pref = (2 * a) ** -(alpha.total + alpha.d / 2)
    ref = pref * np.exp(-g.modulus() ** 2 / (4 * a))
    assert np.max(np.abs(out.values - ref)) < 1e-9


def test_gaussian_fixed_point(grid_of, plan_of):
    alpha = MultiIndexAlpha([1.0])
    g = grid_of(alpha)
    f = gaussian(g, 0.5)
    out = hankel_apply(plan_of(alpha), f)
    assert np.max(np.abs(out.values - f.values)) < 1e-10


@pytest.mark.parametrize("a", [0.0, 0.5, 1.0, 2.3])
def test_involution_and_plancherel_d1(a, grid_of, plan_of):
    alpha = MultiIndexAlpha([a])
    plan = plan_of(alpha)
    fam = make_family("gaussian", plan, trials=4, seed=1234)
    for k in range(4):
        f = fam.member(plan.source, k)
        hf = hankel_apply(plan, f)
        hhf = hankel_apply(plan, hf)
        nf = lp_norm(f, 2)
        assert lp_norm(hhf - f, 2) <= 1e-6 * nf
        assert abs(lp_norm(hf, 2) - nf) <= 1e-6 * nf


def test_involution_d2(grid_of, plan_of):
    alpha = MultiIndexAlpha([0.5, 2.3])
    plan = plan_of(alpha)
    fam = make_family("gaussian", plan, trials=2, seed=9)
    f = fam.member(plan.source, 0)
    hhf = hankel_apply(plan, hankel_apply(plan, f))
    assert lp_norm(hhf - f, 2) <= 1e-6 * lp_norm(f, 2)


def test_stack_matches_single(plan_of):
    alpha = MultiIndexAlpha([0.5])
    plan = plan_of(alpha)
    fam = make_family("gaussian", plan, trials=3, seed=7)
    stacked = hankel_apply_stack(plan, fam.values)
    for k in range(3):
        single = hankel_apply(plan, fam.member(plan.source, k))
        # same contraction, different BLAS path: last-bit differences only
        assert np.allclose(stacked[k], single.values, rtol=1e-12, atol=1e-15)


def test_multiplier_reproduces_heat_law(plan_of):
    alpha = MultiIndexAlpha([0.5])
    plan = plan_of(alpha)
    g = plan.source
    a, t = 0.7, 0.3
    f = gaussian(g, a)
    out = multiplier_apply(plan, f, lambda s: np.exp(-t * s * s))
    shrink = 4 * a * t + 1
    ref = shrink ** -(alpha.total + 0.5) * np.exp(-a * g.modulus() ** 2 / shrink)
    assert np.max(np.abs(out.values - ref)) < 1e-9


def test_shifted_plan_uses_shifted_measure(plan_of):
    # h_{a+1} of exp(-r^2/2) must follow the Gaussian law at order a+1
    alpha = MultiIndexAlpha([0.7])
    plan = plan_of(alpha).shifted(0)
    g = plan.source
    out = hankel_apply(plan, gaussian(g, 0.5))
    ref = np.exp(-g.modulus() ** 2 / 2)
    assert np.max(np.abs(out.values - ref)) < 1e-10
    assert plan.alpha.alpha == (1.7,)
    assert plan_of(alpha).shifted(0) is plan  # memoized


def test_hankel_eval_matches_grid_nodes(plan_of):
    alpha = MultiIndexAlpha([1.0])
    plan = plan_of(alpha)
    g = plan.source
    f = gaussian(g, 0.9)
    on_grid = hankel_apply(plan, f)
    idx = [3, 50, 120]
    pts = g.axes[0][idx]
    off = hankel_eval(alpha, f, pts)
    assert np.allclose(off, on_grid.values[idx], rtol=1e-12, atol=1e-14)


def test_hankel_eval_d2(grid_of):
    alpha = MultiIndexAlpha([0.5, 1.0])
    g = grid_of(alpha)
    f = gaussian(g, 0.7)
    pts = np.array([[0.3, 0.4], [1.0, 2.0], [2.5, 0.1]])
    vals = hankel_eval(alpha, f, pts)
    pref = (2 * 0.7) ** -(alpha.total + 1.0)
    ref = pref * np.exp(-(pts**2).sum(axis=1) / (4 * 0.7))
    assert np.allclose(vals, ref, rtol=1e-8, atol=1e-12)


def test_phi_basics():
    assert phi([0.5, 1.0], [1.0, 2.0], [0.3, 0.4]) == phi([0.5, 1.0], [0.3, 0.4], [1.0, 2.0])
    # at the origin each factor hits 1/(2^mu Gamma(mu+1)); alpha=1 -> mu=1/2
    assert phi([1.0], [0.0], [1.0]) == pytest.approx(np.sqrt(2 / np.pi), rel=1e-13)
    assert phi([0.5], [0.0], [1.0]) == pytest.approx(1.0, rel=1e-14)


def test_nyquist_rejection():
    alpha = MultiIndexAlpha([0.0])
    g = build_grid(alpha, 16, 8.0, profile="uniform")
    with pytest.raises(ValueError, match="undersampled"):
        HankelPlan(alpha, g)


def test_grid_mismatch_rejected(plan_of, grid_of):
    alpha = MultiIndexAlpha([0.5])
    other = build_grid(alpha, 96, 5.0)
    f = GridFunction(other, np.ones(other.shape))
    with pytest.raises(ValueError):
        hankel_apply(plan_of(alpha), f)
