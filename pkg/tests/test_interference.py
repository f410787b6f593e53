import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import wrong_sign_fit
from relayblock.errors import InvalidMomentsError, InvalidParameterError, SingularGeometryError
from relayblock.geometry import Hexagon, Point2D, build_layout, make_quadrature, sample_uniform
from relayblock.interference import (
    IsrModel,
    LinkGeometry,
    LinkKind,
    ShadowingSpec,
    fit_link,
    isr_cdf,
    isr_moments,
    isr_sf,
    link_geometries,
    lognormal_fit,
    sample_isr_exact,
    shadow_ratio_moments,
    spatial_moments,
)

TABLE_SHADOW = {
    LinkKind.BS_MS: ShadowingSpec(8.0, 8.0),
    LinkKind.BS_RS: ShadowingSpec(4.0, 4.0),
    LinkKind.RS_MS: ShadowingSpec(8.0, 8.0),
}


def table_geometries():
    return link_geometries(build_layout(1732.0), 3.5, TABLE_SHADOW)


def hermite_shadow_moments(s, si, n=60):
    """E[C], E[C^2], E[C_i C_j] by tensor Gauss-Hermite over the three normals."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    a = math.log(10) / 10
    xi = s * x[:, None, None]
    xi1 = si * x[None, :, None]
    xi2 = si * x[None, None, :]
    W = w[:, None, None] * w[None, :, None] * w[None, None, :]
    c1 = np.exp(a * (xi1 - xi))
    c2 = np.exp(a * (xi2 - xi))
    return (W * c1).sum(), (W * c1**2).sum(), (W * c1 * c2).sum()


@pytest.mark.parametrize("s,si", [(0.0, 0.0), (4.0, 4.0), (8.0, 8.0), (3.0, 6.0)])
def test_shadow_moments_against_hermite(s, si):
    cm = shadow_ratio_moments(ShadowingSpec(s, si))
    e_c, e_c2, e_cc = hermite_shadow_moments(s, si)
    assert cm.e_c == pytest.approx(e_c, rel=1e-9)
    assert cm.e_c2 == pytest.approx(e_c2, rel=1e-9)
    assert cm.e_cc == pytest.approx(e_cc, rel=1e-9)


def test_fixed_target_moments_are_deterministic_sums():
    g = table_geometries()[LinkKind.BS_RS]
    b = g.path_loss_ratios([g.target_point])[0]
    sm = spatial_moments(g)
    assert sm.mean_sum_b == pytest.approx(b.sum(), rel=1e-14)
    assert sm.mean_sum_b_sq == pytest.approx(b.sum() ** 2, rel=1e-14)
    assert sm.mean_sum_bsq == pytest.approx(np.sum(b**2), rel=1e-14)


@pytest.mark.parametrize("kind", [LinkKind.BS_MS, LinkKind.RS_MS])
def test_spatial_moments_against_area_sampling(kind):
    g = table_geometries()[kind]
    sm = spatial_moments(g)
    pts = sample_uniform(g.target_region, np.random.default_rng(11), 1_000_000)
    b = g.path_loss_ratios(pts)
    s = b.sum(axis=1)
    assert sm.mean_sum_b == pytest.approx(s.mean(), rel=5e-3)
    assert sm.mean_sum_b_sq == pytest.approx(np.mean(s * s), rel=5e-3)
    assert sm.mean_sum_bsq == pytest.approx(np.mean(np.sum(b * b, axis=1)), rel=5e-3)


def test_quadrature_for_other_region_rejected():
    g = table_geometries()[LinkKind.BS_MS]
    other = make_quadrature(Hexagon(Point2D(1.0, 0.0), 10.0))
    with pytest.raises(InvalidParameterError):
        spatial_moments(g, other)


def test_rs_ms_matches_bs_ms_under_same_offset_interferers():
    # same-offset RSs form a translated copy of the BS lattice
    models = {k: fit_link(g) for k, g in table_geometries().items()}
    assert models[LinkKind.RS_MS].m1 == pytest.approx(models[LinkKind.BS_MS].m1, rel=1e-9)
    assert models[LinkKind.RS_MS].m2 == pytest.approx(models[LinkKind.BS_MS].m2, rel=1e-9)


def test_nearest_rs_interferers_raise_interference():
    layout = build_layout(1732.0)
    same = link_geometries(layout, 3.5, TABLE_SHADOW)[LinkKind.RS_MS]
    near = link_geometries(layout, 3.5, TABLE_SHADOW, rsms_interferers="nearest")[LinkKind.RS_MS]
    assert spatial_moments(near).mean_sum_b > spatial_moments(same).mean_sum_b


@given(mu=st.floats(-12, 6), sigma=st.floats(0.0, 3.0))
def test_lognormal_fit_round_trip(mu, sigma):
    m1 = math.exp(mu + sigma**2 / 2)
    m2 = math.exp(2 * mu + 2 * sigma**2)
    fit = lognormal_fit(m1, m2)
    assert fit.mu_i == pytest.approx(mu, abs=1e-10)
    assert fit.sigma_i == pytest.approx(sigma, abs=1e-7 if sigma < 1e-3 else 1e-10)


def test_flipped_sign_fit_does_not_round_trip():
    mu, sigma = -1.0, 1.2
    m1, m2 = math.exp(mu + sigma**2 / 2), math.exp(2 * mu + 2 * sigma**2)
    bad_mu, _ = wrong_sign_fit(m1, m2)
    # off by ln(m2), far outside the round-trip tolerance
    assert abs(bad_mu - mu) == pytest.approx(abs(math.log(m2)))
    assert abs(bad_mu - mu) > 0.5


@pytest.mark.parametrize("m1,m2", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (2.0, 3.0)])
def test_lognormal_fit_rejects_impossible_moments(m1, m2):
    with pytest.raises(InvalidMomentsError):
        lognormal_fit(m1, m2)


def test_degenerate_fit_is_a_step():
    fit = lognormal_fit(2.0, 4.0)
    assert fit.sigma_i == 0.0
    assert isr_cdf(fit, 2.0) == 1.0
    assert isr_cdf(fit, 1.999) == 0.0
    assert isr_sf(fit, 2.0) == 0.0


def test_cdf_domain():
    m = IsrModel(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        isr_cdf(m, 0.0)
    assert isr_cdf(m, 1.0) == pytest.approx(0.5)


@given(x=st.lists(st.floats(1e-6, 1e6), min_size=2, max_size=20))
def test_cdf_monotone_and_complementary(x):
    m = IsrModel(-1.3, 2.1, 1.0, 1.0)
    xs = np.sort(np.asarray(x))
    F = isr_cdf(m, xs)
    assert np.all(np.diff(F) >= 0)
    np.testing.assert_allclose(F + isr_sf(m, xs), 1.0, atol=1e-15)


def test_beta_at_most_two_rejected():
    g = table_geometries()[LinkKind.BS_MS]
    with pytest.raises(InvalidParameterError):
        LinkGeometry(g.kind, g.serving_node, g.interferer_positions, 2.0, g.shadowing, target_region=g.target_region)


def test_interferer_inside_region_is_singular():
    region = Hexagon(Point2D(0.0, 0.0), 100.0)
    with pytest.raises(SingularGeometryError):
        LinkGeometry(LinkKind.BS_MS, Point2D(0, 0), [[10.0, 0.0]], 3.5, ShadowingSpec(8, 8), target_region=region)


def test_fixed_target_on_interferer_is_singular():
    with pytest.raises(SingularGeometryError):
        LinkGeometry(
            LinkKind.BS_RS, Point2D(0, 0), [[5.0, 5.0]], 3.5, ShadowingSpec(4, 4), target_point=Point2D(5.0, 5.0)
        )


def test_zero_shadowing_fixed_target_gives_zero_sigma():
    layout = build_layout(1732.0)
    g = link_geometries(layout, 3.5, {k: ShadowingSpec(0.0, 0.0) for k in LinkKind})[LinkKind.BS_RS]
    assert fit_link(g).sigma_i == 0.0


def test_exact_sampler_is_seeded():
    g = table_geometries()[LinkKind.BS_MS]
    a = sample_isr_exact(g, 5, 1000)
    b = sample_isr_exact(g, 5, 1000)
    np.testing.assert_array_equal(a, b)
    assert isinstance(sample_isr_exact(g, 5), float)


def test_moment_chain_matches_sampling_at_moderate_size():
    # the 1e7-sample version lives in the acceptance suite
    for kind, g in table_geometries().items():
        m1, m2 = isr_moments(spatial_moments(g), shadow_ratio_moments(g.shadowing))
        x = sample_isr_exact(g, 21, 400_000)
        assert abs(x.mean() - m1) < 4 * x.std() / math.sqrt(len(x)), kind
