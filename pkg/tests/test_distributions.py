import math

import numpy as np
import pytest
from scipy import integrate

from probkg.distributions import (
    K_MAX,
    Dirichlet,
    Gaussian,
    Gmm,
    Histogram,
    affine,
    as_gmm,
    cdf,
    cdf_values,
    coarsen,
    convolve,
    equal_probability_grid,
    family_of,
    format_distribution,
    fuse,
    jsd,
    jsd_auto,
    jsd_lower_bound,
    mean_of,
    moments,
    parse_distribution,
    pdf_values,
    pooled_grid,
    prob_mass,
    quantiles,
    reduce_components,
    variance_of,
)
from probkg.errors import (
    BadDistribution,
    BadGrid,
    BadInterval,
    DimensionMismatch,
    EdgesMismatch,
    FamilyMismatch,
    UnsupportedFamily,
    UnsupportedMethod,
    ZeroScale,
)
from probkg.oracle import quad_jsd

LN2 = math.log(2.0)

N01 = Gaussian((0.0,), (1.0,))
N11 = Gaussian((1.0,), (1.0,))


def gmm1(*pairs):
    """gmm1((w, mu, var), ...) -> 1-d mixture."""
    ws = tuple(p[0] for p in pairs)
    comps = tuple(Gaussian((p[1],), (p[2],)) for p in pairs)
    return Gmm(ws, comps)


def random_gmm(rng, k=None, spread=4.0):
    k = k if k is not None else int(rng.integers(1, 4))
    w = rng.uniform(0.1, 1.0, k)
    w /= w.sum()
    return gmm1(
        *(
            (float(w[i]), float(rng.uniform(-spread, spread)), float(rng.uniform(0.3, 2.0)))
            for i in range(k)
        )
    )


# --- literals -------------------------------------------------------------------


class TestLiterals:
    @pytest.mark.parametrize(
        "text",
        [
            "gmm(1.0:N(80,1))",
            "gmm(0.5:N(0,1);0.5:N(10,2.5))",
            "gmm(0.25:N(-3.5e-2,1e-4);0.75:N(2,9))",
            "hist(0,1,2|0.75,0.25)",
            "hist(-1.5,0,1.5,3|0.2,0.3,0.5)",
            "dir(1,1,1)",
            "dir(0.5,2,3.25)",
        ],
    )
    def test_round_trip_is_exact(self, text):
        d = parse_distribution(text)
        assert parse_distribution(format_distribution(d)) == d

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "N(0,1)",  # bare Gaussians are not literals; wrap in gmm(...)
            "gmm()",
            "gmm(1.0:N(0,1)",
            "gmm(1.0:N(0 , 1))",  # no whitespace allowed
            "gmm(one:N(0,1))",
            "hist(0,1|0.5,0.5)",  # B+1 edges for B masses
            "hist(0,1,2|)",
            "dir()",
            "uniform(0,1)",
        ],
    )
    def test_malformed_literals_rejected(self, text):
        with pytest.raises(BadDistribution):
            parse_distribution(text)

    def test_format_preserves_17_digits(self):
        d = gmm1((1.0, 0.1 + 0.2, 1.0 / 3.0))
        again = parse_distribution(format_distribution(d))
        assert again.components[0].mean[0] == 0.1 + 0.2
        assert again.components[0].var[0] == 1.0 / 3.0

    def test_constructor_validation(self):
        with pytest.raises(BadDistribution):
            Gmm((0.5, 0.0), (N01, N11))  # weights strictly positive
        with pytest.raises(BadDistribution):
            Gmm((1.0,), (Gaussian((0.0,), (-1.0,)),))  # variance > 0
        with pytest.raises(BadDistribution):
            Histogram((0.0, 1.0), (0.5, 0.5))  # edge/mass count mismatch
        with pytest.raises(BadDistribution):
            Histogram((1.0, 0.0), (1.0,))  # edges must increase
        with pytest.raises(BadDistribution):
            Dirichlet((1.0, 0.0))  # alphas strictly positive

    def test_weights_and_masses_normalize_on_construction(self):
        g = Gmm((1.0, 3.0), (N01, N11))
        assert g.weights == (0.25, 0.75)
        h = Histogram((0.0, 1.0, 2.0), (3.0, 1.0))
        assert h.masses == (0.75, 0.25)

    def test_component_cap_enforced(self):
        with pytest.raises(BadDistribution):
            Gmm(
                (1.0,) * (K_MAX + 1),
                tuple(Gaussian((float(i),), (1.0,)) for i in range(K_MAX + 1)),
            )

    def test_family_names(self):
        assert family_of(N01) == "gmm"
        assert family_of(parse_distribution("hist(0,1|1)")) == "hist"
        assert family_of(Dirichlet((1.0, 2.0))) == "dir"


# --- convolution ----------------------------------------------------------------


class TestConvolve:
    def test_gaussian_pair_closed_form(self):
        out = convolve(N11, Gaussian((2.0,), (4.0,)))
        assert out.weights == (1.0,)
        assert out.components[0].mean[0] == pytest.approx(3.0, abs=1e-15)
        assert out.components[0].var[0] == pytest.approx(5.0, abs=1e-15)

    def test_near_delta_is_a_shift(self):
        d = gmm1((0.5, 0.0, 1.0), (0.5, 4.0, 1.0))
        shifted = convolve(d, Gaussian((2.0,), (1e-12,)))
        for x in (-1.0, 0.5, 2.0, 4.5, 7.0):
            assert cdf(shifted, x) == pytest.approx(
                float(cdf_values(d, np.array([x - 2.0]))[0]), abs=1e-6
            )

    def test_mixture_with_gaussian_cdf_goldens(self):
        # cdf values of gmm(0.5:N(0,1);0.5:N(4,1)) (+) N(1,1), frozen from a
        # 1e-12 quadrature of the defining integral
        out = convolve(gmm1((0.5, 0.0, 1.0), (0.5, 4.0, 1.0)), N11)
        assert cdf(out, 0.0) == pytest.approx(0.11997676855109961, abs=1e-6)
        assert cdf(out, 2.0) == pytest.approx(0.3885986828344341, abs=1e-6)
        assert cdf(out, 5.0) == pytest.approx(0.7488305662547383, abs=1e-6)

    def test_moments_add(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a, b = random_gmm(rng), random_gmm(rng)
            out = convolve(a, b)
            assert mean_of(out) == pytest.approx(mean_of(a) + mean_of(b), abs=1e-9)
            assert variance_of(out) == pytest.approx(
                variance_of(a) + variance_of(b), abs=1e-9
            )

    def test_component_budget_respected(self):
        rng = np.random.default_rng(8)
        a = random_gmm(rng, k=9)
        b = random_gmm(rng, k=9)
        out = convolve(a, b)  # 81 products before reduction
        assert len(out.components) <= K_MAX
        assert sum(out.weights) == pytest.approx(1.0, abs=1e-12)

    def test_histograms_unsupported(self):
        with pytest.raises(UnsupportedFamily):
            convolve(N01, parse_distribution("hist(0,1|1)"))


# --- fusion ---------------------------------------------------------------------


class TestFuse:
    def test_equal_gaussians_halve_variance(self):
        out = fuse(N01, N01)
        assert len(out.components) == 1
        assert out.components[0].mean[0] == pytest.approx(0.0, abs=1e-15)
        assert out.components[0].var[0] == pytest.approx(0.5, abs=1e-15)

    def test_disagreeing_gaussians_meet_in_the_middle(self):
        out = fuse(N01, Gaussian((2.0,), (1.0,)))
        assert out.components[0].mean[0] == pytest.approx(1.0, abs=1e-12)
        assert out.components[0].var[0] == pytest.approx(0.5, abs=1e-12)

    def test_two_by_two_matches_normalized_product(self):
        a = gmm1((0.6, 0.0, 1.0), (0.4, 3.0, 2.0))
        b = gmm1((0.5, 1.0, 1.0), (0.5, 2.0, 4.0))
        out = fuse(a, b)

        def product(x):
            return pdf_values(a, np.atleast_1d(x))[0] * pdf_values(
                b, np.atleast_1d(x)
            )[0]

        z, _ = integrate.quad(product, -12.0, 16.0, epsabs=1e-13, epsrel=1e-13)
        xs = np.linspace(-4.0, 8.0, 100)
        want = np.array([product(x) / z for x in xs])
        got = pdf_values(out, xs)
        assert np.max(np.abs(got - want)) < 1e-6

    def test_weights_normalized(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            out = fuse(random_gmm(rng), random_gmm(rng))
            assert sum(out.weights) == pytest.approx(1.0, abs=1e-12)

    def test_histograms_unsupported(self):
        h = parse_distribution("hist(0,1|1)")
        with pytest.raises(UnsupportedFamily):
            fuse(h, h)


# --- affine maps ----------------------------------------------------------------


class TestAffine:
    def test_celsius_to_fahrenheit(self):
        out = affine(Gaussian((80.0,), (1.0,)), 1.8, 32.0)
        c = as_gmm(out).components[0]
        assert c.mean[0] == pytest.approx(176.0, abs=1e-12)
        assert c.var[0] == pytest.approx(3.24, abs=1e-12)

    def test_histogram_mirror(self):
        h = Histogram((0.0, 1.0, 2.0), (0.75, 0.25))
        out = affine(h, -1.0, 0.0)
        assert out.edges == (-2.0, -1.0, 0.0)
        assert out.masses == (0.25, 0.75)

    def test_cdf_transform_law(self):
        d = gmm1((0.3, -1.0, 0.5), (0.7, 2.0, 1.5))
        out = affine(d, 2.5, -1.0)
        for x in (-4.0, 0.0, 3.0):
            assert cdf(out, 2.5 * x - 1.0) == pytest.approx(cdf(d, x), abs=1e-12)

    def test_zero_scale_rejected(self):
        with pytest.raises(ZeroScale):
            affine(N01, 0.0, 1.0)

    def test_dirichlet_rejected(self):
        with pytest.raises(UnsupportedFamily):
            affine(Dirichlet((1.0, 1.0)), 1.0, 0.0)


# --- interval masses and moments ------------------------------------------------


class TestProbMass:
    def test_standard_gaussian_right_half(self):
        assert prob_mass(N01, 0.0, math.inf) == pytest.approx(0.5, abs=1e-12)

    def test_whole_line_is_one(self):
        assert prob_mass(N01, -math.inf, math.inf) == 1.0

    def test_separated_mixture_split(self):
        d = gmm1((0.5, 0.0, 1.0), (0.5, 10.0, 1.0))
        assert prob_mass(d, 5.0, math.inf) == pytest.approx(0.5, abs=1e-9)

    def test_histogram_partial_cell(self):
        h = Histogram((0.0, 1.0, 2.0), (0.75, 0.25))
        assert prob_mass(h, 0.0, 0.5) == pytest.approx(0.375, abs=1e-12)

    def test_empty_interval_rejected(self):
        with pytest.raises(BadInterval):
            prob_mass(N01, 1.0, 1.0)


class TestMoments:
    def test_gaussian(self):
        assert moments(Gaussian((80.0,), (1.0,))) == ((80.0,), (1.0,))

    def test_mixture_total_variance(self):
        mean, var = moments(gmm1((0.5, 0.0, 1.0), (0.5, 2.0, 1.0)))
        assert mean[0] == pytest.approx(1.0, abs=1e-12)
        assert var[0] == pytest.approx(2.0, abs=1e-12)

    def test_flat_dirichlet(self):
        mean, var = moments(Dirichlet((1.0, 1.0, 1.0)))
        assert mean == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-12)
        assert all(v > 0 for v in var)

    def test_values_are_plain_floats(self):
        # downstream expression typing is strict; numpy scalars must not leak
        for d in (
            gmm1((0.5, 0.0, 1.0), (0.5, 2.0, 1.0)),
            Histogram((0.0, 1.0), (1.0,)),
            Dirichlet((1.0, 2.0)),
        ):
            mean, var = moments(d)
            assert all(type(x) is float for x in mean + var)


# --- divergence ------------------------------------------------------------------


class TestJsd:
    def test_self_divergence_is_zero(self):
        d = gmm1((0.5, 0.0, 1.0), (0.5, 3.0, 2.0))
        assert jsd(d, d) == 0.0

    def test_disjoint_histograms_saturate(self):
        a = Histogram((0.0, 1.0, 2.0), (1.0, 0.0))
        b = Histogram((0.0, 1.0, 2.0), (0.0, 1.0))
        assert jsd(a, b, "closed") == pytest.approx(LN2, abs=1e-12)

    def test_unit_gaussians_one_apart_golden(self):
        got = jsd(as_gmm(N01), as_gmm(N11))
        assert got == pytest.approx(0.1114214821847362, abs=1e-6)

    def test_quadrature_agrees_with_reference_integrator(self):
        rng = np.random.default_rng(11)
        for _ in range(8):
            a, b = random_gmm(rng), random_gmm(rng)
            assert jsd(a, b) == pytest.approx(quad_jsd(a, b), abs=1e-6)

    def test_bounded_symmetric_nonnegative(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            a, b = random_gmm(rng), random_gmm(rng)
            v = jsd(a, b)
            assert 0.0 <= v <= LN2 + 1e-12
            assert v == pytest.approx(jsd(b, a), abs=1e-9)

    def test_closed_form_requires_matching_edges(self):
        a = Histogram((0.0, 1.0), (1.0,))
        b = Histogram((0.0, 2.0), (1.0,))
        with pytest.raises(EdgesMismatch):
            jsd(a, b, "closed")
        # quadrature handles the merged partition exactly
        assert jsd(a, b) == pytest.approx(quad_jsd(a, b), abs=1e-9)

    def test_closed_form_refuses_mixtures(self):
        with pytest.raises(UnsupportedMethod):
            jsd(as_gmm(N01), as_gmm(N11), "closed")

    def test_unknown_method_rejected(self):
        with pytest.raises(UnsupportedMethod):
            jsd(as_gmm(N01), as_gmm(N11), "monte-carlo")

    def test_cross_family_rejected(self):
        with pytest.raises(FamilyMismatch):
            jsd(as_gmm(N01), Histogram((0.0, 1.0), (1.0,)))

    def test_dirichlet_rejected(self):
        with pytest.raises(UnsupportedFamily):
            jsd(Dirichlet((1.0, 1.0)), Dirichlet((2.0, 1.0)))

    def test_auto_routes_by_shape(self):
        a = Histogram((0.0, 1.0, 2.0), (0.75, 0.25))
        b = Histogram((0.0, 1.0, 2.0), (0.25, 0.75))
        assert jsd_auto(a, b) == jsd(a, b, "closed")
        assert jsd_auto(as_gmm(N01), as_gmm(N11)) == jsd(as_gmm(N01), as_gmm(N11))


# --- grids, coarsening, pruning bound --------------------------------------------


class TestGrids:
    def test_equal_probability_cells(self):
        d = gmm1((0.5, 0.0, 1.0), (0.5, 6.0, 2.0))
        edges = equal_probability_grid(d, bins=32)
        assert edges.shape == (33,)
        assert np.all(np.diff(edges) > 0)
        c = cdf_values(d, edges)
        cell = np.diff(c)
        assert np.max(np.abs(cell - 0.999 / 32)) < 1e-6

    def test_pooled_grid_balances_the_pair(self):
        a = as_gmm(N01)
        b = gmm1((1.0, 8.0, 1.0))
        edges = pooled_grid(a, b, bins=16)
        pooled = 0.5 * (cdf_values(a, edges) + cdf_values(b, edges))
        cell = np.diff(pooled)
        assert np.max(np.abs(cell - 0.999 / 16)) < 1e-6

    def test_pooled_without_partner_is_single_grid(self):
        d = as_gmm(N01)
        assert np.allclose(pooled_grid(d, None), equal_probability_grid(d))

    def test_bad_parameters_rejected(self):
        with pytest.raises(BadGrid):
            pooled_grid(as_gmm(N01), None, bins=0)
        with pytest.raises(BadGrid):
            pooled_grid(as_gmm(N01), None, coverage=1.0)

    def test_quantiles_invert_the_cdf(self):
        d = gmm1((0.4, -2.0, 1.0), (0.6, 3.0, 4.0))
        ps = np.array([0.05, 0.25, 0.5, 0.75, 0.95])
        qs = quantiles(d, ps)
        assert np.all(np.diff(qs) > 0)
        assert np.max(np.abs(cdf_values(d, qs) - ps)) < 1e-8


class TestCoarsen:
    def test_gaussian_split_at_mean(self):
        h = coarsen(N01, (-8.0, 0.0, 8.0))
        assert h.masses[0] == pytest.approx(0.5, abs=1e-12)
        assert h.masses[1] == pytest.approx(0.5, abs=1e-12)

    def test_histogram_onto_own_edges_is_identity(self):
        h = Histogram((0.0, 1.0, 2.5, 4.0), (0.2, 0.5, 0.3))
        again = coarsen(h, h.edges)
        assert again.masses == pytest.approx(h.masses, abs=1e-15)

    def test_mixture_cells_are_interval_masses(self):
        d = gmm1((0.5, 0.0, 1.0), (0.5, 5.0, 2.0))
        edges = equal_probability_grid(d, bins=64)
        h = coarsen(d, edges)
        for i in range(1, 63):  # interior cells; tails fold into the end cells
            assert h.masses[i] == pytest.approx(
                prob_mass(d, float(edges[i]), float(edges[i + 1])), abs=1e-12
            )
        assert sum(h.masses) == pytest.approx(1.0, abs=1e-12)

    def test_tails_fold_into_outer_cells(self):
        h = coarsen(N01, (-1.0, 0.0, 1.0))
        assert h.masses[0] == pytest.approx(0.5, abs=1e-12)  # all mass below 0
        assert h.masses[1] == pytest.approx(0.5, abs=1e-12)

    def test_bad_grids_rejected(self):
        with pytest.raises(BadGrid):
            coarsen(N01, (0.0,))
        with pytest.raises(BadGrid):
            coarsen(N01, (0.0, 0.0, 1.0))
        with pytest.raises(UnsupportedFamily):
            coarsen(Dirichlet((1.0, 1.0)), (0.0, 1.0))


class TestPruningBound:
    def test_never_exceeds_true_divergence(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            a, b = random_gmm(rng), random_gmm(rng)
            grid = pooled_grid(a, b, bins=int(rng.choice([8, 16, 32])))
            assert jsd_lower_bound(a, b, grid) <= jsd(a, b) + 1e-9

    def test_refining_one_cell_never_loosens(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            a, b = random_gmm(rng), random_gmm(rng)
            grid = [float(x) for x in pooled_grid(a, b, bins=8)]
            before = jsd_lower_bound(a, b, grid)
            j = int(rng.integers(0, len(grid) - 1))
            refined = grid[: j + 1] + [0.5 * (grid[j] + grid[j + 1])] + grid[j + 1 :]
            after = jsd_lower_bound(a, b, refined)
            assert after >= before - 1e-12

    def test_saturated_pair_bound_is_sharp(self):
        a = as_gmm(N01)
        b = gmm1((1.0, 100.0, 1.0))
        grid = pooled_grid(a, b, bins=32)
        assert jsd_lower_bound(a, b, grid) == pytest.approx(LN2, abs=1e-6)


# --- component reduction ----------------------------------------------------------


class TestReduceComponents:
    def test_small_mixtures_pass_through(self):
        d = gmm1((0.5, 0.0, 1.0), (0.5, 3.0, 2.0))
        assert reduce_components(d) == d

    def test_budget_and_moment_preservation(self):
        rng = np.random.default_rng(15)
        w = rng.uniform(0.1, 1.0, K_MAX)
        w /= w.sum()
        big = gmm1(
            *(
                (float(w[i]), float(rng.uniform(-20, 20)), float(rng.uniform(0.3, 3.0)))
                for i in range(K_MAX)
            )
        )
        for k in (10, 3, 1):
            out = reduce_components(big, k)
            assert len(out.components) <= k
            assert sum(out.weights) == pytest.approx(1.0, abs=1e-12)
            assert mean_of(out) == pytest.approx(mean_of(big), rel=1e-9, abs=1e-9)
            assert variance_of(out) == pytest.approx(
                variance_of(big), rel=1e-9, abs=1e-9
            )

    def test_merging_identical_components_is_lossless(self):
        d = gmm1((0.5, 1.0, 2.0), (0.5, 1.0, 2.0))
        out = reduce_components(d, 1)
        assert out.components[0].mean[0] == pytest.approx(1.0, abs=1e-12)
        assert out.components[0].var[0] == pytest.approx(2.0, abs=1e-12)

    def test_bad_budget_rejected(self):
        with pytest.raises(BadDistribution):
            reduce_components(as_gmm(N01), 0)
