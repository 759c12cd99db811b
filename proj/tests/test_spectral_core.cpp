#include "support.hpp"

#include <gtest/gtest.h>

using namespace nsp;
using namespace nsp::testing;

TEST(Grid, RejectsBadShapes)
{
    EXPECT_THROW(Grid(1, 16), std::invalid_argument);
    EXPECT_THROW(Grid(4, 16), std::invalid_argument);
    EXPECT_THROW(Grid(3, 12), std::invalid_argument);
    EXPECT_THROW(Grid(2, 4), std::invalid_argument);
    EXPECT_THROW(Grid(2, 16, 0.0), std::invalid_argument);
    EXPECT_NO_THROW(Grid(2, 8));
}

TEST(Grid, LatticeTables)
{
    const Grid g(3, 8, 4.0);
    EXPECT_EQ(g.size(), 512u);
    EXPECT_DOUBLE_EQ(g.dk(), 2.0 * std::numbers::pi / 4.0);
    EXPECT_DOUBLE_EQ(g.dx(), 0.5);
    EXPECT_DOUBLE_EQ(g.volume(), 64.0);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto m = g.lattice(p);
        EXPECT_EQ(g.index_of(m), p);
        std::int64_t sq = 0;
        bool nyq = false;
        for (int a = 0; a < 3; ++a) {
            EXPECT_GE(m[a], -4);
            EXPECT_LT(m[a], 4);
            sq += m[a] * m[a];
            nyq = nyq || m[a] == -4;
            EXPECT_DOUBLE_EQ(g.xi(p, a), g.dk() * m[a]);
        }
        EXPECT_EQ(g.lattice_norm_sq(p), sq);
        EXPECT_NEAR(g.xi_norm(p), g.dk() * std::sqrt(double(sq)), 1e-14);
        EXPECT_EQ(g.is_nyquist(p), nyq);
        if (!nyq) {
            const auto mm = g.lattice(g.mirror(p));
            for (int a = 0; a < 3; ++a)
                EXPECT_EQ(mm[a], -m[a]);
        }
        const bool band = std::abs(m[0]) <= 2 && std::abs(m[1]) <= 2 && std::abs(m[2]) <= 2;
        EXPECT_EQ(g.in_dealias_band(p), band);
    }
}

TEST(Transform, MatchesDirectSum)
{
    const Grid g(2, 8, 3.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    PhysicalField f(g, 1);
    for (double& v : f.values())
        v = u(rng);
    const SpectralField fh = to_spectral(f);
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (g.is_nyquist(p)) {
            EXPECT_EQ(fh(0, p), complex{});
            continue;
        }
        const auto ref = direct_coefficient(f, p);
        EXPECT_NEAR(std::abs(fh(0, p) - ref), 0.0, 1e-14);
    }
}

TEST(Transform, PairedComponentsMatchSingle)
{
    const Grid g(3, 16);
    std::mt19937_64 rng(5);
    const SpectralField v = random_field(g, 3, rng, 1, 7);
    const PhysicalField pv = to_physical(v);
    for (int c = 0; c < 3; ++c) {
        const PhysicalField single = to_physical(v.slice(c, 1));
        const double scale = single.linf_norm();
        for (std::size_t p = 0; p < g.size(); ++p)
            EXPECT_NEAR(pv(c, p), single(0, p), 1e-15 * scale);
    }
    const SpectralField back = to_spectral(pv);
    EXPECT_LT(max_diff(back, v), 1e-15);
    EXPECT_LT(back.hermitian_defect(), 1e-15);
}

TEST(Transform, ParsevalAndSampledWaves)
{
    const Grid g(3, 16, 2.0);
    const PhysicalField f = sample_waves(g, {{{1, 2, 0}, 0.7, 0.3}, {{0, -3, 5}, 0.2, -1.1}});
    const SpectralField fh = to_spectral(f);
    // each cosine splits into two conjugate coefficients of half the amplitude
    EXPECT_NEAR(std::abs(fh(0, g.index_of({1, 2, 0}))), 0.35, 1e-14);
    EXPECT_NEAR(std::arg(fh(0, g.index_of({1, 2, 0}))), 0.3, 1e-13);
    EXPECT_NEAR(std::abs(fh(0, g.index_of({0, 3, -5}))), 0.1, 1e-14);
    EXPECT_NEAR(f.l2_norm(), fh.l2_norm(), 1e-13);
    EXPECT_NEAR(f.l2_norm() * f.l2_norm(), g.volume() * (0.7 * 0.7 + 0.2 * 0.2) / 2.0, 1e-12);
}

TEST(SpectralField, HermitianHelpers)
{
    const Grid g(2, 16);
    std::mt19937_64 rng(3);
    SpectralField f = random_field(g, 2, rng);
    EXPECT_LT(f.hermitian_defect(), 1e-16);
    f(0, g.index_of({2, 1, 0})) += complex(0.0, 0.5);
    EXPECT_GT(f.hermitian_defect(), 0.1);
    f.make_hermitian();
    EXPECT_LT(f.hermitian_defect(), 1e-16);
    f(1, g.index_of({-8, 3, 0})) = 1.0;
    EXPECT_FALSE(f.nyquist_is_zero());
    f.zero_nyquist();
    EXPECT_TRUE(f.nyquist_is_zero());
}

TEST(SpectralField, DealiasKeepsTwoThirds)
{
    const Grid g(2, 16);
    SpectralField f(g, 1);
    for (std::size_t p = 0; p < g.size(); ++p)
        f(0, p) = 1.0;
    f.dealias();
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto m = g.lattice(p);
        const bool keep = std::abs(m[0]) <= 5 && std::abs(m[1]) <= 5;
        EXPECT_EQ(f(0, p) != complex{}, keep);
    }
}

TEST(Operators, AnalyticDerivatives)
{
    const Grid g(2, 16);
    // f = sin(2x) cos(3y)
    PhysicalField f(g, 1), fx(g, 1), fy(g, 1);
    for (std::size_t q = 0; q < g.size(); ++q) {
        const double x = g.coordinate(q, 0), y = g.coordinate(q, 1);
        f(0, q) = std::sin(2 * x) * std::cos(3 * y);
        fx(0, q) = 2 * std::cos(2 * x) * std::cos(3 * y);
        fy(0, q) = -3 * std::sin(2 * x) * std::sin(3 * y);
    }
    const SpectralField fh = to_spectral(f);
    EXPECT_LT(max_diff(to_physical(laplacian(fh)), to_physical(-13.0 * fh)), 1e-12);
    const PhysicalField grad = to_physical(gradient(fh));
    EXPECT_LT(max_diff(PhysicalField(to_physical(gradient(fh).slice(0, 1))), fx), 1e-12);
    EXPECT_LT(max_diff(PhysicalField(to_physical(gradient(fh).slice(1, 1))), fy), 1e-12);
    EXPECT_EQ(grad.components(), 2);
    // one wavenumber shell: Lambda^s is multiplication by sqrt(13)^s
    for (double s : {-1.0, 0.5, 1.0, 2.0, 3.7}) {
        SpectralField expect = fh;
        expect *= std::pow(std::sqrt(13.0), s);
        EXPECT_LT(max_diff(apply_lambda(fh, s), expect), 1e-12) << s;
    }
}

TEST(Operators, LambdaZeroModeConvention)
{
    const Grid g(3, 8);
    SpectralField f(g, 1);
    f(0, 0) = 2.0;
    f(0, g.index_of({1, 0, 0})) = 1.0;
    f(0, g.index_of({-1, 0, 0})) = 1.0;
    EXPECT_EQ(apply_lambda(f, 0.0)(0, 0), complex(2.0));
    EXPECT_EQ(apply_lambda(f, 1.5)(0, 0), complex{});
    EXPECT_EQ(apply_lambda(f, -1.0)(0, 0), complex{});
    EXPECT_THROW(apply_lambda(f, std::nan("")), std::invalid_argument);
    EXPECT_THROW(apply_lambda(f, INFINITY), std::invalid_argument);
}

TEST(Operators, LambdaGroupProperty)
{
    const Grid g(3, 16, 5.0);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const SpectralField f = random_field(g, 1, rng, 1, 6);
        std::uniform_real_distribution<double> u(-2.5, 2.5);
        const double a = u(rng), b = u(rng);
        const SpectralField lhs = apply_lambda(apply_lambda(f, a), b);
        const SpectralField rhs = apply_lambda(f, a + b);
        EXPECT_LT(max_diff(lhs, rhs), 1e-11 * (1.0 + rhs.max_abs()));
        EXPECT_LT(max_diff(apply_lambda(apply_lambda(f, a), -a), f), 1e-12);
    }
}

TEST(Operators, CurlConvention)
{
    const Grid g(3, 8);
    // u = (0, sin x, 0): d_0 u_1 = cos x, so (curl u)_{10} = cos x and the stored (0,1) entry is -cos x
    PhysicalField u(g, 3);
    for (std::size_t q = 0; q < g.size(); ++q)
        u(1, q) = std::sin(g.coordinate(q, 0));
    const SpectralField w = curl(to_spectral(u));
    const PhysicalField pw = to_physical(w);
    for (std::size_t q = 0; q < g.size(); ++q) {
        EXPECT_NEAR(pw(antisymmetric_slot(0, 1, 3), q), -std::cos(g.coordinate(q, 0)), 1e-13);
        EXPECT_NEAR(pw(antisymmetric_slot(0, 2, 3), q), 0.0, 1e-13);
        EXPECT_NEAR(pw(antisymmetric_slot(1, 2, 3), q), 0.0, 1e-13);
    }
    EXPECT_EQ(antisymmetric_slot(0, 1, 3), 0);
    EXPECT_EQ(antisymmetric_slot(0, 2, 3), 1);
    EXPECT_EQ(antisymmetric_slot(1, 2, 3), 2);
    EXPECT_EQ(antisymmetric_components(2), 1);
}

TEST(Operators, VectorIdentities)
{
    for (int dim : {2, 3}) {
        const Grid g(dim, 16);
        std::mt19937_64 rng(23 + dim);
        for (int trial = 0; trial < 10; ++trial) {
            const SpectralField f = random_field(g, 1, rng, 1, 6);
            const SpectralField u = random_field(g, dim, rng, 1, 6);
            EXPECT_LT(curl(gradient(f)).max_abs(), 1e-12);
            EXPECT_LT(max_diff(divergence(gradient(f)), laplacian(f)), 1e-10);
            EXPECT_LT(divergence(divergence_antisymmetric(curl(u))).max_abs(), 1e-10);
        }
    }
}

TEST(Operators, PoissonSolve)
{
    const Grid g(3, 16, 3.0);
    std::mt19937_64 rng(29);
    const SpectralField theta = random_field(g, 1, rng, 1, 5);
    const SpectralField phi = poisson_solve(theta);
    EXPECT_LT(max_diff(laplacian(phi), theta), 1e-12);
    EXPECT_EQ(phi(0, 0), complex{});
    SpectralField charged = theta;
    charged(0, 0) = 0.1;
    EXPECT_THROW(poisson_solve(charged), MeanNotZeroError);
    EXPECT_TRUE(is_mean_free(theta));
    EXPECT_FALSE(is_mean_free(charged));
}

// Helmholtz split, property-checked on random mean-free vector fields.
TEST(Helmholtz, RoundTripOrthogonalityAndDivDiv)
{
    for (int dim : {2, 3}) {
        const Grid g(dim, 16);
        std::mt19937_64 rng(31 + dim);
        for (int trial = 0; trial < 25; ++trial) {
            const SpectralField u = random_field(g, dim, rng, 1, 7);
            const HelmholtzPair hp = helmholtz_decompose(u);
            const SpectralField back = helmholtz_recompose(hp);
            EXPECT_LT((back - u).l2_norm(), 1e-10 * u.l2_norm());
            // the two parts -Lambda^{-1} grad c and -Lambda^{-1} div I are L^2-orthogonal
            const SpectralField pc = apply_lambda(gradient(hp.c), -1.0) * -1.0;
            const SpectralField pi = apply_lambda(divergence_antisymmetric(hp.incompressible), -1.0) * -1.0;
            const PhysicalField a = to_physical(pc), b = to_physical(pi);
            double dot = 0.0;
            for (std::size_t i = 0; i < a.values().size(); ++i)
                dot += a.values()[i] * b.values()[i];
            dot *= g.volume() / double(g.size());
            EXPECT_LT(std::abs(dot), 1e-10 * u.l2_norm() * u.l2_norm());
            EXPECT_LT(divergence(divergence_antisymmetric(hp.incompressible)).max_abs(), 1e-12);
            EXPECT_LT(divergence(pi).max_abs(), 1e-12);
            EXPECT_LT(curl(pc).max_abs(), 1e-12);
            // |c|^2 + |I|^2 (upper triangle) carries the energy of u
            EXPECT_NEAR(hp.c.l2_norm() * hp.c.l2_norm() + hp.incompressible.l2_norm() * hp.incompressible.l2_norm(),
                        u.l2_norm() * u.l2_norm(), 1e-10 * u.l2_norm() * u.l2_norm());
        }
    }
}

TEST(Helmholtz, RejectsMean)
{
    const Grid g(2, 8);
    SpectralField u(g, 2);
    u(1, 0) = 0.3;
    EXPECT_THROW(helmholtz_decompose(u), MeanNotZeroError);
    EXPECT_THROW(helmholtz_decompose(SpectralField(g, 1)), std::invalid_argument);
}
