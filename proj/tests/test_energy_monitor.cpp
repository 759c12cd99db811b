#include "support.hpp"

#include <gtest/gtest.h>

using namespace nsp;
using namespace nsp::energy;
using namespace nsp::testing;

namespace {

FluidParams random_params(std::mt19937_64& rng, int dim)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FluidParams p;
    p.dim = dim;
    p.mu = std::exp(std::log(0.05) + u(rng) * std::log(40.0));
    // lambda in [-2 mu / N, 3 mu]
    p.lambda = -2.0 * p.mu / dim + u(rng) * (3.0 + 2.0 / dim) * p.mu;
    p.rho_bar = std::exp(std::log(0.1) + u(rng) * std::log(100.0));
    return p;
}

EnergyReport synthetic(double t, std::map<int, double> alpha_sq, double V = 0.0, double E = 0.0)
{
    EnergyReport r;
    r.t = t;
    r.V = V;
    r.E = E;
    for (const auto& [k, a] : alpha_sq) {
        ShellEnergy e;
        e.k = k;
        e.alpha_sq = a;
        r.shells.push_back(e);
    }
    return r;
}

}  // namespace

TEST(Constants, HandComputedValues)
{
    // mu = 1, lambda = 0, rho_bar = 1: b = 2
    const auto a = compute_constants(FluidParams{1.0, 0.0, 1.0, 3});
    EXPECT_DOUBLE_EQ(a.M1, 0.25);
    EXPECT_DOUBLE_EQ(a.M2, 0.15625);
    EXPECT_DOUBLE_EQ(a.K1, 0.125);
    EXPECT_DOUBLE_EQ(a.M3, 1.0);
    EXPECT_DOUBLE_EQ(a.K2, 0.5);
    // mu = 0.5, lambda = 0.5, rho_bar = 2: b = 1.5
    const auto b = compute_constants(FluidParams{0.5, 0.5, 2.0, 3});
    EXPECT_NEAR(b.M1, 0.17677669529663687, 1e-15);
    EXPECT_NEAR(b.M2, 0.41666666666666667, 1e-15);
    EXPECT_NEAR(b.K1, 0.088388347648318447, 1e-15);
    EXPECT_NEAR(b.M3, 0.1875, 1e-15);
    EXPECT_NEAR(b.K2, 0.09375, 1e-15);
    // rho_bar = 3, b = 0.1: the first branch of K1 is smaller
    const auto c = compute_constants(FluidParams{0.05, 0.0, 3.0, 2});
    EXPECT_NEAR(c.K1, 3.0 * 0.1 / (27.0 + 0.02), 1e-15);
    EXPECT_THROW(compute_constants(FluidParams{-1.0, 0.0, 1.0, 3}), std::invalid_argument);
}

TEST(Constants, FeasibilityAsPrinted)
{
    const FluidParams p{1.0, 0.0, 1.0, 3};
    const auto f = check_feasibility(p, compute_constants(p));
    EXPECT_NEAR(f.first, 73.0 / 64.0 - 10.0 / 9.0, 1e-15);
    EXPECT_NEAR(f.k1_below_m1, 0.125, 1e-15);
    EXPECT_NEAR(f.m1_below_cap, std::sqrt(3.0) / 8.0 - 0.25, 1e-15);
    EXPECT_NEAR(f.third, 2.0 - 0.125 - 0.8, 1e-15);
    EXPECT_NEAR(f.high, 0.5, 1e-15);
    EXPECT_TRUE(f.first_holds());
    EXPECT_TRUE(f.third_holds());
    EXPECT_TRUE(f.high_holds());
    // M1 = 1/(4 sqrt(rho_bar)) always sits above sqrt(3)/(8 sqrt(rho_bar))
    EXPECT_FALSE(f.second_holds());
    EXPECT_FALSE(f.all_hold());
}

TEST(Constants, SweepPropertiesOfTheChoice)
{
    std::mt19937_64 rng(100);
    for (int i = 0; i < 500; ++i) {
        const FluidParams p = random_params(rng, 2 + i % 2);
        ASSERT_NO_THROW(p.validate());
        const auto k = compute_constants(p);
        const auto f = check_feasibility(p, k);
        EXPECT_GT(k.K1, 0.0);
        EXPECT_LT(k.K1, k.M1);
        EXPECT_LT(k.K2, k.M3);
        EXPECT_NEAR(f.first, 73.0 / 64.0 - 10.0 / 9.0, 1e-13);
        EXPECT_NEAR(f.m1_below_cap * std::sqrt(p.rho_bar), std::sqrt(3.0) / 8.0 - 0.25, 1e-13);
        EXPECT_TRUE(f.third_holds()) << p.mu << " " << p.lambda << " " << p.rho_bar;
        EXPECT_TRUE(f.high_holds());
    }
}

TEST(Forms, PositiveDefiniteOnEveryShell)
{
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const FluidParams p = random_params(rng, 3);
        const auto kc = compute_constants(p);
        for (int k = -6; k <= 8; ++k) {
            const double r = std::exp2(k) * (0.75 + u(rng) * (8.0 / 3.0 - 0.75));
            const double lo = normalized_min_eigenvalue(k, r, p, kc);
            EXPECT_GT(lo, 0.0) << k << " " << r;
            const auto [a, b] = generalized_range(reference_form(k, r), shell_form(k, r, p, kc));
            EXPECT_GT(a, 0.0);
            EXPECT_LT(b, std::numeric_limits<double>::infinity());
        }
    }
}

TEST(ShellEnergy, SingleModeMatchesHandSum)
{
    const Grid g(3, 16, 3.0);
    const FluidParams p{0.7, 0.2, 1.3, 3};
    const auto kc = compute_constants(p);
    for (std::array<int, 3> m : {std::array<int, 3>{1, 0, 0}, {2, 1, 0}, {3, -2, 1}, {5, 4, 2}}) {
        NspState s(g);
        const std::size_t q = g.index_of(m);
        const complex h(0.3, -0.1), c(-0.2, 0.4);
        s.h(0, q) = h;
        s.h(0, g.mirror(q)) = std::conj(h);
        s.c(0, q) = c;
        s.c(0, g.mirror(q)) = std::conj(c);
        const double r = g.xi_norm(q);
        const auto shells = shell_energies(s, p, kc);
        double total_weight = 0.0;
        for (const auto& e : shells) {
            const double w = lp::CutoffProfile::phi(std::ldexp(r, -e.k));
            total_weight += w;
            const double rb = p.rho_bar, b = p.bulk();
            double q00, q01, q11;
            if (e.k <= 0) {
                q00 = (1 + r * r) / rb;
                q01 = -kc.K1 * r * r;
                q11 = 1.0;
            } else {
                q00 = (r + std::pow(r, 3)) / rb + b / (rb * rb) * kc.K2 * std::pow(r, 5);
                q01 = -kc.K2 * std::pow(r, 3);
                q11 = r;
            }
            const double form = q00 * std::norm(h) + q11 * std::norm(c) + 2 * q01 * (h * std::conj(c)).real();
            const double expect = 2.0 * w * w * g.volume() * form;
            EXPECT_NEAR(e.alpha_sq, expect, 1e-13 * std::max(1.0, expect)) << e.k;
            EXPECT_NEAR(e.h_sq, 2.0 * w * w * g.volume() * std::norm(h), 1e-14);
        }
        EXPECT_NEAR(total_weight, 1.0, 1e-12);
    }
}

TEST(ShellEnergy, NonNegativeAndEquivalentOnRandomStates)
{
    std::mt19937_64 rng(102);
    for (int trial = 0; trial < 8; ++trial) {
        const int dim = 2 + trial % 2;
        const Grid g(dim, 16, 2.0 + trial);
        const FluidParams p = random_params(rng, dim);
        const auto kc = compute_constants(p);
        const NspState s = random_state(g, rng, 1.0, 7);
        for (const auto& e : shell_energies(s, p, kc)) {
            if (e.h_sq + e.c_sq == 0.0)
                continue;
            EXPECT_GT(e.alpha_sq, 0.0);
            for (Reference ref : {Reference::block_sum, Reference::dyadic_weights}) {
                const auto [lo, hi] = equivalence_bounds(g, e.k, p, kc, ref);
                const double val = ref == Reference::block_sum ? e.reference_sq : e.weighted_sq;
                EXPECT_GE(val, lo * e.alpha_sq * (1 - 1e-10));
                EXPECT_LE(val, hi * e.alpha_sq * (1 + 1e-10));
            }
        }
        EXPECT_THROW(equivalence_bounds(g, 40, p, kc), std::invalid_argument);
    }
}

TEST(Damping, LinearFlowRespectsTheRateBound)
{
    for (int dim : {2, 3}) {
        const Grid g(dim, 16, 6.0);
        std::mt19937_64 rng(103 + dim);
        const FluidParams p = random_params(rng, dim);
        const auto kc = compute_constants(p);
        StepperConfig cfg;
        cfg.n = 100.0;
        cfg.dt = 0.05;
        cfg.t_end = 1.0;
        const NspState s0 = random_state(g, rng, 1.0, 7);
        EnergyMonitor mon(p, kc);
        RunOptions opts;
        opts.on_monitor = [&](const NspState& s, const StepReport& rep) { mon.observe(s, rep); };
        linear_reference_run(s0, cfg, p, opts);
        const double bound = damping_rate_bound(g, p, kc, cfg.dt);
        EXPECT_GT(bound, 0.0);
        const double fitted = fit_damping_constant(mon.reports(), 1e-12);
        EXPECT_GE(fitted, bound * (1 - 1e-9));
        for (const auto& [k, m] : damping_margin(mon.reports(), bound))
            EXPECT_LE(m, 1e-9 * std::sqrt(mon.reports().front().alpha_sq(k)) / cfg.dt) << k;
    }
}

TEST(Damping, WindowAndMarginArithmetic)
{
    std::vector<EnergyReport> w{synthetic(0.0, {{-1, 4.0}, {1, 1.0}}), synthetic(0.5, {{-1, 1.0}, {1, 0.25}})};
    EXPECT_THROW(damping_margin(w, 1.0), std::invalid_argument);
    EXPECT_THROW(fit_damping_constant(w), std::invalid_argument);
    w.push_back(synthetic(1.0, {{-1, 0.25}, {1, 0.0625}}));
    // shell -1: alpha 2 -> 1 -> 0.5, scale 1/4; shell 1: alpha 1 -> 0.5 -> 0.25, scale 1
    const double fit = fit_damping_constant(w);
    EXPECT_NEAR(fit, 1.0, 1e-15);
    const auto m = damping_margin(w, 1.0, {{-1, 0.1}});
    EXPECT_NEAR(m.at(1), 0.0, 1e-15);
    // worst pair for shell -1 is the second: -1 + 0.25 - 0.1
    EXPECT_NEAR(m.at(-1), -1.0 + 0.25 - 0.1, 1e-15);
}

TEST(Monitor, TrapezoidAccumulationAndMonotoneV)
{
    const Grid g(2, 16);
    const FluidParams p{1.0, 0.0, 1.0, 2};
    const auto kc = compute_constants(p);
    std::mt19937_64 rng(104);
    NspState s = random_state(g, rng, 0.1, 5);
    EnergyMonitor mon(p, kc);
    const auto& r0 = mon.observe(s);
    const double ub = r0.u_besov;
    EXPECT_EQ(r0.V, 0.0);
    EXPECT_NEAR(r0.E, initial_energy(s), 1e-14 * r0.E);
    s.t = 0.5;
    mon.observe(s);
    s.t = 2.0;
    const auto& r2 = mon.observe(s);
    EXPECT_NEAR(r2.V, 2.0 * ub, 1e-13 * ub);
    const auto idx = NormIndices::for_dim(2);
    const double integrand = lp::hybrid_norm(s.h, idx.h_int) + lp::hybrid_norm(velocity(s), idx.u_int);
    EXPECT_NEAR(r2.E, initial_energy(s) + 2.0 * integrand, 1e-12 * r2.E);
    EXPECT_NEAR(r2.smoothing_integral, 2.0 * r0.smoothing_integrand, 1e-12 * std::max(1.0, r2.smoothing_integral));
    EXPECT_NEAR(r2.mass, 0.0, 1e-15);

    StepperConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 0.2;
    cfg.n = 8.0;
    NspState small = random_state(g, rng, 1.0, 4);
    small *= 0.05 / to_physical(density_perturbation(small)).linf_norm();
    EnergyMonitor m2(p, kc);
    RunOptions opts;
    opts.on_monitor = [&](const NspState& st, const StepReport& rep) { m2.observe(st, rep); };
    run(small, cfg, p, opts);
    const auto V = accumulate_V(m2.reports());
    for (std::size_t i = 1; i < V.size(); ++i)
        EXPECT_GE(V[i], V[i - 1]);
    EXPECT_EQ(smoothing_integral(m2.reports()), m2.reports().back().smoothing_integral);
    EXPECT_GT(m2.reports().back().min_density, 0.9);
}

TEST(Monitor, DifferenceNorm)
{
    const Grid g(3, 8);
    std::mt19937_64 rng(105);
    const NspState a = random_state(g, rng, 1.0, 3);
    const NspState b = random_state(g, rng, 1.0, 3);
    DifferenceNorm same(3);
    EXPECT_EQ(same.observe(0.0, a, a), 0.0);
    EXPECT_EQ(same.observe(1.0, a, a), 0.0);
    DifferenceNorm d1(3), d2(3);
    NspState a2 = a, b2 = b;
    a2 *= 3.0;
    b2 *= 3.0;
    EXPECT_NEAR(d2.observe(0.0, a2, b2), 3.0 * d1.observe(0.0, a, b), 1e-12 * d2.observe(0.0, a2, b2));
    NspState diff = a;
    diff -= b;
    DifferenceNorm d3(3);
    EXPECT_NEAR(d3.observe(0.0, a, b), initial_energy(diff), 1e-13 * initial_energy(diff));
}

TEST(Bounds, GlobalCheckReweightAndEnvelopes)
{
    EstimateConstants kc;
    kc.A = 3.0;
    kc.C_tilde = 1.0;
    std::vector<EnergyReport> rs{synthetic(0, {}, 0, 1.0), synthetic(1, {}, 0, 2.9), synthetic(2, {}, 0, 2.0)};
    auto v = global_bound_check(rs, 1.0, kc);
    EXPECT_TRUE(v.pass);
    EXPECT_DOUBLE_EQ(v.max_ratio, 2.9);
    rs[1].E = 3.1;
    EXPECT_FALSE(global_bound_check(rs, 1.0, kc).pass);
    EXPECT_TRUE(global_bound_check({synthetic(0, {}, 0, 0.0)}, 0.0, kc).pass);
    EXPECT_FALSE(global_bound_check({synthetic(0, {}, 0, 1e-30)}, 0.0, kc).pass);

    auto rw = reweight({synthetic(0, {{0, 4.0}}, 0.0), synthetic(1, {{0, 4.0}}, 0.5)}, 2.0);
    EXPECT_DOUBLE_EQ(rw[0].alpha_sq(0), 4.0);
    EXPECT_NEAR(rw[1].alpha_sq(0), 4.0 * std::exp(-2.0), 1e-15);

    auto series = [](std::vector<double> a) {
        std::vector<EnergyReport> out;
        for (std::size_t i = 0; i < a.size(); ++i)
            out.push_back(synthetic(double(i), {{2, a[i] * a[i]}}));
        return out;
    };
    EXPECT_TRUE(envelopes_non_increasing(series({1.0, 0.5, 0.8, 0.3, 0.7, 0.1})));
    EXPECT_FALSE(envelopes_non_increasing(series({1.0, 0.5, 1.2, 0.3})));
    EXPECT_TRUE(envelopes_non_increasing({}));
}

TEST(Bounds, SmoothingMajorantFormula)
{
    const Grid g(2, 16);
    std::mt19937_64 rng(106);
    const NspState s = random_state(g, rng, 1.0, 5);
    const double data = lp::hybrid_norm(s.h, {0.0, 2.5}) + lp::hybrid_norm(s.c, {0.0, 0.5});
    EXPECT_NEAR(smoothing_majorant(s, 0.5, 0.25, 2.0), (2.0 + 1.0) * (data + 0.25), 1e-13 * data);
}

TEST(Bounds, SmoothingConstantCoversLinearFlow)
{
    const Grid g(2, 16);
    std::mt19937_64 rng(107);
    for (int trial = 0; trial < 4; ++trial) {
        const FluidParams p = random_params(rng, 2);
        NspState s0 = random_state(g, rng, 1e-3, 7);
        if (trial % 2)
            s0.h = SpectralField(g, 1);
        const auto kc = compute_constants(p);
        EnergyMonitor mon(p, kc);
        StepperConfig sc;
        sc.dt = 2e-3;
        sc.t_end = 0.5;
        RunOptions opts;
        opts.monitor_stride = 5;
        opts.on_monitor = [&](const NspState& s, const StepReport& r) { mon.observe(s, r); };
        const auto traj = linear_reference_run(s0, sc, p, opts);
        const double C = smoothing_constant_bound(g, p, traj.times);
        ASSERT_TRUE(std::isfinite(C));
        for (const auto& r : mon.reports())
            EXPECT_LE(r.smoothing_integral, smoothing_majorant(s0, r.V, 0.0, C)) << "trial " << trial << " t " << r.t;
    }
    EXPECT_THROW(smoothing_constant_bound(g, FluidParams{}, {0.0}), std::invalid_argument);
}
