#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace nsp;
using namespace nsp::testing;

namespace {

using cplx = std::complex<double>;
using M2 = std::array<std::array<cplx, 2>, 2>;

// exp(tA) for a real 2x2 A from the Cayley-Hamilton closed form
//   exp(tA) = e^{s t} (cosh(d t) I + sinh(d t)/d (A - s I)),  s = tr/2,  d^2 = s^2 - det
M2 closed_form_exp(double a, double b, double c, double e, double t)
{
    const double s = 0.5 * (a + e);
    const cplx d = std::sqrt(cplx(s * s - (a * e - b * c)));
    const cplx ch = std::cosh(d * t);
    const cplx sh = std::abs(d) < 1e-300 ? cplx(t) : std::sinh(d * t) / d;
    const double w = std::exp(s * t);
    return {{{w * (ch + sh * (a - s)), w * sh * b}, {w * sh * c, w * (ch + sh * (e - s))}}};
}

// (h, c) generator entries at |xi| = r
std::array<double, 4> generator(double r, const FluidParams& p)
{
    return {0.0, -p.rho_bar, r * r + 1.0, -p.bulk() / p.rho_bar * r * r};
}

NspState exact_linear(const NspState& s0, const FluidParams& p, double t, const FriedrichsProjector& proj)
{
    const Grid& g = s0.grid();
    NspState out = proj.apply(s0);
    for (std::size_t q = 1; q < g.size(); ++q) {
        if (!proj.keeps(q))
            continue;
        const double r = g.xi_norm(q);
        const auto [a, b, c, e] = generator(r, p);
        const M2 m = closed_form_exp(a, b, c, e, t);
        const cplx h = out.h(0, q), cc = out.c(0, q);
        out.h(0, q) = m[0][0].real() * h + m[0][1].real() * cc;
        out.c(0, q) = m[1][0].real() * h + m[1][1].real() * cc;
        const double heat = std::exp(-p.mu / p.rho_bar * r * r * t);
        for (int k = 0; k < out.incompressible.components(); ++k)
            out.incompressible(k, q) *= heat;
    }
    out.t = s0.t + t;
    return out;
}

double state_diff(const NspState& a, const NspState& b)
{
    return std::max({max_diff(a.h, b.h), max_diff(a.c, b.c), max_diff(a.incompressible, b.incompressible)});
}

}  // namespace

TEST(LinearBlock, PropagatorsMatchClosedForm)
{
    const Grid g(3, 16, 4.0);
    const FluidParams params{0.8, 0.3, 1.4, 3};
    for (double dt : {1e-3, 0.05, 0.7}) {
        const LinearBlock block(g, params, dt);
        for (std::size_t p = 1; p < g.size(); p += 7) {
            const double r = g.xi_norm(p);
            const auto [a, b, c, e] = generator(r, params);
            const M2 m = closed_form_exp(a, b, c, e, dt);
            const auto& prop = block.at(p);
            const double scale = std::max(1.0, prop.exp_a.cwiseAbs().maxCoeff());
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    EXPECT_NEAR(prop.exp_a(i, j), m[i][j].real(), 1e-12 * scale) << r << " " << dt;
                    EXPECT_NEAR(m[i][j].imag(), 0.0, 1e-12 * scale);
                }
            // dt phi_1(dt A) = A^{-1} (exp(dt A) - I)
            Mat2 gen;
            gen << a, b, c, e;
            const Mat2 phi1 = gen.inverse() * (prop.exp_a - Mat2::Identity());
            EXPECT_LT((phi1 - prop.phi1).cwiseAbs().maxCoeff(), 1e-11 * std::max(1.0, phi1.cwiseAbs().maxCoeff()));
            // dt phi_2(dt A) = A^{-1} (phi_1 - dt I) / dt
            const Mat2 phi2 = gen.inverse() * (prop.phi1 - dt * Mat2::Identity()) / dt;
            EXPECT_LT((phi2 - prop.phi2).cwiseAbs().maxCoeff(), 1e-9 * std::max(dt, phi2.cwiseAbs().maxCoeff()));
            const double z = params.mu / params.rho_bar * r * r * dt;
            EXPECT_NEAR(prop.heat_exp, std::exp(-z), 1e-14);
            EXPECT_NEAR(prop.heat_bdf2_inv, 1.0 / (3.0 + 2.0 * z), 1e-15);
        }
        EXPECT_LT(block.spectral_abscissa(), 0.0);
        EXPECT_EQ(block.at(0).exp_a, Mat2::Zero());
    }
    EXPECT_THROW(LinearBlock(g, params, 0.0), std::invalid_argument);
    EXPECT_THROW(LinearBlock(g, params, -1.0), std::invalid_argument);
}

TEST(Projector, MaskAndIdempotence)
{
    const Grid g(3, 16, 3.0);
    EXPECT_THROW(FriedrichsProjector(g, 1.0), std::invalid_argument);
    for (double n : {1.5, 3.0, 100.0})
        for (bool dealias : {false, true}) {
            const FriedrichsProjector proj(g, n, dealias);
            EXPECT_FALSE(proj.keeps(0));
            for (std::size_t p = 1; p < g.size(); ++p) {
                const double r = g.xi_norm(p);
                const bool expect = !g.is_nyquist(p) && r >= 1.0 / n && r <= n && (!dealias || g.in_dealias_band(p));
                EXPECT_EQ(proj.keeps(p), expect);
            }
            std::mt19937_64 rng(3);
            const SpectralField f = random_field(g, 2, rng, 0, 7);
            const SpectralField once = proj.apply(f);
            EXPECT_EQ(max_diff(proj.apply(once), once), 0.0);
            EXPECT_LE(once.l2_norm(), f.l2_norm());
        }
}

TEST(Stepper, LinearRunIsExactPerMode)
{
    for (int dim : {2, 3}) {
        const Grid g(dim, 16, 5.0);
        const FluidParams params{1.2, -0.2, 0.9, dim};
        std::mt19937_64 rng(40 + dim);
        const NspState s0 = random_state(g, rng, 1.0, 7);
        StepperConfig cfg;
        cfg.n = 6.0;
        cfg.dt = 0.01;
        cfg.t_end = 0.5;
        const auto traj = linear_reference_run(s0, cfg, params);
        const NspState exact = exact_linear(s0, params, 0.5, FriedrichsProjector(g, cfg.n, cfg.dealias));
        EXPECT_LT(state_diff(*traj.final_state, exact), 1e-11 * s0.l2_norm());
        EXPECT_EQ(traj.steps, 50u);
        // exact integration does not depend on the step
        cfg.dt = 0.1;
        const auto coarse = linear_reference_run(s0, cfg, params);
        EXPECT_LT(state_diff(*coarse.final_state, exact), 1e-11 * s0.l2_norm());
    }
}

TEST(Stepper, ZeroStateIsStationary)
{
    const Grid g(2, 16);
    const FluidParams params{1.0, 0.0, 1.0, 2};
    StepperConfig cfg;
    cfg.dt = 0.05;
    cfg.t_end = 0.5;
    for (Scheme sc : {Scheme::etdrk2, Scheme::imex_bdf2}) {
        cfg.scheme = sc;
        const auto traj = run(NspState(g), cfg, params);
        EXPECT_EQ(traj.final_state->l2_norm(), 0.0);
        EXPECT_FALSE(traj.guard_used);
        EXPECT_EQ(traj.min_density, 1.0);
    }
}

TEST(Stepper, MonitorSchedule)
{
    const Grid g(2, 8);
    const FluidParams params{1.0, 0.0, 1.0, 2};
    StepperConfig cfg;
    cfg.dt = 0.1;
    cfg.t_end = 1.05;
    EXPECT_EQ(step_count(cfg), 11u);
    std::vector<double> seen;
    RunOptions opts;
    opts.monitor_stride = 4;
    opts.on_monitor = [&](const NspState& s, const StepReport&) { seen.push_back(s.t); };
    const auto traj = run(NspState(g), cfg, params, opts);
    ASSERT_EQ(seen.size(), 4u);
    EXPECT_EQ(seen[0], 0.0);
    EXPECT_NEAR(seen[1], 0.4, 1e-15);
    EXPECT_NEAR(seen[2], 0.8, 1e-15);
    EXPECT_NEAR(seen[3], 1.1, 1e-15);
    EXPECT_EQ(traj.times, seen);
    cfg.t_end = 0.0;
    EXPECT_EQ(run(NspState(g), cfg, params).times.size(), 1u);
}

TEST(Stepper, SecondOrderInTime)
{
    const Grid g(2, 16);
    const FluidParams params{1.0, 0.0, 1.0, 2};
    std::mt19937_64 rng(50);
    NspState s0 = random_state(g, rng, 1.0, 4);
    s0 *= 0.05 / to_physical(density_perturbation(s0)).linf_norm();
    StepperConfig cfg;
    cfg.n = 8.0;
    cfg.t_end = 0.2;
    auto final_at = [&](double dt, Scheme sc) {
        cfg.dt = dt;
        cfg.scheme = sc;
        return *run(s0, cfg, params).final_state;
    };
    for (Scheme sc : {Scheme::etdrk2, Scheme::imex_bdf2}) {
        const NspState ref = final_at(0.2 / 256, Scheme::etdrk2);
        std::vector<double> err;
        for (double dt : {0.2 / 8, 0.2 / 16, 0.2 / 32}) {
            NspState d = final_at(dt, sc);
            d -= ref;
            err.push_back(d.l2_norm());
        }
        for (std::size_t i = 1; i < err.size(); ++i)
            EXPECT_GT(std::log2(err[i - 1] / err[i]), 1.8) << static_cast<int>(sc) << " " << err[i - 1] << " " << err[i];
    }
}

TEST(Stepper, StabilityChecks)
{
    const Grid g(2, 16);
    const FluidParams params{1.0, 0.0, 1.0, 2};
    std::mt19937_64 rng(60);
    NspState s = random_state(g, rng, 1.0, 3);
    StepperConfig cfg;
    cfg.dt = 1.0;
    cfg.t_end = 1.0;
    EXPECT_THROW(run(s, cfg, params), StabilityViolation);
    EXPECT_THROW(check_stability(s, cfg, false), NumericalAbort);
    cfg.nonlinear = false;
    EXPECT_NO_THROW(check_stability(s, cfg, true));
    cfg.nonlinear = true;
    cfg.dt = 0.5 * kStabilityMargin / convective_rate(s);
    EXPECT_NO_THROW(check_stability(s, cfg, true));
    EXPECT_THROW(Stepper(g, FluidParams{1.0, 0.0, 1.0, 3}, cfg), std::invalid_argument);
}

TEST(Checkpoint, RoundTripAndCorruption)
{
    const Grid g(3, 8, 2.5);
    const FluidParams params{0.9, 0.1, 1.1, 3};
    std::mt19937_64 rng(70);
    NspState s = random_state(g, rng, 1.0, 3);
    s.t = 0.375;
    const auto dir = std::filesystem::temp_directory_path() / ("nsp_ck_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "a.chk").string();
    write_checkpoint(path, s, params, 12.0);
    const Checkpoint ck = read_checkpoint(path);
    EXPECT_TRUE(ck.state.grid() == g);
    EXPECT_EQ(ck.state.t, 0.375);
    EXPECT_EQ(ck.n, 12.0);
    EXPECT_EQ(ck.params.mu, 0.9);
    EXPECT_EQ(ck.params.lambda, 0.1);
    EXPECT_EQ(ck.params.rho_bar, 1.1);
    EXPECT_EQ(state_diff(ck.state, s), 0.0);
    EXPECT_EQ(std::filesystem::file_size(path), 8u + 8 * 8 + 16 * g.size() * 5);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(3);
        f.put('X');
    }
    EXPECT_THROW(read_checkpoint(path), std::runtime_error);
    write_checkpoint(path, s, params, 12.0);
    std::filesystem::resize_file(path, 200);
    EXPECT_THROW(read_checkpoint(path), std::runtime_error);
    EXPECT_THROW(read_checkpoint((dir / "missing.chk").string()), std::runtime_error);
    std::filesystem::remove_all(dir);
}
