#pragma once

#include "nsp/friedrichs_stepper.hpp"
#include "nsp/harness/config.hpp"
#include "nsp/littlewood_paley.hpp"
#include "nsp/nsp_model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace nsp::harness {

/// ||rho0 - rho_bar||_{B~^{N/2-5/2, N/2}} + ||u0||_{B~^{N/2-3/2, N/2-1}}.
inline double data_size(const NspState& s)
{
    const double half = 0.5 * s.grid().dim();
    return lp::hybrid_norm(density_perturbation(s), {half - 2.5, half})
           + lp::hybrid_norm(velocity(s), {half - 1.5, half - 1.0});
}

namespace detail {

inline bool in_band(const Grid& g, std::size_t p, const InitSpec& init)
{
    if (p == 0 || g.is_nyquist(p))
        return false;
    const double m = std::sqrt(static_cast<double>(g.lattice_norm_sq(p)));
    return m >= init.band_lo && m <= init.band_hi;
}

// Seeded complex Gaussian coefficients on the band, made Hermitian.
inline SpectralField random_band_field(const Grid& g, int comps, const InitSpec& init, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    SpectralField f(g, comps);
    for (int c = 0; c < comps; ++c) {
        auto coeffs = f.component(c);
        for (std::size_t p = 0; p < g.size(); ++p) {
            if (!in_band(g, p, init))
                continue;
            const double re = normal(rng);
            const double im = normal(rng);
            double w = 1.0;
            if (init.decay > 0.0)
                w = std::exp(-static_cast<double>(g.lattice_norm_sq(p)) / (2.0 * init.decay * init.decay));
            coeffs[p] = complex(re, im) * w;
        }
    }
    f.make_hermitian();
    return f;
}

inline void scale_to_linf(PhysicalField& f, double target)
{
    const double m = f.linf_norm();
    if (m > 0.0)
        for (double& v : f.values())
            v *= target / m;
}

}  // namespace detail

/// Raw (unscaled, unprojected) state of the requested kind.
inline NspState raw_initial_data(const RunConfig& cfg)
{
    const Grid g = cfg.grid();
    if (cfg.init.kind == InitKind::file) {
        Checkpoint ck = read_checkpoint(cfg.init.file);
        if (!(ck.state.grid() == g))
            throw ConfigError("checkpoint grid does not match grid.N / grid.M / grid.L", 0, "init.file");
        ck.state.t = 0.0;
        return std::move(ck.state);
    }

    if (cfg.init.kind == InitKind::single_mode && cfg.init.fields != InitFields::all
        && cfg.init.fields != InitFields::hc)
        throw ConfigError("single-mode data only populates rho; use init.fields = all or hc", 0, "init.fields");

    PrimitiveState prim(g);
    const double rb = cfg.params.rho_bar;
    if (cfg.init.kind == InitKind::single_mode) {
        auto rho = prim.rho.component(0);
        for (std::size_t p = 0; p < g.size(); ++p)
            rho[p] = rb + 0.1 * rb * std::cos(g.dk() * g.coordinate(p, 0));
    } else {
        std::size_t count = 0;
        for (std::size_t p = 0; p < g.size(); ++p)
            count += detail::in_band(g, p, cfg.init) ? 1 : 0;
        if (count == 0)
            throw ConfigError("random band contains no lattice point", 0, "init.band_lo");
        std::mt19937_64 rng(cfg.init.seed);
        const SpectralField theta_hat = detail::random_band_field(g, 1, cfg.init, rng);
        const SpectralField u_hat = detail::random_band_field(g, g.dim(), cfg.init, rng);
        PhysicalField theta = to_physical(theta_hat);
        PhysicalField u = to_physical(u_hat);
        // keep the raw field well inside the positivity region before conversion
        detail::scale_to_linf(theta, 0.1 * rb);
        detail::scale_to_linf(u, 0.1);
        auto rho = prim.rho.component(0);
        for (std::size_t p = 0; p < g.size(); ++p)
            rho[p] = rb + theta(0, p);
        prim.u = u;
    }
    // from_primitive drops the rounding-level zero mode of rho - rho_bar
    NspState s = from_primitive(prim, cfg.params);
    switch (cfg.init.fields) {
    case InitFields::all:
        break;
    case InitFields::hc:
        s.incompressible *= 0.0;
        break;
    case InitFields::c:
        s.h *= 0.0;
        s.incompressible *= 0.0;
        break;
    case InitFields::incompressible:
        s.h *= 0.0;
        s.c *= 0.0;
        break;
    }
    return s;
}

/// Initial state: generated, converted, projected with J_n, then rescaled so
/// data_size equals the requested amplitude.
inline NspState make_initial_data(const RunConfig& cfg)
{
    NspState s = raw_initial_data(cfg);
    const FriedrichsProjector proj(s.grid(), cfg.stepper.n, cfg.stepper.dealias);
    s = proj.apply(std::move(s));
    s.t = 0.0;
    const double measured = data_size(s);
    if (cfg.init.amplitude == 0.0) {
        s *= 0.0;
        return s;
    }
    if (!(measured > 0.0))
        throw ConfigError("initial data vanish after projection; band empty on this grid", 0, "init.band_hi");
    s *= cfg.init.amplitude / measured;
    const auto rho = to_physical(density_perturbation(s));
    for (double v : rho.component(0))
        if (!(v + cfg.params.rho_bar > 0.0))
            throw ConfigError("amplitude too large: initial density is not positive", 0, "init.amplitude");
    return s;
}

}  // namespace nsp::harness
