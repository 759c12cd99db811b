#pragma once

#include "nsp/operators.hpp"
#include "nsp/spectral_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nsp {

/// Viscosities, background density and dimension. The pressure law is fixed
/// to P(rho) = rho^2 / 2 (gamma = 2).
struct FluidParams {
    double mu = 1.0;
    double lambda = 0.0;
    double rho_bar = 1.0;
    int dim = 3;

    static constexpr double gamma = 2.0;

    /// (2 mu + lambda) / rho_bar, diffusivity of the compressible part.
    double nu_c() const { return (2.0 * mu + lambda) / rho_bar; }
    /// mu / rho_bar, diffusivity of the incompressible part.
    double nu_i() const { return mu / rho_bar; }
    double bulk() const { return 2.0 * mu + lambda; }

    void validate() const
    {
        if (dim != 2 && dim != 3)
            throw std::invalid_argument("params: dimension must be 2 or 3");
        if (!(mu > 0.0))
            throw std::invalid_argument("params: need mu > 0 and 2 mu + N lambda >= 0 (mu = "
                                        + std::to_string(mu) + ")");
        if (!(2.0 * mu + dim * lambda >= 0.0))
            throw std::invalid_argument("params: need mu > 0 and 2 mu + N lambda >= 0 (2 mu + N lambda = "
                                        + std::to_string(2.0 * mu + dim * lambda) + ")");
        if (!(rho_bar > 0.0) || !std::isfinite(rho_bar))
            throw std::invalid_argument("params: rho_bar must be positive");
        if (!(nu_c() > 0.0) || !(nu_i() > 0.0))
            throw std::invalid_argument("params: diffusivities must be positive");
    }
};

/// Reformulated state: h = Lambda^{-1}(rho - rho_bar), c = Lambda^{-1} div u,
/// I = Lambda^{-1} curl u (antisymmetric, strict upper triangle stored).
struct NspState {
    SpectralField h;
    SpectralField c;
    SpectralField incompressible;
    double t = 0.0;

    explicit NspState(const Grid& grid)
        : h(grid, 1), c(grid, 1), incompressible(grid, antisymmetric_components(grid.dim()))
    {
    }

    const Grid& grid() const { return h.grid(); }

    NspState& operator+=(const NspState& o)
    {
        h += o.h;
        c += o.c;
        incompressible += o.incompressible;
        return *this;
    }
    NspState& operator-=(const NspState& o)
    {
        h -= o.h;
        c -= o.c;
        incompressible -= o.incompressible;
        return *this;
    }
    NspState& operator*=(double a)
    {
        h *= a;
        c *= a;
        incompressible *= a;
        return *this;
    }

    /// Combined L^2 norm of (h, c, I).
    double l2_norm() const
    {
        return std::sqrt(h.l2_norm() * h.l2_norm() + c.l2_norm() * c.l2_norm()
                         + incompressible.l2_norm() * incompressible.l2_norm());
    }

    bool all_finite() const { return h.all_finite() && c.all_finite() && incompressible.all_finite(); }
};

/// Velocity u = -Lambda^{-1} grad c - Lambda^{-1} div I.
inline SpectralField velocity(const NspState& s) { return helmholtz_recompose({s.c, s.incompressible}); }

/// theta = rho - rho_bar = Lambda h.
inline SpectralField density_perturbation(const NspState& s) { return apply_lambda(s.h, 1.0); }

/// Primitive variables on the physical grid.
struct PrimitiveState {
    PhysicalField rho;
    PhysicalField u;
    PhysicalField phi;

    explicit PrimitiveState(const Grid& grid) : rho(grid, 1), u(grid, grid.dim()), phi(grid, 1) {}
};

inline constexpr double kMassTolerance = 1e-12;

inline NspState from_primitive(const PrimitiveState& p, const FluidParams& params)
{
    const Grid& g = p.rho.grid();
    for (double r : p.rho.component(0))
        if (!(r > 0.0))
            throw std::invalid_argument("from_primitive: density must be positive everywhere");
    if (std::abs(p.rho.mean() - params.rho_bar) > kMassTolerance * params.rho_bar)
        throw MeanNotZeroError("from_primitive: mean density differs from rho_bar");
    PhysicalField theta(g, 1);
    auto src = p.rho.component(0);
    auto dst = theta.component(0);
    for (std::size_t i = 0; i < g.size(); ++i)
        dst[i] = src[i] - params.rho_bar;
    SpectralField theta_hat = to_spectral(theta);
    theta_hat(0, 0) = 0.0;

    NspState s(g);
    s.h = apply_lambda(theta_hat, -1.0);
    auto pair = helmholtz_decompose(to_spectral(p.u));
    s.c = std::move(pair.c);
    s.incompressible = std::move(pair.incompressible);
    return s;
}

inline PrimitiveState to_primitive(const NspState& s, const FluidParams& params)
{
    const Grid& g = s.grid();
    PrimitiveState p(g);
    const SpectralField theta = density_perturbation(s);
    p.rho = to_physical(theta);
    for (double& r : p.rho.component(0))
        r += params.rho_bar;
    p.u = to_physical(velocity(s));
    p.phi = to_physical(poisson_solve(theta));
    return p;
}

/// Density clamp used to keep the viscous quotient Lipschitz:
/// rho_bar/4 below rho_bar/4, identity on [rho_bar/2, 3 rho_bar/2],
/// 7 rho_bar/4 above 7 rho_bar/4, cubic Hermite in between (C^1, monotone).
inline double zeta(double x, double rho_bar)
{
    const double a = 0.25 * rho_bar;
    const double b = 0.5 * rho_bar;
    const double c = 1.5 * rho_bar;
    const double d = 1.75 * rho_bar;
    if (x <= a)
        return a;
    if (x >= d)
        return d;
    if (x >= b && x <= c)
        return x;
    auto hermite = [](double x0, double x1, double y0, double y1, double m0, double m1, double x) {
        const double h = x1 - x0;
        const double t = (x - x0) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1
               + (t3 - t2) * h * m1;
    };
    if (x < b)
        return hermite(a, b, a, b, 0.0, 1.0, x);
    return hermite(c, d, c, d, 1.0, 0.0, x);
}

enum class Quotient { unguarded, guarded };

struct NonlinearOptions {
    Quotient quotient = Quotient::guarded;
    bool dealias = true;
};

/// Everything the right-hand side of the reformulated system needs at one
/// state, sharing the grid transforms.
struct NonlinearTerms {
    SpectralField convection_h;  // Lambda^{-1}(u . grad Lambda h)
    SpectralField convection_c;  // u . grad c
    SpectralField F;             // -Lambda^{-1}(Lambda h div u)
    SpectralField J;             // u . grad u + theta / (rho_bar zeta) (mu Lap u + (mu + lambda) grad div u)
    SpectralField G;             // u . grad c - Lambda^{-1} div J
    SpectralField H;             // -Lambda^{-1} curl J
    double min_density = 0.0;    // min over grid of Lambda h + rho_bar
    double max_density = 0.0;
    bool guard_active = false;   // zeta differed from the identity somewhere
};

namespace detail {

inline SpectralField finish_product(PhysicalField&& prod, bool dealias)
{
    SpectralField out = to_spectral(prod);
    if (dealias)
        out.dealias();
    return out;
}

}  // namespace detail

inline NonlinearTerms evaluate_nonlinear(const NspState& s, const FluidParams& params,
                                         NonlinearOptions opts = {})
{
    const Grid& g = s.grid();
    const int n = g.dim();
    const std::size_t size = g.size();

    const SpectralField u_hat = velocity(s);
    const SpectralField theta_hat = density_perturbation(s);
    const SpectralField divu_hat = divergence(u_hat);

    SpectralField visc_hat = laplacian(u_hat);
    visc_hat *= params.mu;
    visc_hat.add_scaled(params.mu + params.lambda, gradient(divu_hat));

    // every factor goes through one packed inverse transform
    // layout: u | theta | div u | grad theta | grad c | grad u (i * n + j = d_j u_i) | viscous term
    const int o_u = 0, o_theta = n, o_divu = n + 1, o_gt = n + 2, o_gc = 2 * n + 2, o_gu = 3 * n + 2,
              o_visc = n * n + 3 * n + 2;
    SpectralField packed(g, n * n + 4 * n + 2);
    for (int i = 0; i < n; ++i) {
        packed.assign_component(o_u + i, u_hat, i);
        packed.assign_component(o_visc + i, visc_hat, i);
    }
    packed.assign_component(o_theta, theta_hat);
    packed.assign_component(o_divu, divu_hat);
    {
        const SpectralField gt = gradient(theta_hat);
        const SpectralField gc = gradient(s.c);
        for (int j = 0; j < n; ++j) {
            packed.assign_component(o_gt + j, gt, j);
            packed.assign_component(o_gc + j, gc, j);
        }
    }
    for (int i = 0; i < n; ++i) {
        const SpectralField gi = gradient(u_hat, i);
        for (int j = 0; j < n; ++j)
            packed.assign_component(o_gu + i * n + j, gi, j);
    }
    const PhysicalField phys = to_physical(packed);
    auto u = [&](int j, std::size_t p) { return phys(o_u + j, p); };

    NonlinearTerms out{SpectralField(g), SpectralField(g), SpectralField(g), SpectralField(g, n),
                       SpectralField(g), SpectralField(g, antisymmetric_components(n))};

    // products: conv theta | conv c | theta div u | J (n)
    PhysicalField prod(g, n + 3);
    double rmin = std::numeric_limits<double>::infinity();
    double rmax = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < size; ++p) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < n; ++j) {
            a += u(j, p) * phys(o_gt + j, p);
            b += u(j, p) * phys(o_gc + j, p);
        }
        const double theta = phys(o_theta, p);
        prod(0, p) = a;
        prod(1, p) = b;
        prod(2, p) = theta * phys(o_divu, p);
        const double rho = theta + params.rho_bar;
        rmin = std::min(rmin, rho);
        rmax = std::max(rmax, rho);
        double denom = rho;
        if (opts.quotient == Quotient::guarded) {
            denom = zeta(rho, params.rho_bar);
            out.guard_active = out.guard_active || denom != rho;
        }
        const double q = theta / (params.rho_bar * denom);
        for (int i = 0; i < n; ++i) {
            double w = 0.0;
            for (int j = 0; j < n; ++j)
                w += u(j, p) * phys(o_gu + i * n + j, p);
            prod(3 + i, p) = w + q * phys(o_visc + i, p);
        }
    }
    out.min_density = rmin;
    out.max_density = rmax;
    if (opts.quotient == Quotient::unguarded && rmin < 0.5 * params.rho_bar)
        throw std::domain_error("nonlinear terms: density below rho_bar/2 with the unguarded quotient");

    const SpectralField spec = detail::finish_product(std::move(prod), opts.dealias);
    out.convection_h = apply_lambda(spec.slice(0, 1), -1.0);
    out.convection_c = spec.slice(1, 1);
    out.F = apply_lambda(spec.slice(2, 1), -1.0);
    out.F *= -1.0;
    out.J = spec.slice(3, n);
    out.G = out.convection_c - lambda_inv_divergence(out.J);
    out.H = lambda_inv_curl(out.J);
    out.H *= -1.0;
    return out;
}

/// F = -Lambda^{-1}(Lambda h div u).
inline SpectralField nonlinear_F(const NspState& s, bool dealias = true)
{
    auto pt = to_physical(density_perturbation(s));
    const auto pd = to_physical(divergence(velocity(s)));
    auto a = pt.component(0);
    auto b = pd.component(0);
    for (std::size_t p = 0; p < a.size(); ++p)
        a[p] *= b[p];
    SpectralField out = apply_lambda(detail::finish_product(std::move(pt), dealias), -1.0);
    out *= -1.0;
    return out;
}

inline SpectralField nonlinear_J(const NspState& s, const FluidParams& params, Quotient q, bool dealias = true)
{
    return evaluate_nonlinear(s, params, {q, dealias}).J;
}

inline SpectralField nonlinear_G(const NspState& s, const FluidParams& params, Quotient q, bool dealias = true)
{
    return evaluate_nonlinear(s, params, {q, dealias}).G;
}

inline SpectralField nonlinear_H(const NspState& s, const FluidParams& params, Quotient q, bool dealias = true)
{
    return evaluate_nonlinear(s, params, {q, dealias}).H;
}

}  // namespace nsp
