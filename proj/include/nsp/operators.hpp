#pragma once

#include "nsp/spectral_field.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nsp {

/// Raised when an operator's zero-mode precondition is violated
/// (nonzero mean where a mean-free field is required).
class MeanNotZeroError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Relative tolerance on the zero mode for fields that must be mean-free.
inline constexpr double kMeanFreeTolerance = 1e-10;

inline bool is_mean_free(const SpectralField& f, int c = 0)
{
    double energy = 0.0;
    for (const auto& z : f.component(c))
        energy += std::norm(z);
    return std::abs(f.mean(c)) <= kMeanFreeTolerance * std::sqrt(energy);
}

/// Number of independent entries of an antisymmetric N x N matrix.
constexpr int antisymmetric_components(int dim) { return dim * (dim - 1) / 2; }

/// Storage slot of entry (i, j), i < j, of an antisymmetric matrix field.
constexpr int antisymmetric_slot(int i, int j, int dim)
{
    // rows of the strict upper triangle laid out consecutively
    int slot = 0;
    for (int r = 0; r < i; ++r)
        slot += dim - 1 - r;
    return slot + (j - i - 1);
}

/// Entry (i, j) of an antisymmetric field at lattice point p.
inline complex antisymmetric_entry(const SpectralField& m, int i, int j, std::size_t p)
{
    if (i == j)
        return {};
    const int dim = m.grid().dim();
    return i < j ? m(antisymmetric_slot(i, j, dim), p) : -m(antisymmetric_slot(j, i, dim), p);
}

/// Multiply every component by a radial symbol sigma(|xi|); the zero mode gets `zero_mode`.
template <class Symbol>
SpectralField apply_radial(const SpectralField& f, Symbol&& sigma, double zero_mode)
{
    SpectralField out(f.grid(), f.components());
    const Grid& g = f.grid();
    for (int c = 0; c < f.components(); ++c) {
        auto src = f.component(c);
        auto dst = out.component(c);
        dst[0] = zero_mode * src[0];
        for (std::size_t p = 1; p < g.size(); ++p)
            dst[p] = g.is_nyquist(p) ? complex{} : sigma(g.xi_norm(p)) * src[p];
    }
    return out;
}

/// Lambda^s = F^{-1} |xi|^s F. The zero mode is annihilated for s != 0.
inline SpectralField apply_lambda(const SpectralField& f, double s)
{
    if (!std::isfinite(s))
        throw std::invalid_argument("apply_lambda: exponent must be finite");
    if (s == 0.0)
        return f;
    if (s == 1.0)
        return apply_radial(f, [](double r) { return r; }, 0.0);
    if (s == -1.0)
        return apply_radial(f, [](double r) { return 1.0 / r; }, 0.0);
    if (s == 2.0)
        return apply_radial(f, [](double r) { return r * r; }, 0.0);
    return apply_radial(f, [s](double r) { return std::pow(r, s); }, 0.0);
}

inline SpectralField laplacian(const SpectralField& f)
{
    return apply_radial(f, [](double r) { return -r * r; }, 0.0);
}

/// Gradient of a scalar field: N components, i xi fhat.
inline SpectralField gradient(const SpectralField& f, int c = 0)
{
    const Grid& g = f.grid();
    SpectralField out(g, g.dim());
    auto src = f.component(c);
    for (int a = 0; a < g.dim(); ++a) {
        auto dst = out.component(a);
        for (std::size_t p = 0; p < g.size(); ++p)
            dst[p] = complex(0.0, g.xi(p, a)) * src[p];
    }
    return out;
}

/// Divergence of an N-component vector field.
inline SpectralField divergence(const SpectralField& u)
{
    const Grid& g = u.grid();
    if (u.components() != g.dim())
        throw std::invalid_argument("divergence: expected a vector field");
    SpectralField out(g, 1);
    auto dst = out.component(0);
    for (std::size_t p = 0; p < g.size(); ++p) {
        complex s{};
        for (int a = 0; a < g.dim(); ++a)
            s += complex(0.0, g.xi(p, a)) * u(a, p);
        dst[p] = s;
    }
    return out;
}

/// (curl u)_{ij} = d_j u_i - d_i u_j, stored as the strict upper triangle.
inline SpectralField curl(const SpectralField& u)
{
    const Grid& g = u.grid();
    const int n = g.dim();
    if (u.components() != n)
        throw std::invalid_argument("curl: expected a vector field");
    SpectralField out(g, antisymmetric_components(n));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            auto dst = out.component(antisymmetric_slot(i, j, n));
            for (std::size_t p = 0; p < g.size(); ++p)
                dst[p] = complex(0.0, g.xi(p, j)) * u(i, p) - complex(0.0, g.xi(p, i)) * u(j, p);
        }
    return out;
}

/// Row divergence of an antisymmetric matrix field: (div I)_i = sum_j d_j I_{ij}.
inline SpectralField divergence_antisymmetric(const SpectralField& m)
{
    const Grid& g = m.grid();
    const int n = g.dim();
    if (m.components() != antisymmetric_components(n))
        throw std::invalid_argument("divergence_antisymmetric: expected an antisymmetric field");
    SpectralField out(g, n);
    for (int i = 0; i < n; ++i) {
        auto dst = out.component(i);
        for (std::size_t p = 0; p < g.size(); ++p) {
            complex s{};
            for (int j = 0; j < n; ++j)
                s += complex(0.0, g.xi(p, j)) * antisymmetric_entry(m, i, j, p);
            dst[p] = s;
        }
    }
    return out;
}

inline SpectralField lambda_inv_gradient(const SpectralField& f) { return apply_lambda(gradient(f), -1.0); }
inline SpectralField lambda_inv_divergence(const SpectralField& u) { return apply_lambda(divergence(u), -1.0); }
inline SpectralField lambda_inv_curl(const SpectralField& u) { return apply_lambda(curl(u), -1.0); }

/// Solve Laplacian(phi) = theta for mean-free theta; phi is mean-free.
inline SpectralField poisson_solve(const SpectralField& theta)
{
    if (theta.components() != 1)
        throw std::invalid_argument("poisson_solve: expected a scalar field");
    if (!is_mean_free(theta))
        throw MeanNotZeroError("poisson_solve: source has nonzero mean (charge imbalance)");
    return apply_radial(theta, [](double r) { return -1.0 / (r * r); }, 0.0);
}

/// Compressible part c = Lambda^{-1} div u and incompressible part I = Lambda^{-1} curl u.
struct HelmholtzPair {
    SpectralField c;
    SpectralField incompressible;
};

inline HelmholtzPair helmholtz_decompose(const SpectralField& u)
{
    const Grid& g = u.grid();
    if (u.components() != g.dim())
        throw std::invalid_argument("helmholtz_decompose: expected a vector field");
    for (int a = 0; a < g.dim(); ++a)
        if (!is_mean_free(u, a))
            throw MeanNotZeroError("helmholtz_decompose: velocity has nonzero mean");
    return {lambda_inv_divergence(u), lambda_inv_curl(u)};
}

/// u = -Lambda^{-1} grad c - Lambda^{-1} div I.
inline SpectralField helmholtz_recompose(const HelmholtzPair& pair)
{
    require_same_grid(pair.c.grid(), pair.incompressible.grid(), "helmholtz_recompose");
    SpectralField u = lambda_inv_gradient(pair.c);
    u += apply_lambda(divergence_antisymmetric(pair.incompressible), -1.0);
    u *= -1.0;
    return u;
}

}  // namespace nsp
