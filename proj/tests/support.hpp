#pragma once

#include "nsp/nsp.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

namespace nsp::testing {

// Random Hermitian coefficients on lattice points with lo <= |m|_inf <= hi;
// hi < M/2 keeps the Nyquist row empty.
inline SpectralField random_field(const Grid& g, int comps, std::mt19937_64& rng, int lo = 1, int hi = 3)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SpectralField f(g, comps);
    for (int c = 0; c < comps; ++c)
        for (std::size_t p = 0; p < g.size(); ++p) {
            const auto m = g.lattice(p);
            int mx = 0;
            for (int a = 0; a < g.dim(); ++a)
                mx = std::max(mx, std::abs(m[a]));
            if (mx >= lo && mx <= hi && !g.is_nyquist(p))
                f(c, p) = {u(rng), u(rng)};
        }
    // symmetrize by hand: f(-m) = conj f(m), independent of make_hermitian
    for (int c = 0; c < comps; ++c)
        for (std::size_t p = 0; p < g.size(); ++p) {
            const std::size_t q = g.mirror(p);
            if (q > p) {
                f(c, q) = std::conj(f(c, p));
            } else if (q == p) {
                f(c, p) = f(c, p).real();
            }
        }
    return f;
}

inline NspState random_state(const Grid& g, std::mt19937_64& rng, double scale, int hi = 3)
{
    NspState s(g);
    s.h = random_field(g, 1, rng, 1, hi);
    s.c = random_field(g, 1, rng, 1, hi);
    s.incompressible = random_field(g, antisymmetric_components(g.dim()), rng, 1, hi);
    s *= scale;
    return s;
}

// Direct O(n^2) evaluation of mean(f e^{-i xi x}) at lattice point p.
inline std::complex<double> direct_coefficient(const PhysicalField& f, std::size_t p, int comp = 0)
{
    const Grid& g = f.grid();
    std::complex<double> acc = 0.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
        double phase = 0.0;
        for (int a = 0; a < g.dim(); ++a)
            phase += g.xi(p, a) * g.coordinate(q, a);
        acc += f(comp, q) * std::polar(1.0, -phase);
    }
    return acc / static_cast<double>(g.size());
}

// Real field sum_k a_k cos(xi_k . x + phase_k) sampled on the grid.
struct Wave {
    std::array<int, 3> m;
    double amp;
    double phase;
};

inline PhysicalField sample_waves(const Grid& g, const std::vector<Wave>& waves)
{
    PhysicalField f(g, 1);
    for (std::size_t q = 0; q < g.size(); ++q) {
        double v = 0.0;
        for (const auto& w : waves) {
            double arg = w.phase;
            for (int a = 0; a < g.dim(); ++a)
                arg += g.dk() * w.m[a] * g.coordinate(q, a);
            v += w.amp * std::cos(arg);
        }
        f(0, q) = v;
    }
    return f;
}

inline double max_diff(const SpectralField& a, const SpectralField& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.coefficients().size(); ++i)
        m = std::max(m, std::abs(a.coefficients()[i] - b.coefficients()[i]));
    return m;
}

inline double max_diff(const PhysicalField& a, const PhysicalField& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

}  // namespace nsp::testing
