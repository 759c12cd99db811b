#pragma once

#include "nsp/grid.hpp"
#include "nsp/nsp_model.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace nsp {

using Mat2 = Eigen::Matrix2d;

/// Linear generator acting on (h_hat, c_hat) at |xi| = r:
///   d/dt h = -rho_bar c
///   d/dt c = (r^2 + 1) h - nu_c r^2 c
inline Mat2 coupling_matrix(double r, const FluidParams& params)
{
    Mat2 a;
    a << 0.0, -params.rho_bar, r * r + 1.0, -params.nu_c() * r * r;
    return a;
}

/// Per-radius propagators for one time step dt: the exact exponential of the
/// stiff linear part plus the phi-function weights used by ETDRK2 and the
/// implicit matrix used by IMEX-BDF2.
struct ModePropagator {
    Mat2 exp_a = Mat2::Zero();     // exp(dt A)
    Mat2 phi1 = Mat2::Zero();      // dt phi_1(dt A)
    Mat2 phi2 = Mat2::Zero();      // dt phi_2(dt A)
    Mat2 bdf2_inv = Mat2::Zero();  // (3 I - 2 dt A)^{-1}
    double heat_exp = 0.0;         // exp(-dt nu_i r^2)
    double heat_phi1 = 0.0;
    double heat_phi2 = 0.0;
    double heat_bdf2_inv = 0.0;    // 1 / (3 + 2 dt nu_i r^2)
};

namespace detail {

// exp of [[X, I, 0], [0, 0, I], [0, 0, 0]] carries exp(X), phi_1(X), phi_2(X) in its first block row.
template <int K>
std::array<Eigen::Matrix<double, K, K>, 3> phi_functions(const Eigen::Matrix<double, K, K>& x)
{
    using Big = Eigen::Matrix<double, 3 * K, 3 * K>;
    Big aug = Big::Zero();
    aug.template block<K, K>(0, 0) = x;
    aug.template block<K, K>(0, K).setIdentity();
    aug.template block<K, K>(K, 2 * K).setIdentity();
    const Big e = aug.exp();
    return {e.template block<K, K>(0, 0), e.template block<K, K>(0, K), e.template block<K, K>(0, 2 * K)};
}

}  // namespace detail

/// Precomputed linear propagators for every distinct lattice radius of a grid.
class LinearBlock {
public:
    LinearBlock(const Grid& grid, const FluidParams& params, double dt)
        : grid_(grid), params_(params), dt_(dt), slot_(grid.size(), 0)
    {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("LinearBlock: dt must be positive");
        std::map<std::int64_t, std::uint32_t> index;
        for (std::size_t p = 0; p < grid.size(); ++p) {
            const std::int64_t key = grid.lattice_norm_sq(p);
            auto it = index.find(key);
            if (it == index.end()) {
                it = index.emplace(key, static_cast<std::uint32_t>(table_.size())).first;
                table_.push_back(build(grid.dk() * std::sqrt(static_cast<double>(key))));
            }
            slot_[p] = it->second;
        }
    }

    const ModePropagator& at(std::size_t p) const { return table_[slot_[p]]; }
    double dt() const { return dt_; }
    const Grid& grid() const { return grid_; }

    /// Largest real part of the eigenvalues of A(xi) over the nonzero lattice radii.
    double spectral_abscissa() const
    {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 1; p < grid_.size(); ++p) {
            if (grid_.is_nyquist(p))
                continue;
            const Eigen::Vector2cd ev = coupling_matrix(grid_.xi_norm(p), params_).eigenvalues();
            worst = std::max({worst, ev[0].real(), ev[1].real()});
        }
        return worst;
    }

private:
    ModePropagator build(double r) const
    {
        ModePropagator m;
        if (r == 0.0)
            return m;  // zero mode stays annihilated
        const Mat2 a = coupling_matrix(r, params_);
        const Eigen::Vector2cd ev = a.eigenvalues();
        if (ev[0].real() > 0.0 || ev[1].real() > 0.0)
            throw std::logic_error("LinearBlock: linear generator has an unstable mode");
        const auto [e, p1, p2] = detail::phi_functions<2>(Mat2(dt_ * a));
        m.exp_a = e;
        m.phi1 = dt_ * p1;
        m.phi2 = dt_ * p2;
        m.bdf2_inv = (3.0 * Mat2::Identity() - 2.0 * dt_ * a).inverse();

        Eigen::Matrix<double, 1, 1> z;
        z(0, 0) = -dt_ * params_.nu_i() * r * r;
        const auto [he, hp1, hp2] = detail::phi_functions<1>(z);
        m.heat_exp = he(0, 0);
        m.heat_phi1 = dt_ * hp1(0, 0);
        m.heat_phi2 = dt_ * hp2(0, 0);
        m.heat_bdf2_inv = 1.0 / (3.0 - 2.0 * z(0, 0));
        return m;
    }

    Grid grid_;
    FluidParams params_;
    double dt_;
    std::vector<std::uint32_t> slot_;
    std::vector<ModePropagator> table_;
};

}  // namespace nsp
