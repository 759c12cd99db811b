#pragma once

#include <fftw3.h>

#include <array>
#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace nsp::fft {

using complex = std::complex<double>;

enum class Direction { forward, backward };

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
public:
    static PlanCache& instance()
    {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int dim, int points, Direction dir)
    {
        std::lock_guard lock(mutex_);
        auto key = std::make_tuple(dim, points, dir == Direction::forward);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        std::array<int, 3> n{points, points, points};
        std::size_t total = 1;
        for (int a = 0; a < dim; ++a)
            total *= static_cast<std::size_t>(points);
        std::vector<complex> scratch(total);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        // FFTW_ESTIMATE keeps plan selection, and therefore rounding, deterministic.
        fftw_plan plan = fftw_plan_dft(dim, n.data(), buf, buf,
                                       dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (plan == nullptr)
            throw std::runtime_error("fftw plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache()
    {
        for (auto& [key, plan] : plans_)
            fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

}  // namespace detail

/// Unnormalized in-place multidimensional DFT of a row-major M^N block.
inline void transform(std::span<complex> data, int dim, int points, Direction dir)
{
    fftw_plan plan = detail::PlanCache::instance().get(dim, points, dir);
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, buf, buf);
}

}  // namespace nsp::fft
