#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace nsp {

/// Worker cap from NSP_THREADS (a positive integer), else the hardware concurrency.
inline int thread_limit()
{
    const int hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("NSP_THREADS");
    if (env == nullptr || *env == '\0')
        return hw;
    const std::string_view v(env);
    int n = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || ptr != v.data() + v.size() || n < 1)
        throw std::invalid_argument("NSP_THREADS must be a positive integer, got '" + std::string(v) + "'");
    return n;
}

/// fn(i) for i in [0, count) on up to `threads` workers. Work items must be
/// independent; the first exception is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn)
{
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = w; i < count; i += workers)
                fn(i);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

}  // namespace nsp
