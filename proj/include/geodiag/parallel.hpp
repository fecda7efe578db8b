#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace geodiag {

// Worker count from GEODIAG_JOBS, falling back to 1.
inline unsigned jobs_from_env() {
    if (const char* v = std::getenv("GEODIAG_JOBS")) {
        try {
            const long n = std::stol(v);
            if (n >= 1) return static_cast<unsigned>(n);
        } catch (...) {
        }
    }
    return 1;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Callers write results
// into per-index slots and reduce afterwards in index order, which keeps the
// outcome independent of scheduling. The exception of the lowest failing
// index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(std::max(1u, jobs), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto body = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace geodiag
