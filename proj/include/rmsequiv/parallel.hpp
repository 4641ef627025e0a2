#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace rmsequiv {

/// Worker count used when callers pass 0: $RMSEQUIV_PARALLELISM if set,
/// otherwise the hardware concurrency.
inline unsigned default_parallelism() {
    if (const char* env = std::getenv("RMSEQUIV_PARALLELISM")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) {
                return static_cast<unsigned>(v);
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(begin, end) over [0, count) split into contiguous chunks, one per
/// worker. If several chunks throw, the exception from the lowest chunk wins so
/// the outcome does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, unsigned parallelism, Body&& body) {
    if (parallelism == 0) {
        parallelism = default_parallelism();
    }
    const std::size_t workers = std::min<std::size_t>(parallelism, count);
    if (workers <= 1) {
        if (count > 0) {
            body(std::size_t{0}, count);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = count * w / workers;
            const std::size_t end = count * (w + 1) / workers;
            threads.emplace_back([&, w, begin, end] {
                try {
                    body(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

}  // namespace rmsequiv
