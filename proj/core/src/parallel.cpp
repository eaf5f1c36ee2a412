#include "cfield/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "cfield/error.hpp"

#if defined(__SSE2__)
#include <xmmintrin.h>
#endif

namespace cfield {

namespace {

// Float32 transmittance underflows into denormals once a scene turns
// opaque, which slowed training iterations several times over. Flush them
// for the duration of a chunk and restore the caller's mode afterwards.
class FlushDenormals {
public:
#if defined(__SSE2__)
    FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }  // FTZ | DAZ
    ~FlushDenormals() { _mm_setcsr(saved_); }

private:
    unsigned saved_;
#endif
};

}  // namespace

int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("CFIELD_THREADS"); env != nullptr && *env != '\0') {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("CFIELD_THREADS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

void parallel_chunks(std::size_t count, int workers,
                     const std::function<void(int, std::size_t, std::size_t)>& fn) {
    workers = std::max(1, workers);
    if (count == 0) {
        return;
    }
    const std::size_t n = static_cast<std::size_t>(workers);
    const std::size_t base = count / n;
    const std::size_t extra = count % n;
    auto chunk_begin = [&](std::size_t w) { return w * base + std::min(w, extra); };

    if (workers == 1) {
        FlushDenormals ftz;
        fn(0, 0, count);
        return;
    }

    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> threads;
    threads.reserve(n - 1);
    for (std::size_t w = 1; w < n; ++w) {
        const std::size_t b = chunk_begin(w);
        const std::size_t e = chunk_begin(w + 1);
        if (b == e) {
            continue;
        }
        threads.emplace_back([&, w, b, e] {
            try {
                FlushDenormals ftz;
                fn(static_cast<int>(w), b, e);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    try {
        if (chunk_begin(1) > 0) {
            FlushDenormals ftz;
            fn(0, 0, chunk_begin(1));
        }
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& t : threads) {
        t.join();
    }
    for (auto& err : errors) {
        if (err) {
            std::rethrow_exception(err);
        }
    }
}

}  // namespace cfield
