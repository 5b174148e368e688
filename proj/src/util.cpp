#include "gnsfde/util.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace gnsfde {

double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

MeanStats mean_stats(std::span<const double> xs) {
    MeanStats out;
    out.n = static_cast<long>(xs.size());
    if (out.n == 0) return out;
    out.mean = pairwise_sum(xs) / static_cast<double>(out.n);
    if (out.n < 2) return out;
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(out.n - 1);
    out.std_error = std::sqrt(var / static_cast<double>(out.n));
    return out;
}

WilsonInterval wilson95(long k, long n) {
    WilsonInterval w;
    if (n <= 0) return w;
    const double z = 1.959963984540054;
    const double z2 = z * z;
    const double p = static_cast<double>(k) / static_cast<double>(n);
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    w.low = k == 0 ? 0.0 : std::max(0.0, center - half);
    w.high = k == n ? 1.0 : std::min(1.0, center + half);
    return w;
}

std::string format_double(double x) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("G_NSFDE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<int>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

void parallel_for(long n, int threads, const std::function<void(long)>& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_workers = static_cast<int>(std::min<long>(threads, n));
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace gnsfde
