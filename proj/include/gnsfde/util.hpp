#pragma once

#include <functional>
#include <span>
#include <string>

namespace gnsfde {

/// Deterministic pairwise (tree) summation. Independent of thread
/// scheduling because it only ever sees the values in index order.
double pairwise_sum(std::span<const double> xs);

struct MeanStats {
    double mean = 0.0;
    double std_error = 0.0;
    long n = 0;
};

/// Mean and standard error of the mean, both via pairwise summation.
MeanStats mean_stats(std::span<const double> xs);

/// Wilson 95% score interval for k successes out of n trials.
struct WilsonInterval {
    double low = 0.0;
    double high = 0.0;
};
WilsonInterval wilson95(long k, long n);

/// Shortest decimal string that round-trips to exactly this double.
/// Used for canonical expression printing and CSV output.
std::string format_double(double x);

/// Resolve a worker count: explicit value > 0 wins, then the
/// G_NSFDE_THREADS environment variable, then hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(0..n-1) across `threads` workers. Tasks must only write to
/// their own output slots; determinism then follows from the callers'
/// index-ordered reductions. Worker exceptions are rethrown on the caller.
void parallel_for(long n, int threads, const std::function<void(long)>& fn);

} // namespace gnsfde
