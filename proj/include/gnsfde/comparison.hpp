#pragma once

#include "gnsfde/coeffs.hpp"
#include "gnsfde/gexp.hpp"
#include "gnsfde/psi.hpp"
#include "gnsfde/solver.hpp"

#include <string>
#include <vector>

namespace gnsfde {

/// Violation tolerance policy. Violations are counted only beyond
///   tol_N(k) = c * sqrt(dt) * scale_k
/// on the neutral-adjusted gap, separating Euler scheme error (strong
/// order 1/2) from genuine order violations. scale_k is either 1 or the
/// running sup norm of the pair (floored at 1 so nearly-zero solutions do
/// not flag spurious violations). The raw-gap detector uses
/// tol_N(k) / (1 - kappa): with (H3)-(H4) a raw violation beyond that
/// threshold forces a neutral-adjusted violation beyond tol_N at the same
/// step, so the recorded hitting times always satisfy tau_N <= tau.
struct TolerancePolicy {
    double c = 5.0;
    enum class ScaleMode { running_sup, unit } scale_mode = ScaleMode::running_sup;
};

/// Per-(control, sample) order statistics. Steps are 1-based grid indices
/// of the first tolerance-exceeding gap; -1 means no violation.
struct SampleRecord {
    int control = 0;
    long sample = 0;
    std::vector<int> tau_steps;   // per component, raw order
    std::vector<int> tau_n_steps; // per component, neutral-adjusted order
    int tau_step = -1;            // min over components (-1 if none)
    int tau_n_step = -1;
    double max_excess_raw = 0.0; // max_k,i (Y^i - Ybar^i)+
    double max_excess_n = 0.0;   // max_k,i (Y^{i,N} - Ybar^{i,N})+
    double final_tol_n = 0.0;    // tol_N at the horizon
    bool solver_failed = false;
};

struct OrderReport {
    std::string scenario;
    double tol_c = 5.0;
    std::string scale_mode;
    double kappa = 0.0;
    long n_samples = 0;
    std::vector<SampleRecord> records; // control-major, sample-minor
    std::vector<std::string> control_labels;
    std::vector<double> violation_freq; // per control, over successful samples
    std::vector<WilsonInterval> violation_wilson;
    double capacity = 0.0; // max over controls of violation frequency
    long solver_failures = 0;
    double max_excess_raw = 0.0;
    double max_excess_n = 0.0;
    double max_final_tol_n = 0.0;
};

/// Drift-gap diagnostic H^i(t_k): evaluates
///   b^i(t, Y^Z_t) - bbar^i(t, Ybar_t) + 2 G(h^i(t, Y^Z_t) - hbar^i(t, Ybar_t))
/// where Y^Z subtracts the positive part of the neutral-adjusted gap from
/// component i of the first trajectory's segment. On the part of the
/// window before t = 0 the neutral-adjusted path is not defined and the
/// raw gap's positive part is used instead (zero whenever the initial
/// order holds).
double drift_gap(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                 const PairTrajectory& pair, long k, int i);

/// Paired-trajectory order experiment over (control x sample). Requires
/// init_a <=_N init_b and a shared neutral term. The capacity estimate is
/// the max over controls of the frequency of {tau_N < T}.
OrderReport run_order_experiment(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                                 const Segment& init_a, const Segment& init_b,
                                 const ControlFamily& family, long n_samples,
                                 const TimeGrid& grid, const TolerancePolicy& tol,
                                 std::uint64_t master_seed, int threads = 1,
                                 const std::string& scenario = "",
                                 const FixedPointParams& fp = {});

/// System with drift b + eps in every component; eps must be positive.
CoefficientSystem epsilon_shift(const CoefficientSystem& sys, double eps);

/// Short-horizon slope probe behind the necessity argument: under a
/// constant control gamma, E[Y^{i,N}(t0+s) - Ybar^{i,N}(t0+s)] / s should
/// approach b^i(t0,xi) - bbar^i(t0,eta) + <h^i(t0,xi) - hbar^i(t0,eta), gamma>
/// as s decreases.
struct SlopeEstimate {
    double s = 0.0;
    double mean = 0.0;
    double std_error = 0.0;
};

struct NecessityProbeReport {
    std::vector<SlopeEstimate> slopes; // one per requested s, increasing s
    double direct_value = 0.0;
};

NecessityProbeReport necessity_probe(const CoefficientSystem& sys_a,
                                     const CoefficientSystem& sys_b, int i, double t0,
                                     const Segment& xi, const Segment& eta,
                                     const SymMatrix& gamma, long n_samples,
                                     const std::vector<double>& s_values, const TimeGrid& grid,
                                     std::uint64_t master_seed, int threads = 1);

/// Flat CSV export: one row per (control, sample).
void write_order_report_csv(const OrderReport& report, const std::string& filename);

} // namespace gnsfde
