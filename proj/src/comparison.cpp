#include "gnsfde/comparison.hpp"

#include "gnsfde/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

namespace gnsfde {

double drift_gap(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                 const PairTrajectory& pair, long k, int i) {
    const TimeGrid& grid = pair.a.grid;
    if (k < 0 || k > grid.steps) throw std::out_of_range("drift_gap: step index out of range");
    if (i < 0 || i >= sys_a.d()) throw std::out_of_range("drift_gap: component out of range");

    Segment seg_a = pair.a.segment(k);
    const Segment seg_b = pair.b.segment(k);

    // Subtract (Z^{i,N})+ pointwise along the window from component i.
    for (long l = 0; l <= grid.delay_steps; ++l) {
        const long node = k - grid.delay_steps + l; // grid node of window row l
        double gap;
        if (node >= 0)
            gap = pair.a.adjusted(node, i) - pair.b.adjusted(node, i);
        else
            gap = pair.a.value(node, i) - pair.b.value(node, i);
        if (gap > 0.0) seg_a.at(l, i) -= gap;
    }

    const double t = grid.time(k);
    CoefficientSystem::Eval ea, eb;
    ea.resize(sys_a.d(), sys_a.m());
    eb.resize(sys_b.d(), sys_b.m());
    sys_a.eval_all(t, segment_context(seg_a, t), ea);
    sys_b.eval_all(t, segment_context(seg_b, t), eb);
    const SymMatrix h_gap = sys_a.h_matrix(ea, i) - sys_b.h_matrix(eb, i);
    return ea.b[static_cast<std::size_t>(i)] - eb.b[static_cast<std::size_t>(i)] +
           2.0 * g_value(h_gap, sys_a.bounds());
}

CoefficientSystem epsilon_shift(const CoefficientSystem& sys, double eps) {
    return sys.with_shifted_drift(eps);
}

OrderReport run_order_experiment(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                                 const Segment& init_a, const Segment& init_b,
                                 const ControlFamily& family, long n_samples,
                                 const TimeGrid& grid, const TolerancePolicy& tol,
                                 std::uint64_t master_seed, int threads,
                                 const std::string& scenario, const FixedPointParams& fp) {
    if (!sys_a.same_neutral_as(sys_b))
        throw std::invalid_argument("order experiment requires a shared neutral term");
    if (!leq_n(init_a, init_b, sys_a.neutral_functional()))
        throw std::invalid_argument("initial segments violate xi <=_N eta");
    if (family.members.empty()) throw std::invalid_argument("control family is empty");
    if (n_samples < 1) throw std::invalid_argument("need n_samples >= 1");

    const int d = sys_a.d();
    const double kappa = sys_a.kappa();
    const long n_controls = static_cast<long>(family.members.size());
    const double sqrt_dt = std::sqrt(grid.dt);

    OrderReport report;
    report.scenario = scenario;
    report.tol_c = tol.c;
    report.scale_mode =
        tol.scale_mode == TolerancePolicy::ScaleMode::running_sup ? "running_sup" : "unit";
    report.kappa = kappa;
    report.n_samples = n_samples;
    report.records.resize(static_cast<std::size_t>(n_controls * n_samples));
    for (const VolatilityControl& c : family.members) report.control_labels.push_back(c.label);

    parallel_for(n_controls * n_samples, threads, [&](long task) {
        const long c = task / n_samples;
        const long s = task % n_samples;
        SampleRecord& rec = report.records[static_cast<std::size_t>(task)];
        rec.control = static_cast<int>(c);
        rec.sample = s;
        rec.tau_steps.assign(static_cast<std::size_t>(d), -1);
        rec.tau_n_steps.assign(static_cast<std::size_t>(d), -1);

        std::optional<PairTrajectory> solved;
        try {
            const DriverPath driver =
                sample_driver(family.members[static_cast<std::size_t>(c)], grid, master_seed,
                              static_cast<std::uint64_t>(s), sys_a.bounds());
            solved = solve_pair(sys_a, sys_b, init_a, init_b, driver, fp);
        } catch (const SolverError&) {
            rec.solver_failed = true;
            return;
        }
        const PairTrajectory& pair = *solved;

        // Running sup-norm scale over everything seen so far, including the
        // initial windows, floored at 1.
        double scale = 1.0;
        if (tol.scale_mode == TolerancePolicy::ScaleMode::running_sup) {
            for (long node = -grid.delay_steps; node <= 0; ++node)
                for (int i = 0; i < d; ++i)
                    scale = std::max({scale, std::abs(pair.a.value(node, i)),
                                      std::abs(pair.b.value(node, i))});
        }

        for (long k = 0; k <= grid.steps; ++k) {
            if (tol.scale_mode == TolerancePolicy::ScaleMode::running_sup) {
                for (int i = 0; i < d; ++i)
                    scale = std::max({scale, std::abs(pair.a.value(k, i)),
                                      std::abs(pair.b.value(k, i))});
            }
            const double tol_n = tol.c * sqrt_dt * scale;
            const double tol_raw = tol_n / (1.0 - kappa);
            for (int i = 0; i < d; ++i) {
                const double raw_gap = pair.a.value(k, i) - pair.b.value(k, i);
                const double n_gap = pair.a.adjusted(k, i) - pair.b.adjusted(k, i);
                rec.max_excess_raw = std::max(rec.max_excess_raw, raw_gap);
                rec.max_excess_n = std::max(rec.max_excess_n, n_gap);
                if (k >= 1) {
                    if (rec.tau_steps[static_cast<std::size_t>(i)] < 0 && raw_gap > tol_raw)
                        rec.tau_steps[static_cast<std::size_t>(i)] = static_cast<int>(k);
                    if (rec.tau_n_steps[static_cast<std::size_t>(i)] < 0 && n_gap > tol_n)
                        rec.tau_n_steps[static_cast<std::size_t>(i)] = static_cast<int>(k);
                }
            }
            if (k == grid.steps) rec.final_tol_n = tol_n;
        }
        rec.max_excess_raw = std::max(rec.max_excess_raw, 0.0);
        rec.max_excess_n = std::max(rec.max_excess_n, 0.0);
        for (int i = 0; i < d; ++i) {
            const int ti = rec.tau_steps[static_cast<std::size_t>(i)];
            const int tni = rec.tau_n_steps[static_cast<std::size_t>(i)];
            if (ti >= 0 && (rec.tau_step < 0 || ti < rec.tau_step)) rec.tau_step = ti;
            if (tni >= 0 && (rec.tau_n_step < 0 || tni < rec.tau_n_step)) rec.tau_n_step = tni;
        }
    });

    report.violation_freq.resize(static_cast<std::size_t>(n_controls), 0.0);
    report.violation_wilson.resize(static_cast<std::size_t>(n_controls));
    for (long c = 0; c < n_controls; ++c) {
        long violations = 0;
        long ok = 0;
        for (long s = 0; s < n_samples; ++s) {
            const SampleRecord& rec = report.records[static_cast<std::size_t>(c * n_samples + s)];
            if (rec.solver_failed) {
                ++report.solver_failures;
                continue;
            }
            ++ok;
            violations += rec.tau_n_step >= 0;
            report.max_excess_raw = std::max(report.max_excess_raw, rec.max_excess_raw);
            report.max_excess_n = std::max(report.max_excess_n, rec.max_excess_n);
            report.max_final_tol_n = std::max(report.max_final_tol_n, rec.final_tol_n);
        }
        const double freq =
            ok > 0 ? static_cast<double>(violations) / static_cast<double>(ok) : 0.0;
        report.violation_freq[static_cast<std::size_t>(c)] = freq;
        report.violation_wilson[static_cast<std::size_t>(c)] = wilson95(violations, ok);
        report.capacity = std::max(report.capacity, freq);
    }
    return report;
}

NecessityProbeReport necessity_probe(const CoefficientSystem& sys_a,
                                     const CoefficientSystem& sys_b, int i, double t0,
                                     const Segment& xi, const Segment& eta,
                                     const SymMatrix& gamma, long n_samples,
                                     const std::vector<double>& s_values, const TimeGrid& grid,
                                     std::uint64_t master_seed, int threads) {
    if (i < 0 || i >= sys_a.d()) throw std::out_of_range("necessity_probe: component out of range");
    if (!leq_n(xi, eta, sys_a.neutral_functional()))
        throw std::invalid_argument("necessity_probe: xi <=_N eta must hold");
    {
        const std::vector<double> za = sys_a.z_of(xi);
        const std::vector<double> zb = sys_b.z_of(eta);
        if (std::abs(za[static_cast<std::size_t>(i)] - zb[static_cast<std::size_t>(i)]) > 1e-10)
            throw std::invalid_argument(
                "necessity_probe: boundary equality at component i must hold to 1e-10");
    }
    const VolatilityControl control = constant_control(gamma, sys_a.bounds());

    // Steps needed to reach the largest s.
    long max_steps = 0;
    std::vector<long> s_steps;
    for (double s : s_values) {
        const double ratio = s / grid.dt;
        const long k = std::lround(ratio);
        if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, ratio))
            throw std::invalid_argument("necessity_probe: every s must be a positive multiple of dt");
        s_steps.push_back(k);
        max_steps = std::max(max_steps, k);
    }
    const TimeGrid probe_grid(grid.dt, max_steps, grid.delay_steps);

    std::vector<std::vector<double>> slopes(s_values.size());
    for (auto& v : slopes) v.assign(static_cast<std::size_t>(n_samples), 0.0);

    parallel_for(n_samples, threads, [&](long s) {
        const DriverPath driver = sample_driver(control, probe_grid, master_seed,
                                                static_cast<std::uint64_t>(s), sys_a.bounds());
        const PairTrajectory pair = solve_pair(sys_a, sys_b, xi, eta, driver, {}, t0);
        for (std::size_t q = 0; q < s_steps.size(); ++q) {
            const long k = s_steps[q];
            slopes[q][static_cast<std::size_t>(s)] =
                (pair.a.adjusted(k, i) - pair.b.adjusted(k, i)) / probe_grid.time(k);
        }
    });

    NecessityProbeReport report;
    for (std::size_t q = 0; q < s_values.size(); ++q) {
        const MeanStats ms = mean_stats(slopes[q]);
        report.slopes.push_back({s_values[q], ms.mean, ms.std_error});
    }

    CoefficientSystem::Eval ea, eb;
    ea.resize(sys_a.d(), sys_a.m());
    eb.resize(sys_b.d(), sys_b.m());
    sys_a.eval_all(t0, segment_context(xi, t0), ea);
    sys_b.eval_all(t0, segment_context(eta, t0), eb);
    const SymMatrix h_gap = sys_a.h_matrix(ea, i) - sys_b.h_matrix(eb, i);
    report.direct_value = ea.b[static_cast<std::size_t>(i)] - eb.b[static_cast<std::size_t>(i)] +
                          h_gap.inner(gamma);
    return report;
}

void write_order_report_csv(const OrderReport& report, const std::string& filename) {
    std::ofstream out(filename);
    if (!out) throw std::runtime_error("cannot open " + filename);
    const int d = report.records.empty()
                      ? 0
                      : static_cast<int>(report.records.front().tau_steps.size());
    out << "control,sample,tau_n_step,tau_step";
    for (int i = 1; i <= d; ++i) out << ",tau_n_step_" << i;
    for (int i = 1; i <= d; ++i) out << ",tau_step_" << i;
    out << ",max_excess_n,max_excess_raw,final_tol_n,solver_failed\n";
    for (const SampleRecord& rec : report.records) {
        out << rec.control << ',' << rec.sample << ',' << rec.tau_n_step << ',' << rec.tau_step;
        for (int v : rec.tau_n_steps) out << ',' << v;
        for (int v : rec.tau_steps) out << ',' << v;
        out << ',' << format_double(rec.max_excess_n) << ',' << format_double(rec.max_excess_raw)
            << ',' << format_double(rec.final_tol_n) << ',' << (rec.solver_failed ? 1 : 0)
            << "\n";
    }
}

} // namespace gnsfde
