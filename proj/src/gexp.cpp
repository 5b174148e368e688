#include "gnsfde/gexp.hpp"

#include <cmath>
#include <stdexcept>

namespace gnsfde {

ControlFamily constant_grid_family(const GBounds& bounds, int n) {
    if (n < 1) throw std::invalid_argument("constant_grid_family: n must be >= 1");
    ControlFamily fam;
    const double lo = bounds.low_sq();
    const double hi = bounds.high_sq();
    for (int k = 0; k < n; ++k) {
        double gamma;
        if (k == 0)
            gamma = lo;
        else if (k == n - 1)
            gamma = hi;
        else
            gamma = lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1));
        VolatilityControl c =
            constant_control(SymMatrix::scaled_identity(bounds.dim, gamma), bounds);
        c.label = "const:" + format_double(gamma);
        fam.members.push_back(std::move(c));
    }
    return fam;
}

ControlFamily default_family(const GBounds& bounds, const TimeGrid& grid,
                             std::uint64_t seed_base) {
    ControlFamily fam = constant_grid_family(bounds, 16);
    for (int k = 0; k < 16; ++k)
        fam.members.push_back(
            bang_bang_control(grid, seed_base + static_cast<std::uint64_t>(k), bounds, 0.5));
    return fam;
}

namespace {

/// Evaluates every (control, sample) cell into per-functional slot arrays,
/// then reduces per control in index order. This is the only evaluation
/// path, so estimates are independent of the thread count.
std::vector<GExpEstimate> sweep(const std::vector<PathFunctional>& functionals,
                                const ControlFamily& family, long n_samples,
                                const TimeGrid& grid, const GBounds& bounds,
                                std::uint64_t master_seed, int threads, bool capacity,
                                const PathEvent* event) {
    if (family.members.empty()) throw std::invalid_argument("control family is empty");
    if (n_samples < 2) throw std::invalid_argument("need n_samples >= 2");
    const long n_controls = static_cast<long>(family.members.size());
    const std::size_t n_fn = capacity ? 1 : functionals.size();

    std::vector<std::vector<double>> slots(n_fn);
    for (auto& s : slots) s.assign(static_cast<std::size_t>(n_controls * n_samples), 0.0);

    std::string first_error;
    parallel_for(n_controls * n_samples, threads, [&](long task) {
        const long c = task / n_samples;
        const long s = task % n_samples;
        try {
            const DriverPath path =
                sample_driver(family.members[static_cast<std::size_t>(c)], grid, master_seed,
                              static_cast<std::uint64_t>(s), bounds);
            if (capacity) {
                slots[0][static_cast<std::size_t>(task)] = (*event)(path) ? 1.0 : 0.0;
            } else {
                for (std::size_t f = 0; f < n_fn; ++f)
                    slots[f][static_cast<std::size_t>(task)] = functionals[f](path);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("functional evaluation failed (control " +
                                     family.members[static_cast<std::size_t>(c)].label +
                                     ", sample " + std::to_string(s) + "): " + e.what());
        }
    });

    std::vector<GExpEstimate> out(n_fn);
    for (std::size_t f = 0; f < n_fn; ++f) {
        GExpEstimate& est = out[f];
        est.per_control.resize(static_cast<std::size_t>(n_controls));
        for (long c = 0; c < n_controls; ++c) {
            const std::span<const double> xs(slots[f].data() + c * n_samples,
                                             static_cast<std::size_t>(n_samples));
            const MeanStats ms = mean_stats(xs);
            ControlStats& cs = est.per_control[static_cast<std::size_t>(c)];
            cs.label = family.members[static_cast<std::size_t>(c)].label;
            cs.mean = ms.mean;
            cs.std_error = ms.std_error;
            cs.n_samples = ms.n;
            if (capacity) {
                long hits = 0;
                for (double x : xs) hits += x != 0.0;
                const WilsonInterval w = wilson95(hits, n_samples);
                cs.mean = static_cast<double>(hits) / static_cast<double>(n_samples);
                cs.wilson_low = w.low;
                cs.wilson_high = w.high;
            }
            if (est.argmax_control < 0 || cs.mean > est.value) {
                est.value = cs.mean;
                est.argmax_control = static_cast<int>(c);
            }
        }
    }
    return out;
}

} // namespace

GExpEstimate estimate_gexp(const PathFunctional& functional, const ControlFamily& family,
                           long n_samples, const TimeGrid& grid, const GBounds& bounds,
                           std::uint64_t master_seed, int threads) {
    return sweep({functional}, family, n_samples, grid, bounds, master_seed, threads, false,
                 nullptr)[0];
}

std::vector<GExpEstimate> estimate_gexp_multi(const std::vector<PathFunctional>& functionals,
                                              const ControlFamily& family, long n_samples,
                                              const TimeGrid& grid, const GBounds& bounds,
                                              std::uint64_t master_seed, int threads) {
    return sweep(functionals, family, n_samples, grid, bounds, master_seed, threads, false,
                 nullptr);
}

GExpEstimate estimate_capacity(const PathEvent& event, const ControlFamily& family,
                               long n_samples, const TimeGrid& grid, const GBounds& bounds,
                               std::uint64_t master_seed, int threads) {
    return sweep({}, family, n_samples, grid, bounds, master_seed, threads, true, &event)[0];
}

namespace {

double evaluate_control_mean(const VolatilityControl& control, const PathFunctional& functional,
                             long n_samples, const TimeGrid& grid, const GBounds& bounds,
                             std::uint64_t master_seed, int threads) {
    std::vector<double> xs(static_cast<std::size_t>(n_samples));
    parallel_for(n_samples, threads, [&](long s) {
        const DriverPath path =
            sample_driver(control, grid, master_seed, static_cast<std::uint64_t>(s), bounds);
        xs[static_cast<std::size_t>(s)] = functional(path);
    });
    return mean_stats(xs).mean;
}

} // namespace

RefineResult refine_control(const GExpEstimate& base, const ControlFamily& family,
                            const PathFunctional& functional, const TimeGrid& grid,
                            const GBounds& bounds, long budget, long n_samples,
                            std::uint64_t master_seed, int threads) {
    if (base.argmax_control < 0 ||
        base.argmax_control >= static_cast<int>(family.members.size()))
        throw std::invalid_argument("refine_control: base estimate has no argmax control");

    const VolatilityControl& start =
        family.members[static_cast<std::size_t>(base.argmax_control)];

    // Expand to an explicit per-step control so single steps can be flipped.
    VolatilityControl current;
    current.kind = VolatilityControl::Kind::piecewise;
    current.label = start.label + "+refined";
    current.theta.reserve(static_cast<std::size_t>(grid.steps));
    current.qv_density.reserve(static_cast<std::size_t>(grid.steps));
    for (long k = 0; k < grid.steps; ++k) {
        current.theta.push_back(start.theta_at(k));
        current.qv_density.push_back(start.density_at(k));
    }

    RefineResult out{base, current};
    if (budget <= 0) return out;

    const int m = bounds.dim;
    const Eigen::MatrixXd theta_lo = Eigen::MatrixXd::Identity(m, m) * bounds.sigma_low;
    const Eigen::MatrixXd theta_hi = Eigen::MatrixXd::Identity(m, m) * bounds.sigma_high;
    const SymMatrix dens_lo = SymMatrix::scaled_identity(m, bounds.low_sq());
    const SymMatrix dens_hi = SymMatrix::scaled_identity(m, bounds.high_sq());

    double best = evaluate_control_mean(current, functional, n_samples, grid, bounds,
                                        master_seed, threads);
    for (long sweep_i = 0; sweep_i < budget; ++sweep_i) {
        bool improved = false;
        for (long k = 0; k < grid.steps; ++k) {
            Eigen::MatrixXd kept_theta = current.theta[static_cast<std::size_t>(k)];
            SymMatrix kept_dens = current.qv_density[static_cast<std::size_t>(k)];
            for (int endpoint = 0; endpoint < 2; ++endpoint) {
                current.theta[static_cast<std::size_t>(k)] = endpoint ? theta_hi : theta_lo;
                current.qv_density[static_cast<std::size_t>(k)] = endpoint ? dens_hi : dens_lo;
                const double v = evaluate_control_mean(current, functional, n_samples, grid,
                                                       bounds, master_seed, threads);
                if (v > best) {
                    best = v;
                    improved = true;
                    kept_theta = current.theta[static_cast<std::size_t>(k)];
                    kept_dens = current.qv_density[static_cast<std::size_t>(k)];
                } else {
                    current.theta[static_cast<std::size_t>(k)] = kept_theta;
                    current.qv_density[static_cast<std::size_t>(k)] = kept_dens;
                }
            }
        }
        if (!improved) break;
    }

    // Never worse than the base value, by construction of the accept rule.
    out.estimate.value = std::max(best, base.value);
    out.estimate.argmax_control = base.argmax_control;
    out.control = current;
    return out;
}

} // namespace gnsfde
