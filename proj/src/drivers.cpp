#include "gnsfde/drivers.hpp"

#include "gnsfde/gcalc.hpp"
#include "gnsfde/util.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace gnsfde {

void require_admissible(const VolatilityControl& control, const GBounds& bounds, long steps) {
    if (control.theta.empty())
        throw std::invalid_argument("control has no segments");
    if (control.theta.size() != control.qv_density.size())
        throw std::invalid_argument("control theta/density size mismatch");
    if (control.theta.size() != 1 && static_cast<long>(control.theta.size()) < steps)
        throw std::invalid_argument("control does not cover the grid");
    const SymMatrix lo = SymMatrix::scaled_identity(bounds.dim, bounds.low_sq());
    const SymMatrix hi = SymMatrix::scaled_identity(bounds.dim, bounds.high_sq());
    for (const SymMatrix& a : control.qv_density) {
        if (a.dim() != bounds.dim)
            throw std::invalid_argument("control dimension mismatch");
        if (!loewner_leq(lo, a, 1e-10) || !loewner_leq(a, hi, 1e-10))
            throw std::invalid_argument("control is not admissible: theta theta^T outside "
                                        "[sigma_low^2 I, sigma_high^2 I]");
    }
}

VolatilityControl constant_control(const SymMatrix& gamma, const GBounds& bounds) {
    VolatilityControl c;
    c.kind = VolatilityControl::Kind::constant;
    c.theta.push_back(gamma.principal_sqrt().mat());
    c.qv_density.push_back(gamma);
    c.label = "const";
    require_admissible(c, bounds, 1);
    return c;
}

VolatilityControl bang_bang_control(const TimeGrid& grid, std::uint64_t seed,
                                    const GBounds& bounds, double switch_prob) {
    if (switch_prob < 0.0 || switch_prob > 1.0)
        throw std::invalid_argument("bang_bang_control: switch_prob must lie in [0, 1]");
    const CounterRng rng(seed, 0, StreamTag::bang_bang);
    const int m = bounds.dim;
    const Eigen::MatrixXd theta_lo = Eigen::MatrixXd::Identity(m, m) * bounds.sigma_low;
    const Eigen::MatrixXd theta_hi = Eigen::MatrixXd::Identity(m, m) * bounds.sigma_high;
    const SymMatrix dens_lo = SymMatrix::scaled_identity(m, bounds.low_sq());
    const SymMatrix dens_hi = SymMatrix::scaled_identity(m, bounds.high_sq());

    VolatilityControl c;
    c.kind = VolatilityControl::Kind::bang_bang_random;
    c.seed = seed;
    c.label = "bang_bang:" + std::to_string(seed);
    c.theta.reserve(static_cast<std::size_t>(grid.steps));
    c.qv_density.reserve(static_cast<std::size_t>(grid.steps));
    bool high = rng.uniform(0) < 0.5;
    for (long k = 0; k < grid.steps; ++k) {
        if (k > 0 && rng.uniform(static_cast<std::uint64_t>(k)) < switch_prob) high = !high;
        c.theta.push_back(high ? theta_hi : theta_lo);
        c.qv_density.push_back(high ? dens_hi : dens_lo);
    }
    return c;
}

DriverPath sample_driver(const VolatilityControl& control, const TimeGrid& grid,
                         std::uint64_t master_seed, std::uint64_t sample_index,
                         const GBounds& bounds) {
    require_admissible(control, bounds, grid.steps);
    const int m = bounds.dim;
    const long steps = grid.steps;
    const double sqrt_dt = std::sqrt(grid.dt);

    DriverPath path{grid, m, {}, {}, {}};
    path.dW.resize(static_cast<std::size_t>(steps) * m);
    path.dB.resize(static_cast<std::size_t>(steps) * m);
    path.dQV.resize(static_cast<std::size_t>(steps) * m * m);

    const CounterRng rng(master_seed, sample_index, StreamTag::driver_noise);
    Eigen::VectorXd dw(m);
    for (long k = 0; k < steps; ++k) {
        for (int j = 0; j < m; ++j) {
            dw[j] = sqrt_dt * rng.normal(static_cast<std::uint64_t>(k) * m + j);
            path.dW[static_cast<std::size_t>(k) * m + j] = dw[j];
        }
        const Eigen::VectorXd db = control.theta_at(k) * dw;
        for (int j = 0; j < m; ++j) path.dB[static_cast<std::size_t>(k) * m + j] = db[j];
        const Eigen::MatrixXd& dens = control.density_at(k).mat();
        for (int j = 0; j < m; ++j)
            for (int l = 0; l < m; ++l)
                path.dQV[(static_cast<std::size_t>(k) * m + j) * m + l] = dens(j, l) * grid.dt;
    }
    return path;
}

double DriverPath::b_terminal(int j) const {
    std::vector<double> xs(static_cast<std::size_t>(grid.steps));
    for (long k = 0; k < grid.steps; ++k) xs[static_cast<std::size_t>(k)] = db(k, j);
    return pairwise_sum(xs);
}

double DriverPath::b_running_max(int j) const {
    double running = 0.0;
    double best = 0.0; // B(0) = 0
    for (long k = 0; k < grid.steps; ++k) {
        running += db(k, j);
        best = std::max(best, running);
    }
    return best;
}

double DriverPath::qv_terminal(int j, int l) const {
    std::vector<double> xs(static_cast<std::size_t>(grid.steps));
    for (long k = 0; k < grid.steps; ++k) xs[static_cast<std::size_t>(k)] = dqv(k, j, l);
    return pairwise_sum(xs);
}

void dump_driver_binary(const DriverPath& path, const std::string& filename) {
    std::ofstream out(filename, std::ios::binary);
    if (!out) throw std::runtime_error("dump_driver_binary: cannot open " + filename);
    const std::uint32_t m = static_cast<std::uint32_t>(path.m);
    const std::uint64_t steps = static_cast<std::uint64_t>(path.grid.steps);
    const double dt = path.grid.dt;
    out.write(reinterpret_cast<const char*>(&m), sizeof m);
    out.write(reinterpret_cast<const char*>(&steps), sizeof steps);
    out.write(reinterpret_cast<const char*>(&dt), sizeof dt);
    const auto write_vec = [&out](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    write_vec(path.dW);
    write_vec(path.dB);
    write_vec(path.dQV);
    if (!out) throw std::runtime_error("dump_driver_binary: write failed for " + filename);
}

} // namespace gnsfde
