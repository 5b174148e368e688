#include "gnsfde/solver.hpp"

#include "gnsfde/util.hpp"

#include <cmath>
#include <fstream>

namespace gnsfde {

Trajectory solve(const CoefficientSystem& sys, const Segment& init, const DriverPath& driver,
                 const FixedPointParams& fp, double t_offset, SolverStats* stats) {
    sys.require_segment_shape(init);
    require_finite(init);
    if (driver.m != sys.m())
        throw std::invalid_argument("solve: driver dimension does not match the system");
    if (driver.grid.delay_steps != sys.delay_steps() ||
        std::abs(driver.grid.dt - sys.dt()) > 1e-15)
        throw std::invalid_argument("solve: driver grid does not match the system grid");
    if (!(sys.kappa() < 1.0))
        throw std::invalid_argument("solve: neutral contraction constant must be < 1");

    const TimeGrid& grid = driver.grid;
    const int d = sys.d();
    const int m = sys.m();
    const long L = grid.delay_steps;
    const long steps = grid.steps;

    Trajectory traj{grid, d, {}, {}};
    traj.values.assign(static_cast<std::size_t>(grid.nodes()) * d, 0.0);
    traj.neutral_adjusted.assign(static_cast<std::size_t>(steps + 1) * d, 0.0);
    std::copy(init.values.begin(), init.values.end(), traj.values.begin());

    CoefficientSystem::Eval eval;
    eval.resize(d, m);
    std::vector<double> v(static_cast<std::size_t>(d));       // V_k = Y^N(t_k)
    std::vector<double> v_next(static_cast<std::size_t>(d));
    std::vector<double> n_buf(static_cast<std::size_t>(d));

    // Context pointing into the trajectory storage; end_row is the row of
    // the segment endpoint (history row k + L for time t_k).
    EvalContext ctx;
    ctx.history = traj.values.data();
    ctx.d = d;

    // V_0 = xi(0) - N(xi).
    ctx.end_row = L;
    sys.eval_neutral(ctx, n_buf.data());
    for (int i = 0; i < d; ++i) {
        v[static_cast<std::size_t>(i)] = init.endpoint(i) - n_buf[static_cast<std::size_t>(i)];
        traj.neutral_adjusted[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
    }

    for (long k = 0; k < steps; ++k) {
        const double t = t_offset + grid.time(k);
        ctx.end_row = L + k;
        sys.eval_all(t, ctx, eval);

        for (int i = 0; i < d; ++i) {
            double incr = eval.b[static_cast<std::size_t>(i)] * grid.dt;
            // Frobenius pairing <h^i, dQV_k>.
            for (int j = 0; j < m; ++j)
                for (int l = 0; l < m; ++l)
                    incr += eval.h_at(i, j, l, m) * driver.dqv(k, j, l);
            for (int j = 0; j < m; ++j)
                incr += eval.sigma[static_cast<std::size_t>(i) * m + j] * driver.db(k, j);
            v_next[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)] + incr;
        }

        // Y(t_{k+1}) = V_{k+1} + N(segment ending in Y(t_{k+1})), by Banach
        // iteration from the previous state. When N never reads the
        // endpoint the first evaluation is already the fixed point.
        const long row_next = L + k + 1;
        for (int i = 0; i < d; ++i)
            traj.values[static_cast<std::size_t>(row_next) * d + i] =
                traj.values[static_cast<std::size_t>(row_next - 1) * d + i];
        ctx.end_row = row_next;
        int iterations = 0;
        if (!sys.neutral_reads_endpoint()) {
            sys.eval_neutral(ctx, n_buf.data());
            for (int i = 0; i < d; ++i)
                traj.values[static_cast<std::size_t>(row_next) * d + i] =
                    v_next[static_cast<std::size_t>(i)] + n_buf[static_cast<std::size_t>(i)];
            iterations = 1;
        } else {
            double residual = 0.0;
            int iter = 0;
            for (; iter < fp.max_iter; ++iter) {
                sys.eval_neutral(ctx, n_buf.data());
                residual = 0.0;
                for (int i = 0; i < d; ++i) {
                    const double u = v_next[static_cast<std::size_t>(i)] +
                                     n_buf[static_cast<std::size_t>(i)];
                    residual = std::max(
                        residual,
                        std::abs(u - traj.values[static_cast<std::size_t>(row_next) * d + i]));
                    traj.values[static_cast<std::size_t>(row_next) * d + i] = u;
                }
                if (!std::isfinite(residual))
                    throw SolverError("non-finite state", k + 1, residual);
                if (residual <= fp.tol) break;
            }
            if (residual > fp.tol)
                throw SolverError("fixed-point iteration did not converge", k + 1, residual);
            iterations = iter + 1;
            if (stats) stats->max_fp_residual = std::max(stats->max_fp_residual, residual);
        }
        if (stats) {
            stats->total_fp_iterations += iterations;
            stats->max_fp_iterations = std::max(stats->max_fp_iterations, iterations);
        }

        for (int i = 0; i < d; ++i) {
            const double y = traj.values[static_cast<std::size_t>(row_next) * d + i];
            if (!std::isfinite(y) || std::abs(y) > 1e9)
                throw SolverError("non-finite state", k + 1, std::abs(y));
            v[static_cast<std::size_t>(i)] = v_next[static_cast<std::size_t>(i)];
            traj.neutral_adjusted[static_cast<std::size_t>(k + 1) * d + i] =
                v[static_cast<std::size_t>(i)];
        }
    }
    return traj;
}

PairTrajectory solve_pair(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                          const Segment& init_a, const Segment& init_b, const DriverPath& driver,
                          const FixedPointParams& fp, double t_offset) {
    if (sys_a.d() != sys_b.d() || sys_a.m() != sys_b.m() ||
        sys_a.delay_steps() != sys_b.delay_steps())
        throw std::invalid_argument("solve_pair: systems have mismatched shapes");
    if (!sys_a.same_neutral_as(sys_b))
        throw std::invalid_argument("solve_pair: both systems must carry the same neutral term");
    PairTrajectory pair{solve(sys_a, init_a, driver, fp, t_offset),
                        solve(sys_b, init_b, driver, fp, t_offset)};
    return pair;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& filename) {
    std::ofstream out(filename);
    if (!out) throw std::runtime_error("cannot open " + filename);
    out << "t";
    for (int i = 1; i <= traj.d; ++i) out << ",Y_" << i;
    for (int i = 1; i <= traj.d; ++i) out << ",YN_" << i;
    out << "\n";
    for (long k = -traj.grid.delay_steps; k <= traj.grid.steps; ++k) {
        out << format_double(traj.grid.time(k));
        for (int i = 0; i < traj.d; ++i) out << ',' << format_double(traj.value(k, i));
        for (int i = 0; i < traj.d; ++i) {
            out << ',';
            out << (k < 0 ? "nan" : format_double(traj.adjusted(k, i)));
        }
        out << "\n";
    }
}

} // namespace gnsfde
