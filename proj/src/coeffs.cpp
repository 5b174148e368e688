#include "gnsfde/coeffs.hpp"

#include "gnsfde/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gnsfde {

namespace {

long delay_steps_from(double r0, double dt) {
    const double ratio = r0 / dt;
    const long L = std::lround(ratio);
    if (L < 0 || std::abs(ratio - static_cast<double>(L)) > 1e-9 * std::max(1.0, std::abs(ratio)))
        throw std::invalid_argument("r0 must be a nonnegative integer multiple of dt");
    return L;
}

} // namespace

void CoefficientSystem::Eval::resize(int d, int m) {
    b.assign(static_cast<std::size_t>(d), 0.0);
    h.assign(static_cast<std::size_t>(d) * m * m, 0.0);
    sigma.assign(static_cast<std::size_t>(d) * m, 0.0);
    neutral.assign(static_cast<std::size_t>(d), 0.0);
    z.assign(static_cast<std::size_t>(d), 0.0);
}

CoefficientSystem::CoefficientSystem(int d, const GBounds& bounds, double r0, double dt,
                                     std::vector<Expr> drift,
                                     std::vector<std::vector<Expr>> h_upper,
                                     std::vector<Expr> diffusion, std::vector<Expr> neutral,
                                     double kappa_declared)
    : d_(d),
      bounds_(bounds),
      dt_(dt),
      delay_steps_(delay_steps_from(r0, dt)),
      kappa_(kappa_declared),
      drift_(std::move(drift)),
      h_upper_(std::move(h_upper)),
      diffusion_(std::move(diffusion)),
      neutral_(std::move(neutral)) {
    if (d_ < 1) throw std::invalid_argument("CoefficientSystem: d must be >= 1");
    if (!(dt_ > 0.0)) throw std::invalid_argument("CoefficientSystem: dt must be positive");
    if (!(kappa_ >= 0.0) || kappa_ >= 1.0)
        throw std::invalid_argument("CoefficientSystem: kappa_declared must lie in [0, 1)");
    const int m = bounds_.dim;
    const std::size_t h_len = static_cast<std::size_t>(m) * (m + 1) / 2;
    if (drift_.size() != static_cast<std::size_t>(d_) ||
        h_upper_.size() != static_cast<std::size_t>(d_) ||
        diffusion_.size() != static_cast<std::size_t>(d_) * m ||
        neutral_.size() != static_cast<std::size_t>(d_))
        throw std::invalid_argument("CoefficientSystem: coefficient array shapes do not match d, m");
    for (const auto& row : h_upper_)
        if (row.size() != h_len)
            throw std::invalid_argument("CoefficientSystem: h must provide the (j <= l) upper "
                                        "triangle per component");

    CompiledExpr::Binding full;
    full.d = d_;
    full.delay_steps = delay_steps_;
    full.dt = dt_;
    CompiledExpr::Binding neutral_binding = full;
    neutral_binding.allow_neutral_reads = false; // z inside N would be circular
    neutral_binding.allow_time = false;          // N maps segments only

    for (const Expr& e : drift_) c_drift_.push_back(CompiledExpr::compile(e, full));
    for (const auto& row : h_upper_) {
        std::vector<CompiledExpr> crow;
        for (const Expr& e : row) crow.push_back(CompiledExpr::compile(e, full));
        c_h_.push_back(std::move(crow));
    }
    for (const Expr& e : diffusion_) c_diffusion_.push_back(CompiledExpr::compile(e, full));
    for (const Expr& e : neutral_) {
        c_neutral_.push_back(CompiledExpr::compile(e, neutral_binding));
        for (const Expr::Node& n : e.nodes())
            if (n.kind == Expr::Node::Kind::segment_read && std::lround(n.lag / dt_) == 0)
                neutral_reads_endpoint_ = true;
    }

    // N(0) = 0 construction check.
    const Segment zero = constant_segment(d_, delay_steps_, dt_, 0.0);
    const std::vector<double> n0 = neutral_of(zero);
    for (double v : n0)
        if (std::abs(v) > 1e-12)
            throw std::invalid_argument("CoefficientSystem: neutral term must satisfy N(0) = 0");
}

void CoefficientSystem::eval_neutral(const EvalContext& ctx, double* out) const {
    for (int i = 0; i < d_; ++i) out[i] = c_neutral_[static_cast<std::size_t>(i)].eval(ctx);
}

void CoefficientSystem::eval_z(const EvalContext& ctx, double* out) const {
    eval_neutral(ctx, out);
    for (int i = 0; i < d_; ++i)
        out[i] = ctx.history[static_cast<std::size_t>(ctx.end_row) * ctx.d + i] - out[i];
}

void CoefficientSystem::eval_all(double t, const EvalContext& seg, Eval& out) const {
    const int m = bounds_.dim;
    if (out.b.size() != static_cast<std::size_t>(d_)) out.resize(d_, m);
    EvalContext ctx = seg;
    ctx.t = t;
    eval_neutral(ctx, out.neutral.data());
    for (int i = 0; i < d_; ++i)
        out.z[static_cast<std::size_t>(i)] =
            ctx.history[static_cast<std::size_t>(ctx.end_row) * ctx.d + i] -
            out.neutral[static_cast<std::size_t>(i)];
    ctx.z = out.z.data();
    for (int i = 0; i < d_; ++i)
        out.b[static_cast<std::size_t>(i)] = c_drift_[static_cast<std::size_t>(i)].eval(ctx);
    for (int i = 0; i < d_; ++i) {
        const auto& row = c_h_[static_cast<std::size_t>(i)];
        for (int j = 0; j < m; ++j)
            for (int l = j; l < m; ++l) {
                const double v = row[static_cast<std::size_t>(h_index(j, l))].eval(ctx);
                out.h[(static_cast<std::size_t>(i) * m + j) * m + l] = v;
                out.h[(static_cast<std::size_t>(i) * m + l) * m + j] = v;
            }
    }
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < m; ++j)
            out.sigma[static_cast<std::size_t>(i) * m + j] =
                c_diffusion_[static_cast<std::size_t>(i) * m + j].eval(ctx);

    for (double v : out.b)
        if (!std::isfinite(v)) throw std::runtime_error("coefficient evaluation is not finite");
    for (double v : out.h)
        if (!std::isfinite(v)) throw std::runtime_error("coefficient evaluation is not finite");
    for (double v : out.sigma)
        if (!std::isfinite(v)) throw std::runtime_error("coefficient evaluation is not finite");
}

SymMatrix CoefficientSystem::h_matrix(const Eval& e, int i) const {
    const int m = bounds_.dim;
    Eigen::MatrixXd h(m, m);
    for (int j = 0; j < m; ++j)
        for (int l = 0; l < m; ++l) h(j, l) = e.h_at(i, j, l, m);
    return SymMatrix(h);
}

std::vector<double> CoefficientSystem::neutral_of(const Segment& s) const {
    require_segment_shape(s);
    std::vector<double> out(static_cast<std::size_t>(d_));
    eval_neutral(segment_context(s, 0.0), out.data());
    return out;
}

std::vector<double> CoefficientSystem::z_of(const Segment& s) const {
    require_segment_shape(s);
    std::vector<double> out(static_cast<std::size_t>(d_));
    eval_z(segment_context(s, 0.0), out.data());
    return out;
}

NeutralFunctional CoefficientSystem::neutral_functional() const {
    return [this](const Segment& s) { return neutral_of(s); };
}

void CoefficientSystem::require_segment_shape(const Segment& s) const {
    if (s.d != d_ || s.delay_steps != delay_steps_)
        throw std::invalid_argument("segment shape does not match the coefficient system");
}

bool CoefficientSystem::same_neutral_as(const CoefficientSystem& other) const {
    if (d_ != other.d_ || delay_steps_ != other.delay_steps_) return false;
    for (int i = 0; i < d_; ++i)
        if (!neutral_[static_cast<std::size_t>(i)].equals(other.neutral_[static_cast<std::size_t>(i)]))
            return false;
    return true;
}

bool CoefficientSystem::same_diffusion_as(const CoefficientSystem& other) const {
    if (d_ != other.d_ || bounds_.dim != other.bounds_.dim) return false;
    for (std::size_t i = 0; i < diffusion_.size(); ++i)
        if (!diffusion_[i].equals(other.diffusion_[i])) return false;
    return true;
}

CoefficientSystem CoefficientSystem::with_shifted_drift(double eps) const {
    if (!(eps > 0.0)) throw std::invalid_argument("drift shift requires eps > 0");
    std::vector<Expr> shifted;
    shifted.reserve(drift_.size());
    for (const Expr& e : drift_) shifted.push_back(Expr::add_constant(e, eps));
    return CoefficientSystem(d_, bounds_, r0(), dt_, std::move(shifted), h_upper_, diffusion_,
                             neutral_, kappa_);
}

Segment random_segment(int d, long delay_steps, double dt, double amplitude,
                       const CounterRng& rng, std::uint64_t block) {
    Segment s;
    s.d = d;
    s.delay_steps = delay_steps;
    s.dt = dt;
    s.values.resize(static_cast<std::size_t>(delay_steps + 1) * d);
    const double denom = static_cast<double>(std::max<long>(delay_steps, 1));
    constexpr int modes = 3;
    std::uint64_t c = block * static_cast<std::uint64_t>(d) * (2 * modes + 1);
    for (int i = 0; i < d; ++i) {
        const double c0 = rng.uniform(c++, -amplitude, amplitude);
        double a[modes], phi[modes];
        for (int j = 0; j < modes; ++j) {
            a[j] = rng.uniform(c++, -amplitude, amplitude) / (j + 1.0);
            phi[j] = rng.uniform(c++, 0.0, 6.283185307179586);
        }
        for (long l = 0; l <= delay_steps; ++l) {
            const double u = static_cast<double>(l) / denom;
            double v = c0;
            for (int j = 0; j < modes; ++j) v += a[j] * std::cos((j + 1) * 3.141592653589793 * u + phi[j]);
            s.at(l, i) = v;
        }
    }
    return s;
}

bool solve_endpoint(const CoefficientSystem& sys, Segment& xi, int i, double target, double tol,
                    int max_iter) {
    sys.require_segment_shape(xi);
    std::vector<double> n(static_cast<std::size_t>(sys.d()));
    double u = xi.endpoint(i);
    for (int it = 0; it < max_iter; ++it) {
        xi.at(xi.delay_steps, i) = u;
        sys.eval_neutral(segment_context(xi, 0.0), n.data());
        const double next = target + n[static_cast<std::size_t>(i)];
        if (!std::isfinite(next)) return false;
        const double delta = std::abs(next - u);
        u = next;
        if (delta <= tol) {
            xi.at(xi.delay_steps, i) = u;
            sys.eval_neutral(segment_context(xi, 0.0), n.data());
            return std::abs(u - n[static_cast<std::size_t>(i)] - target) <= 1e-10;
        }
    }
    return false;
}

namespace {

std::vector<double> check_times(double horizon, int count) {
    std::vector<double> ts;
    ts.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        ts.push_back(horizon * static_cast<double>(k) / static_cast<double>(count - 1));
    return ts;
}

double sup_gap(const Segment& a, const Segment& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        s = std::max(s, std::abs(a.values[i] - b.values[i]));
    return s;
}

double squared_coefficient_gap(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                               double t, const Segment& xi, const Segment& eta,
                               CoefficientSystem::Eval scratch[4]) {
    sys_a.eval_all(t, segment_context(xi, t), scratch[0]);
    sys_a.eval_all(t, segment_context(eta, t), scratch[1]);
    sys_b.eval_all(t, segment_context(xi, t), scratch[2]);
    sys_b.eval_all(t, segment_context(eta, t), scratch[3]);
    double total = 0.0;
    const auto add_sq = [&total](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double g = u[k] - v[k];
            s += g * g;
        }
        total += s;
    };
    add_sq(scratch[0].b, scratch[1].b);
    add_sq(scratch[2].b, scratch[3].b);
    add_sq(scratch[0].h, scratch[1].h);
    add_sq(scratch[2].h, scratch[3].h);
    add_sq(scratch[0].sigma, scratch[1].sigma);
    add_sq(scratch[2].sigma, scratch[3].sigma);
    return total;
}

/// Builds xi <= eta with a nonnegative random gap subtracted from eta.
void make_ordered_pair(const CoefficientSystem& sys, const SamplerSpec& sampler,
                       const CounterRng& rng, std::uint64_t block, Segment& xi, Segment& eta) {
    eta = random_segment(sys.d(), sys.delay_steps(), sys.dt(), sampler.amplitude, rng, 2 * block);
    const Segment gap =
        random_segment(sys.d(), sys.delay_steps(), sys.dt(), sampler.amplitude, rng, 2 * block + 1);
    xi = eta;
    for (std::size_t k = 0; k < xi.values.size(); ++k)
        xi.values[k] -= 0.5 * std::abs(gap.values[k]);
}

} // namespace

std::vector<ConditionReport> check_h1_h4(const CoefficientSystem& sys_a,
                                         const CoefficientSystem& sys_b,
                                         const SamplerSpec& sampler, double horizon,
                                         std::optional<double> k_declared) {
    const CounterRng rng(sampler.seed, 0, StreamTag::sampler_segments);
    const std::vector<double> ts = check_times(horizon, 5);
    CoefficientSystem::Eval scratch[4];
    for (auto& s : scratch) s.resize(sys_a.d(), sys_a.m());

    std::vector<ConditionReport> reports;

    // (H1): max sampled ratio of squared coefficient gaps to ||xi-eta||_inf^2.
    {
        ConditionReport r;
        r.id = "H1";
        double alpha_hat = 0.0;
        ConditionWitness worst;
        for (long p = 0; p < sampler.n_pairs; ++p) {
            const Segment xi = random_segment(sys_a.d(), sys_a.delay_steps(), sys_a.dt(),
                                              sampler.amplitude, rng, 4 * static_cast<std::uint64_t>(p));
            const Segment eta = random_segment(sys_a.d(), sys_a.delay_steps(), sys_a.dt(),
                                               sampler.amplitude, rng,
                                               4 * static_cast<std::uint64_t>(p) + 1);
            const double denom = sup_gap(xi, eta);
            if (denom < 1e-12) continue;
            for (double t : ts) {
                const double ratio =
                    squared_coefficient_gap(sys_a, sys_b, t, xi, eta, scratch) / (denom * denom);
                if (!std::isfinite(ratio)) {
                    r.verdict = ConditionReport::Verdict::fail;
                    r.witness = ConditionWitness{xi, eta, t, 0, 0, "non-finite gap ratio"};
                    r.margin = std::numeric_limits<double>::quiet_NaN();
                }
                if (ratio > alpha_hat) {
                    alpha_hat = ratio;
                    worst = ConditionWitness{xi, eta, t, 0, 0, "worst Lipschitz ratio"};
                }
            }
        }
        if (r.verdict == ConditionReport::Verdict::pass) {
            r.margin = alpha_hat;
            r.witness = worst;
            r.detail = "alpha_hat (max sampled squared-gap ratio)";
        }
        reports.push_back(std::move(r));
    }

    // (H2): zero-segment coefficient bound over the time grid.
    {
        ConditionReport r;
        r.id = "H2";
        const Segment zero = constant_segment(sys_a.d(), sys_a.delay_steps(), sys_a.dt(), 0.0);
        double k_hat = 0.0;
        for (double t : check_times(horizon, 17)) {
            sys_a.eval_all(t, segment_context(zero, t), scratch[0]);
            sys_b.eval_all(t, segment_context(zero, t), scratch[1]);
            double v = 0.0;
            const auto add_sq = [&v](const std::vector<double>& u) {
                for (double x : u) v += x * x;
            };
            add_sq(scratch[0].b);
            add_sq(scratch[1].b);
            add_sq(scratch[0].h);
            add_sq(scratch[1].h);
            add_sq(scratch[0].sigma);
            add_sq(scratch[1].sigma);
            k_hat = std::max(k_hat, v);
        }
        if (!std::isfinite(k_hat)) {
            r.verdict = ConditionReport::Verdict::fail;
            r.margin = std::numeric_limits<double>::quiet_NaN();
        } else if (k_declared) {
            r.margin = *k_declared - k_hat;
            if (r.margin < 0.0) r.verdict = ConditionReport::Verdict::fail;
            r.detail = "declared K minus K_hat";
        } else {
            r.margin = k_hat;
            r.detail = "K_hat (no K declared)";
        }
        reports.push_back(std::move(r));
    }

    // (H3): N(0) = 0 and monotonicity over ordered pairs.
    {
        ConditionReport r;
        r.id = "H3";
        const Segment zero = constant_segment(sys_a.d(), sys_a.delay_steps(), sys_a.dt(), 0.0);
        double margin = std::numeric_limits<double>::infinity();
        for (const CoefficientSystem* sys : {&sys_a, &sys_b}) {
            for (double v : sys->neutral_of(zero))
                if (std::abs(v) > 1e-12) {
                    r.verdict = ConditionReport::Verdict::fail;
                    r.detail = "N(0) != 0";
                    margin = -std::abs(v);
                }
        }
        ConditionWitness worst;
        bool have_witness = false;
        for (long p = 0; p < sampler.n_pairs; ++p) {
            Segment xi, eta;
            make_ordered_pair(sys_a, sampler, rng, 1'000'000 + static_cast<std::uint64_t>(p), xi,
                              eta);
            for (const CoefficientSystem* sys : {&sys_a, &sys_b}) {
                const std::vector<double> n_xi = sys->neutral_of(xi);
                const std::vector<double> n_eta = sys->neutral_of(eta);
                for (int i = 0; i < sys->d(); ++i) {
                    const double slack = n_eta[static_cast<std::size_t>(i)] -
                                         n_xi[static_cast<std::size_t>(i)];
                    if (slack < margin) {
                        margin = slack;
                        worst = ConditionWitness{xi, eta, 0.0, i + 1, 0, "monotonicity slack"};
                        have_witness = true;
                    }
                }
            }
        }
        if (margin < -1e-12) r.verdict = ConditionReport::Verdict::fail;
        r.margin = margin;
        if (have_witness) r.witness = worst;
        r.detail = r.detail.empty() ? "min over samples of N(eta) - N(xi)" : r.detail;
        reports.push_back(std::move(r));
    }

    // (H4): contraction ratio of N against the declared kappa.
    {
        ConditionReport r;
        r.id = "H4";
        double kappa_hat = 0.0;
        ConditionWitness worst;
        for (long p = 0; p < sampler.n_pairs; ++p) {
            const Segment xi =
                random_segment(sys_a.d(), sys_a.delay_steps(), sys_a.dt(), sampler.amplitude, rng,
                               2'000'000 + 2 * static_cast<std::uint64_t>(p));
            const Segment eta =
                random_segment(sys_a.d(), sys_a.delay_steps(), sys_a.dt(), sampler.amplitude, rng,
                               2'000'000 + 2 * static_cast<std::uint64_t>(p) + 1);
            double denom = 0.0;
            for (int i = 0; i < xi.d; ++i) {
                double comp_sup = 0.0;
                for (long l = 0; l <= xi.delay_steps; ++l)
                    comp_sup = std::max(comp_sup, std::abs(xi.at(l, i) - eta.at(l, i)));
                denom = std::max(denom, comp_sup);
            }
            if (denom < 1e-12) continue;
            for (const CoefficientSystem* sys : {&sys_a, &sys_b}) {
                const std::vector<double> n_xi = sys->neutral_of(xi);
                const std::vector<double> n_eta = sys->neutral_of(eta);
                double num = 0.0;
                for (int i = 0; i < sys->d(); ++i) {
                    const double g = n_xi[static_cast<std::size_t>(i)] -
                                     n_eta[static_cast<std::size_t>(i)];
                    num += g * g;
                }
                const double ratio = std::sqrt(num) / denom;
                if (ratio > kappa_hat) {
                    kappa_hat = ratio;
                    worst = ConditionWitness{xi, eta, 0.0, 0, 0, "worst contraction ratio"};
                }
            }
        }
        const double kappa = std::max(sys_a.kappa(), sys_b.kappa());
        r.margin = kappa + 1e-9 - kappa_hat;
        if (!(kappa < 1.0) || r.margin < 0.0) r.verdict = ConditionReport::Verdict::fail;
        r.witness = worst;
        r.detail = "kappa_declared + 1e-9 - kappa_hat, kappa_hat = " + format_double(kappa_hat);
        reports.push_back(std::move(r));
    }

    return reports;
}

namespace {

/// Builds a constrained pair for (A1): xi <=_N eta with the component-i
/// neutral-adjusted endpoints equal (xi under sys_a's N, eta under sys_b's).
/// Returns false when the repair iteration fails to produce a valid pair.
bool make_boundary_pair(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                        const SamplerSpec& sampler, const CounterRng& rng, std::uint64_t block,
                        int i, Segment& xi, Segment& eta) {
    make_ordered_pair(sys_a, sampler, rng, block, xi, eta);
    const std::vector<double> z_eta = sys_b.z_of(eta);
    const double target = z_eta[static_cast<std::size_t>(i)];

    for (int pass = 0; pass < 60; ++pass) {
        if (!solve_endpoint(sys_a, xi, i, target)) return false;
        double worst = 0.0;
        const std::vector<double> z_xi = sys_a.z_of(xi);
        for (int j = 0; j < sys_a.d(); ++j) {
            if (j == i) continue;
            const double excess =
                z_xi[static_cast<std::size_t>(j)] - z_eta[static_cast<std::size_t>(j)];
            if (excess > 0.0) {
                xi.at(xi.delay_steps, j) -= excess;
                worst = std::max(worst, excess);
            }
        }
        if (worst <= 1e-13) break;
    }

    // Validate the constructed pair.
    if (!leq(xi, eta)) return false;
    const std::vector<double> z_xi = sys_a.z_of(xi);
    for (int j = 0; j < sys_a.d(); ++j) {
        const double gap = z_xi[static_cast<std::size_t>(j)] - z_eta[static_cast<std::size_t>(j)];
        if (j == i ? std::abs(gap) > 1e-10 : gap > 1e-10) return false;
    }
    return true;
}

double a1_expression(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b, double t,
                     const Segment& xi, const Segment& eta, int i,
                     CoefficientSystem::Eval& ea, CoefficientSystem::Eval& eb) {
    sys_a.eval_all(t, segment_context(xi, t), ea);
    sys_b.eval_all(t, segment_context(eta, t), eb);
    const SymMatrix h_gap = sys_a.h_matrix(ea, i) - sys_b.h_matrix(eb, i);
    return ea.b[static_cast<std::size_t>(i)] - eb.b[static_cast<std::size_t>(i)] +
           2.0 * g_value(h_gap, sys_a.bounds());
}

} // namespace

ConditionReport check_a1(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                         const SamplerSpec& sampler, double horizon, double strict_eps) {
    ConditionReport r;
    r.id = "A1";
    const CounterRng rng(sampler.seed, 1, StreamTag::sampler_segments);
    const std::vector<double> ts = check_times(horizon, 5);
    CoefficientSystem::Eval ea, eb;
    ea.resize(sys_a.d(), sys_a.m());
    eb.resize(sys_b.d(), sys_b.m());

    double worst_value = -std::numeric_limits<double>::infinity();
    ConditionWitness worst;
    long valid = 0;
    for (long p = 0; p < sampler.n_pairs; ++p) {
        for (int i = 0; i < sys_a.d(); ++i) {
            Segment xi, eta;
            const std::uint64_t block =
                static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(sys_a.d()) +
                static_cast<std::uint64_t>(i);
            if (!make_boundary_pair(sys_a, sys_b, sampler, rng, block, i, xi, eta)) continue;
            ++valid;
            for (double t : ts) {
                const double v = a1_expression(sys_a, sys_b, t, xi, eta, i, ea, eb);
                if (v > worst_value) {
                    worst_value = v;
                    worst = ConditionWitness{xi, eta, t, i + 1, 0, "worst drift-gap value"};
                }
            }
        }
    }
    if (valid == 0) {
        r.verdict = ConditionReport::Verdict::inconclusive;
        r.detail = "no constrained pair could be constructed";
        return r;
    }
    r.margin = -worst_value;
    r.witness = worst;
    r.verdict = worst_value <= 1e-9 ? ConditionReport::Verdict::pass
                                    : ConditionReport::Verdict::fail;
    r.detail = "margin = -max expression value; strict (A1') iff margin > " +
               format_double(strict_eps);
    return r;
}

ConditionReport check_a2(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                         const SamplerSpec& sampler) {
    ConditionReport r;
    r.id = "A2";
    const CounterRng rng(sampler.seed, 2, StreamTag::sampler_segments);
    const int d = sys_a.d();
    const int m = sys_a.m();
    CoefficientSystem::Eval ea, eb;
    ea.resize(d, m);
    eb.resize(d, m);

    // (i) sigma == sigma_bar: structural short-circuit, otherwise sampled.
    double sigma_mismatch = 0.0;
    ConditionWitness mismatch_witness;
    if (!sys_a.same_diffusion_as(sys_b)) {
        for (long p = 0; p < sampler.n_pairs; ++p) {
            const Segment xi = random_segment(d, sys_a.delay_steps(), sys_a.dt(),
                                              sampler.amplitude, rng,
                                              static_cast<std::uint64_t>(p));
            for (double t : {0.0, 0.5, 1.0}) {
                sys_a.eval_all(t, segment_context(xi, t), ea);
                sys_b.eval_all(t, segment_context(xi, t), eb);
                for (std::size_t k = 0; k < ea.sigma.size(); ++k) {
                    const double gap = std::abs(ea.sigma[k] - eb.sigma[k]);
                    if (gap > sigma_mismatch) {
                        sigma_mismatch = gap;
                        mismatch_witness = ConditionWitness{
                            xi, xi, t, static_cast<int>(k) / m + 1, static_cast<int>(k) % m + 1,
                            "sigma != sigma_bar"};
                    }
                }
            }
        }
    }

    // (ii) static scan: sigma^{ij} may reference only t and z_i.
    bool static_ok = true;
    std::string static_note;
    for (int i = 0; i < d && static_ok; ++i)
        for (int j = 0; j < m && static_ok; ++j)
            for (const CoefficientSystem* sys : {&sys_a, &sys_b}) {
                for (const Expr::Node& n : sys->sigma_expr(i, j).nodes()) {
                    if (n.kind == Expr::Node::Kind::segment_read ||
                        (n.kind == Expr::Node::Kind::neutral_read && n.component != i + 1)) {
                        static_ok = false;
                        static_note = "sigma^{" + std::to_string(i + 1) + std::to_string(j + 1) +
                                      "} references more than t and z" + std::to_string(i + 1);
                        break;
                    }
                }
                if (!static_ok) break;
            }

    // (iii) numeric probe: perturb the segment while holding z_i fixed.
    double probe_dev = 0.0;
    ConditionWitness probe_witness;
    for (long p = 0; p < sampler.n_pairs; ++p) {
        const Segment xi = random_segment(d, sys_a.delay_steps(), sys_a.dt(), sampler.amplitude,
                                          rng, 10'000'000 + 2 * static_cast<std::uint64_t>(p));
        const Segment bump = random_segment(d, sys_a.delay_steps(), sys_a.dt(),
                                            0.5 * sampler.amplitude, rng,
                                            10'000'000 + 2 * static_cast<std::uint64_t>(p) + 1);
        const std::vector<double> z0 = sys_a.z_of(xi);
        for (int i = 0; i < d; ++i) {
            Segment perturbed = xi;
            for (std::size_t k = 0; k < perturbed.values.size(); ++k)
                perturbed.values[k] += bump.values[k];
            if (!solve_endpoint(sys_a, perturbed, i, z0[static_cast<std::size_t>(i)])) continue;
            for (double t : {0.0, 0.5, 1.0}) {
                sys_a.eval_all(t, segment_context(xi, t), ea);
                sys_a.eval_all(t, segment_context(perturbed, t), eb);
                for (int j = 0; j < m; ++j) {
                    const double dev = std::abs(ea.sigma[static_cast<std::size_t>(i) * m + j] -
                                                eb.sigma[static_cast<std::size_t>(i) * m + j]);
                    if (dev > probe_dev) {
                        probe_dev = dev;
                        probe_witness = ConditionWitness{xi, perturbed, t, i + 1, j + 1,
                                                         "sigma moved while z_i held fixed"};
                    }
                }
            }
        }
    }

    const double margin = std::min(1e-12 - sigma_mismatch, 1e-10 - probe_dev);
    r.margin = margin;
    if (sigma_mismatch > 1e-12) {
        r.verdict = ConditionReport::Verdict::fail;
        r.witness = mismatch_witness;
    } else if (probe_dev > 1e-10) {
        r.verdict = ConditionReport::Verdict::fail;
        r.witness = probe_witness;
    } else if (!static_ok) {
        r.verdict = ConditionReport::Verdict::fail;
        r.detail = static_note;
        return r;
    } else {
        r.witness = probe_witness;
    }
    if (!static_ok) r.detail = static_note;
    return r;
}

ConditionReport check_c2(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                         const SamplerSpec& sampler) {
    ConditionReport r;
    r.id = "C2";
    const CounterRng rng(sampler.seed, 3, StreamTag::sampler_segments);
    const int d = sys_a.d();
    const int m = sys_a.m();
    CoefficientSystem::Eval e[4];
    for (auto& s : e) s.resize(d, m);

    double l_hat = 0.0;
    ConditionWitness worst;
    for (long p = 0; p < sampler.n_pairs; ++p) {
        const Segment xi = random_segment(d, sys_a.delay_steps(), sys_a.dt(), sampler.amplitude,
                                          rng, 2 * static_cast<std::uint64_t>(p));
        const Segment eta = random_segment(d, sys_a.delay_steps(), sys_a.dt(), sampler.amplitude,
                                           rng, 2 * static_cast<std::uint64_t>(p) + 1);
        for (double t : {0.0, 0.5, 1.0}) {
            sys_a.eval_all(t, segment_context(xi, t), e[0]);
            sys_a.eval_all(t, segment_context(eta, t), e[1]);
            sys_b.eval_all(t, segment_context(xi, t), e[2]);
            sys_b.eval_all(t, segment_context(eta, t), e[3]);
            for (int i = 0; i < d; ++i) {
                double num = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double ga = e[0].sigma[static_cast<std::size_t>(i) * m + j] -
                                      e[1].sigma[static_cast<std::size_t>(i) * m + j];
                    const double gb = e[2].sigma[static_cast<std::size_t>(i) * m + j] -
                                      e[3].sigma[static_cast<std::size_t>(i) * m + j];
                    num += ga * ga + gb * gb;
                }
                const double dz = e[0].z[static_cast<std::size_t>(i)] -
                                  e[1].z[static_cast<std::size_t>(i)];
                const double denom = dz * dz;
                if (denom < 1e-14) {
                    if (num > 1e-12) {
                        r.verdict = ConditionReport::Verdict::fail;
                        r.witness = ConditionWitness{xi, eta, t, i + 1, 0,
                                                     "sigma gap with zero z gap"};
                        r.margin = -num;
                        return r;
                    }
                    continue;
                }
                const double ratio = num / denom;
                if (ratio > l_hat) {
                    l_hat = ratio;
                    worst = ConditionWitness{xi, eta, t, i + 1, 0, "worst (C2) ratio"};
                }
            }
        }
    }
    r.margin = l_hat;
    r.witness = worst;
    r.detail = "L_hat (max sampled (C2) ratio)";
    if (!std::isfinite(l_hat)) r.verdict = ConditionReport::Verdict::fail;
    return r;
}

double replay_condition_witness(const ConditionReport& report, const CoefficientSystem& sys_a,
                                const CoefficientSystem& sys_b) {
    if (!report.witness) throw std::invalid_argument("report carries no witness");
    const ConditionWitness& w = *report.witness;
    if (report.id == "H3") {
        double margin = std::numeric_limits<double>::infinity();
        for (const CoefficientSystem* sys : {&sys_a, &sys_b}) {
            const std::vector<double> n_xi = sys->neutral_of(w.xi);
            const std::vector<double> n_eta = sys->neutral_of(w.eta);
            for (int i = 0; i < sys->d(); ++i)
                margin = std::min(margin, n_eta[static_cast<std::size_t>(i)] -
                                              n_xi[static_cast<std::size_t>(i)]);
        }
        return margin;
    }
    if (report.id == "H4") {
        double denom = 0.0;
        for (int i = 0; i < w.xi.d; ++i) {
            double comp = 0.0;
            for (long l = 0; l <= w.xi.delay_steps; ++l)
                comp = std::max(comp, std::abs(w.xi.at(l, i) - w.eta.at(l, i)));
            denom = std::max(denom, comp);
        }
        double kappa_hat = 0.0;
        for (const CoefficientSystem* sys : {&sys_a, &sys_b}) {
            const std::vector<double> n_xi = sys->neutral_of(w.xi);
            const std::vector<double> n_eta = sys->neutral_of(w.eta);
            double num = 0.0;
            for (int i = 0; i < sys->d(); ++i) {
                const double g =
                    n_xi[static_cast<std::size_t>(i)] - n_eta[static_cast<std::size_t>(i)];
                num += g * g;
            }
            kappa_hat = std::max(kappa_hat, std::sqrt(num) / denom);
        }
        return std::max(sys_a.kappa(), sys_b.kappa()) + 1e-9 - kappa_hat;
    }
    if (report.id == "A1") {
        CoefficientSystem::Eval ea, eb;
        ea.resize(sys_a.d(), sys_a.m());
        eb.resize(sys_b.d(), sys_b.m());
        return -a1_expression(sys_a, sys_b, w.t, w.xi, w.eta, w.component - 1, ea, eb);
    }
    if (report.id == "A2") {
        CoefficientSystem::Eval ea, eb;
        ea.resize(sys_a.d(), sys_a.m());
        eb.resize(sys_b.d(), sys_b.m());
        if (w.note == "sigma != sigma_bar") {
            sys_a.eval_all(w.t, segment_context(w.xi, w.t), ea);
            sys_b.eval_all(w.t, segment_context(w.xi, w.t), eb);
            const std::size_t k = static_cast<std::size_t>(w.component - 1) * sys_a.m() +
                                  (w.column - 1);
            return 1e-12 - std::abs(ea.sigma[k] - eb.sigma[k]);
        }
        sys_a.eval_all(w.t, segment_context(w.xi, w.t), ea);
        sys_a.eval_all(w.t, segment_context(w.eta, w.t), eb);
        const std::size_t k = static_cast<std::size_t>(w.component - 1) * sys_a.m() +
                              (w.column - 1);
        return 1e-10 - std::abs(ea.sigma[k] - eb.sigma[k]);
    }
    throw std::invalid_argument("replay not supported for condition " + report.id);
}

} // namespace gnsfde
