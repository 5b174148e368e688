#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gnsfde/coeffs.hpp"

#include <cmath>

using namespace gnsfde;

namespace {

// d = m = 1 system on r0 = 0.25, dt = 1/16.
CoefficientSystem scalar_system(const std::string& b, const std::string& h,
                                const std::string& sigma, const std::string& neutral,
                                double kappa, double sigma_low = 1.0, double sigma_high = 2.0) {
    return CoefficientSystem(1, GBounds(sigma_low, sigma_high, 1), 0.25, 1.0 / 16,
                             {Expr::parse(b)}, {{Expr::parse(h)}}, {Expr::parse(sigma)},
                             {Expr::parse(neutral)}, kappa);
}

const SamplerSpec kSampler{120, 1.0, 7};

} // namespace

TEST_CASE("eval_system resolves z after the neutral term") {
    // d = 1, N = 0.5 * x1(-1) (r0 = 1), xi == 1, sigma = z1 -> 0.5.
    const CoefficientSystem sys(1, GBounds(1.0, 2.0, 1), 1.0, 0.25, {Expr::parse("0")},
                                {{Expr::parse("0")}}, {Expr::parse("z1")},
                                {Expr::parse("0.5*x1(-1)")}, 0.5);
    const Segment xi = constant_segment(1, 4, 0.25, 1.0);
    CoefficientSystem::Eval out;
    sys.eval_all(0.0, segment_context(xi, 0.0), out);
    CHECK(out.neutral[0] == 0.5);
    CHECK(out.z[0] == 0.5);
    CHECK(out.sigma[0] == 0.5);
    CHECK(out.b[0] == 0.0);
}

TEST_CASE("all-zero coefficients evaluate to zero and b substitutes directly") {
    const CoefficientSystem zeros = scalar_system("0", "0", "0", "0", 0.0);
    const Segment xi = constant_segment(1, 4, 1.0 / 16, 3.25);
    CoefficientSystem::Eval out;
    zeros.eval_all(1.0, segment_context(xi, 1.0), out);
    CHECK(out.b[0] == 0.0);
    CHECK(out.h[0] == 0.0);
    CHECK(out.sigma[0] == 0.0);
    CHECK(out.neutral[0] == 0.0);

    const CoefficientSystem direct = scalar_system("-x1(0)", "0", "0", "0", 0.0);
    const Segment two = constant_segment(1, 4, 1.0 / 16, 2.0);
    direct.eval_all(0.0, segment_context(two, 0.0), out);
    CHECK(out.b[0] == -2.0);
}

TEST_CASE("construction checks N(0) = 0 and shapes") {
    CHECK_THROWS_AS(scalar_system("0", "0", "0", "0.3*x1(-0.25) + 1", 0.3),
                    std::invalid_argument);
    CHECK_THROWS_AS(scalar_system("0", "0", "0", "z1", 0.3), std::invalid_argument);
    CHECK_THROWS_AS(scalar_system("0", "0", "0", "0", 1.0), std::invalid_argument);
    // h must be the upper triangle: wrong length rejected.
    CHECK_THROWS_AS(CoefficientSystem(1, GBounds(1.0, 2.0, 2), 0.25, 1.0 / 16,
                                      {Expr::parse("0")}, {{Expr::parse("0")}},
                                      {Expr::parse("0"), Expr::parse("0")}, {Expr::parse("0")},
                                      0.0),
                    std::invalid_argument);
}

TEST_CASE("H4 estimates the declared contraction constant") {
    const CoefficientSystem sys = scalar_system("0", "0", "0.4*z1 + 0.1", "0.3*x1(-0.25)", 0.3);
    const auto reports = check_h1_h4(sys, sys, kSampler, 1.0);
    REQUIRE(reports.size() == 4);
    const ConditionReport& h4 = reports[3];
    CHECK(h4.id == "H4");
    CHECK(h4.verdict == ConditionReport::Verdict::pass);
    // ratio is exactly 0.3 for every pair with differing delayed values
    CHECK(h4.margin == doctest::Approx(1e-9).epsilon(0.5));
}

TEST_CASE("H3 and H4 trivially pass for N = 0") {
    const CoefficientSystem sys = scalar_system("0", "0", "0.1", "0", 0.0);
    const auto reports = check_h1_h4(sys, sys, kSampler, 1.0);
    CHECK(reports[2].verdict == ConditionReport::Verdict::pass);
    CHECK(reports[3].verdict == ConditionReport::Verdict::pass);
}

TEST_CASE("H3 fails with a replayable ordered witness for decreasing N") {
    const CoefficientSystem sys = scalar_system("0", "0", "0.1", "-x1(-0.25)", 0.5);
    const auto reports = check_h1_h4(sys, sys, kSampler, 1.0);
    const ConditionReport& h3 = reports[2];
    CHECK(h3.verdict == ConditionReport::Verdict::fail);
    CHECK(h3.margin < 0.0);
    REQUIRE(h3.witness.has_value());
    CHECK(leq(h3.witness->xi, h3.witness->eta));
    CHECK(replay_condition_witness(h3, sys, sys) == doctest::Approx(h3.margin).epsilon(1e-12));
}

TEST_CASE("H1 and H2 report finite estimates for Lipschitz systems") {
    const CoefficientSystem sys =
        scalar_system("-0.5*z1 + 0.5*x1(-0.25)", "0.2*z1 + 0.1*x1(-0.25)", "0.4*z1 + 0.1",
                      "0.3*x1(-0.25)", 0.3);
    const auto reports = check_h1_h4(sys, sys, kSampler, 2.0);
    CHECK(reports[0].verdict == ConditionReport::Verdict::pass);
    CHECK(std::isfinite(reports[0].margin));
    CHECK(reports[0].margin > 0.0);
    CHECK(reports[1].verdict == ConditionReport::Verdict::pass);
    CHECK(std::isfinite(reports[1].margin));
}

TEST_CASE("H2 against a declared K") {
    const CoefficientSystem sys = scalar_system("1", "0", "0.5", "0", 0.0);
    // zero-segment value = 1^2 + 1^2 + 0.5^2 + 0.5^2 = 2.5 for the pair
    const auto pass = check_h1_h4(sys, sys, kSampler, 1.0, 3.0);
    CHECK(pass[1].verdict == ConditionReport::Verdict::pass);
    CHECK(pass[1].margin == doctest::Approx(0.5));
    const auto fail = check_h1_h4(sys, sys, kSampler, 1.0, 2.0);
    CHECK(fail[1].verdict == ConditionReport::Verdict::fail);
    CHECK(fail[1].margin == doctest::Approx(-0.5));
}

TEST_CASE("A1 passes when the delayed drift coupling is monotone") {
    const CoefficientSystem sys =
        scalar_system("0.9*z1 + 0.7*x1(-0.25)", "0", "0.4*z1", "0.3*x1(-0.25)", 0.3);
    const ConditionReport r = check_a1(sys, sys, kSampler, 1.0);
    CHECK(r.verdict == ConditionReport::Verdict::pass);
    // max over the constrained set is ~0, attained as xi -> eta
    CHECK(r.margin >= -1e-9);
    CHECK(r.margin <= 0.2);
}

TEST_CASE("A1 strict pass under a constant drift shift") {
    const CoefficientSystem sys_a = scalar_system("x1(-0.25)", "0", "0.4*z1", "0", 0.0);
    const CoefficientSystem sys_b = scalar_system("x1(-0.25) - 1", "0", "0.4*z1", "0", 0.0);
    // gap == -1 + nonpositive, so the strict variant holds with margin >= 1
    const ConditionReport r = check_a1(sys_b, sys_a, kSampler, 1.0);
    CHECK(r.verdict == ConditionReport::Verdict::pass);
    CHECK(r.margin >= 1.0 - 1e-9);
}

TEST_CASE("A1 fails with a replayable witness when the coupling is antitone") {
    const CoefficientSystem sys = scalar_system("-0.7*x1(-0.25)", "0", "0.4*z1", "0", 0.0);
    const ConditionReport r = check_a1(sys, sys, kSampler, 1.0);
    CHECK(r.verdict == ConditionReport::Verdict::fail);
    CHECK(r.margin < -1e-9);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->xi.at(0, 0) < r.witness->eta.at(0, 0)); // xi < eta at the delayed point
    CHECK(replay_condition_witness(r, sys, sys) == doctest::Approx(r.margin).epsilon(1e-12));
}

TEST_CASE("A2 accepts diffusions that read only t and z_i") {
    const CoefficientSystem sys = scalar_system("0", "0", "0.4*z1 + 0.1", "0.3*x1(-0.25)", 0.3);
    const ConditionReport r = check_a2(sys, sys, kSampler);
    CHECK(r.verdict == ConditionReport::Verdict::pass);
    CHECK(r.margin >= -1e-12);
}

TEST_CASE("A2 fails with a perturbation witness for delayed diffusion") {
    const CoefficientSystem sys = scalar_system("0", "0", "0.5*x1(-0.25)", "0.3*x1(-0.25)", 0.3);
    const ConditionReport r = check_a2(sys, sys, kSampler);
    CHECK(r.verdict == ConditionReport::Verdict::fail);
    REQUIRE(r.witness.has_value());
    CHECK(replay_condition_witness(r, sys, sys) == doctest::Approx(r.margin).epsilon(1e-12));
}

TEST_CASE("A2 fails when sigma differs between the systems") {
    const CoefficientSystem sys_a = scalar_system("0", "0", "0.4*z1", "0", 0.0);
    const CoefficientSystem sys_b = scalar_system("0", "0", "0.4*z1 + 0.001", "0", 0.0);
    const ConditionReport r = check_a2(sys_a, sys_b, kSampler);
    CHECK(r.verdict == ConditionReport::Verdict::fail);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->note == "sigma != sigma_bar");
}

TEST_CASE("C2 follows from (H1) + (A2) with a finite constant") {
    const CoefficientSystem sys = scalar_system("0", "0", "0.4*z1 + 0.1", "0.3*x1(-0.25)", 0.3);
    const ConditionReport r = check_c2(sys, sys, kSampler);
    CHECK(r.verdict == ConditionReport::Verdict::pass);
    CHECK(std::isfinite(r.margin));
    CHECK(r.margin <= 2 * 0.4 * 0.4 + 1e-9); // L-hat for linear sigma in z
}

TEST_CASE("solve_endpoint hits the boundary target") {
    const CoefficientSystem sys = scalar_system("0", "0", "0", "0.3*x1(-0.25)", 0.3);
    Segment xi = constant_segment(1, 4, 1.0 / 16, 0.4);
    REQUIRE(solve_endpoint(sys, xi, 0, -0.25));
    const std::vector<double> z = sys.z_of(xi);
    CHECK(std::abs(z[0] + 0.25) <= 1e-10);
}

TEST_CASE("multi-component boundary pairs keep the <=_N order (d = 2)") {
    // Coupled neutral term: N_i reads both delayed components.
    const GBounds bounds(1.0, 2.0, 1);
    std::vector<Expr> drift{Expr::parse("z1"), Expr::parse("z2 + 0.5*x1(-0.25)")};
    std::vector<std::vector<Expr>> h{{Expr::parse("0")}, {Expr::parse("0")}};
    std::vector<Expr> sigma{Expr::parse("0.2*z1"), Expr::parse("0.2*z2")};
    std::vector<Expr> neutral{Expr::parse("0.2*x1(-0.25) + 0.1*x2(-0.25)"),
                              Expr::parse("0.1*x1(-0.25) + 0.2*x2(-0.25)")};
    const CoefficientSystem sys(2, bounds, 0.25, 1.0 / 16, std::move(drift), std::move(h),
                                std::move(sigma), std::move(neutral), 0.5);
    const ConditionReport r = check_a1(sys, sys, kSampler, 1.0);
    // z1-coupled drift is quasimonotone here, so A1 passes and in
    // particular the sampler managed to build valid constrained pairs.
    CHECK(r.verdict == ConditionReport::Verdict::pass);
}
