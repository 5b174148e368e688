#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gnsfde/expr.hpp"
#include "gnsfde/rng.hpp"

#include <cmath>

using namespace gnsfde;

namespace {

double eval_simple(const std::string& text, double t = 0.0) {
    CompiledExpr::Binding b;
    b.allow_segment_reads = false;
    b.allow_neutral_reads = false;
    EvalContext ctx;
    ctx.t = t;
    return CompiledExpr::compile(Expr::parse(text), b).eval(ctx);
}

// Random expression generator for the print/parse round-trip property.
std::string random_expr(const CounterRng& rng, std::uint64_t& counter, int depth) {
    const auto pick = [&](int n) {
        return static_cast<int>(rng.bits(counter++) % static_cast<std::uint64_t>(n));
    };
    if (depth <= 0) {
        switch (pick(4)) {
            case 0: {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.3f", rng.uniform(counter++, 0.0, 9.0));
                return std::string(buf);
            }
            case 1: return std::string("t");
            case 2: return "x" + std::to_string(1 + pick(2)) + "(-0." + std::to_string(pick(2)) +
                           "5)";
            default: return "z" + std::to_string(1 + pick(2));
        }
    }
    switch (pick(6)) {
        case 0: return random_expr(rng, counter, depth - 1) + " + " +
                       random_expr(rng, counter, depth - 1);
        case 1: return random_expr(rng, counter, depth - 1) + " - " +
                       random_expr(rng, counter, depth - 1);
        case 2: return random_expr(rng, counter, depth - 1) + " * " +
                       random_expr(rng, counter, depth - 1);
        case 3: return "-(" + random_expr(rng, counter, depth - 1) + ")";
        case 4: return "min(" + random_expr(rng, counter, depth - 1) + ", " +
                       random_expr(rng, counter, depth - 1) + ")";
        default: return "tanh(" + random_expr(rng, counter, depth - 1) + ")";
    }
}

} // namespace

TEST_CASE("grammar-forced shapes") {
    const Expr e1 = Expr::parse("0.3*x1(-0.25)");
    REQUIRE(e1.nodes().size() == 3);
    const Expr::Node& root1 = e1.nodes()[static_cast<std::size_t>(e1.root())];
    CHECK(root1.kind == Expr::Node::Kind::mul);
    CHECK(e1.nodes()[static_cast<std::size_t>(root1.lhs)].value == 0.3);
    const Expr::Node& read = e1.nodes()[static_cast<std::size_t>(root1.rhs)];
    CHECK(read.kind == Expr::Node::Kind::segment_read);
    CHECK(read.component == 1);
    CHECK(read.lag == -0.25);

    const Expr e2 = Expr::parse("z1 + max(x2(0), 0)");
    const Expr::Node& root2 = e2.nodes()[static_cast<std::size_t>(e2.root())];
    CHECK(root2.kind == Expr::Node::Kind::add);
    CHECK(e2.nodes()[static_cast<std::size_t>(root2.lhs)].kind ==
          Expr::Node::Kind::neutral_read);
    CHECK(e2.nodes()[static_cast<std::size_t>(root2.rhs)].kind == Expr::Node::Kind::max_fn);
}

TEST_CASE("positive lags are rejected at parse time") {
    CHECK_THROWS_WITH_AS(Expr::parse("x1(0.5)"), doctest::Contains("lag must lie in [-r0, 0]"),
                         ParseError);
    try {
        Expr::parse("1 + x1(0.5)");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position == 7); // position of the offending lag
    }
}

TEST_CASE("parse errors carry positions") {
    CHECK_THROWS_AS(Expr::parse(""), ParseError);
    CHECK_THROWS_AS(Expr::parse("   "), ParseError);
    CHECK_THROWS_AS(Expr::parse("1 +"), ParseError);
    CHECK_THROWS_AS(Expr::parse("foo(1)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("min(1)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("x(0)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("x0(0)"), ParseError);
    CHECK_THROWS_AS(Expr::parse("(1"), ParseError);
    CHECK_THROWS_AS(Expr::parse("1 2"), ParseError);
}

TEST_CASE("evaluation of plain arithmetic") {
    CHECK(eval_simple("1 + 2 * 3") == 7.0);
    CHECK(eval_simple("(1 + 2) * 3") == 9.0);
    CHECK(eval_simple("-2 * 3 + 1") == -5.0);
    CHECK(eval_simple("min(1, 2) + max(1, 2)") == 3.0);
    CHECK(eval_simple("abs(-3)") == 3.0);
    CHECK(eval_simple("tanh(0)") == 0.0);
    CHECK(eval_simple("t * t", 3.0) == 9.0);
    CHECK(eval_simple("2 - 3 - 4") == -5.0); // left associativity
}

TEST_CASE("compile validates lags and component indices against the grid") {
    CompiledExpr::Binding b;
    b.d = 2;
    b.delay_steps = 4;
    b.dt = 0.25; // r0 = 1
    CHECK_NOTHROW(CompiledExpr::compile(Expr::parse("x1(-1)"), b));
    CHECK_NOTHROW(CompiledExpr::compile(Expr::parse("x2(0)"), b));
    CHECK_THROWS_AS(CompiledExpr::compile(Expr::parse("x1(-1.25)"), b), std::invalid_argument);
    CHECK_THROWS_AS(CompiledExpr::compile(Expr::parse("x1(-0.3)"), b), std::invalid_argument);
    CHECK_THROWS_AS(CompiledExpr::compile(Expr::parse("x3(0)"), b), std::invalid_argument);
    CHECK_THROWS_AS(CompiledExpr::compile(Expr::parse("z3"), b), std::invalid_argument);

    CompiledExpr::Binding no_reads = b;
    no_reads.allow_segment_reads = false;
    no_reads.allow_neutral_reads = false;
    CHECK_THROWS_AS(CompiledExpr::compile(Expr::parse("x1(0)"), no_reads),
                    std::invalid_argument);
    CHECK_THROWS_AS(CompiledExpr::compile(Expr::parse("z1"), no_reads), std::invalid_argument);
}

TEST_CASE("segment and z reads resolve against the history window") {
    CompiledExpr::Binding b;
    b.d = 2;
    b.delay_steps = 2;
    b.dt = 0.5;
    // history rows (t = -1, -0.5, 0): component pairs
    const std::vector<double> history{1.0, 10.0, 2.0, 20.0, 3.0, 30.0};
    const std::vector<double> z{0.25, 0.75};
    EvalContext ctx;
    ctx.history = history.data();
    ctx.end_row = 2;
    ctx.d = 2;
    ctx.z = z.data();
    ctx.t = 5.0;

    const auto value = [&](const std::string& text) {
        return CompiledExpr::compile(Expr::parse(text), b).eval(ctx);
    };
    CHECK(value("x1(0)") == 3.0);
    CHECK(value("x2(0)") == 30.0);
    CHECK(value("x1(-1)") == 1.0);
    CHECK(value("x2(-0.5)") == 20.0);
    CHECK(value("z1") == 0.25);
    CHECK(value("z2 * 2") == 1.5);
    CHECK(value("t + x1(-0.5)") == 7.0);
}

TEST_CASE("print/parse round trip is the identity on parsed ASTs") {
    const CounterRng rng(17, 0, StreamTag::test_generic);
    std::uint64_t counter = 0;
    for (int rep = 0; rep < 300; ++rep) {
        const std::string text = random_expr(rng, counter, 3);
        const Expr once = Expr::parse(text);
        const Expr twice = Expr::parse(once.str());
        CHECK(once.equals(twice));
        CHECK(once.str() == twice.str());
    }
    // A few fixed shapes that exercise the precedence printer.
    for (const std::string text :
         {"1 - (2 - 3)", "-(1 + 2) * 3", "2 * (3 + 4)", "-(-(1))", "1 - 2 * 3 - 4",
          "min(1 + 2, max(3, 4)) * abs(-5)", "0.3*x1(-0.25) - z2"}) {
        const Expr once = Expr::parse(text);
        CHECK(once.equals(Expr::parse(once.str())));
    }
}

TEST_CASE("structural equality distinguishes different ASTs") {
    CHECK(Expr::parse("1 + 2").equals(Expr::parse("1+2")));
    CHECK_FALSE(Expr::parse("1 + 2").equals(Expr::parse("2 + 1")));
    CHECK_FALSE(Expr::parse("x1(0)").equals(Expr::parse("x1(-0.25)")));
    CHECK(Expr::add_constant(Expr::parse("z1"), 1.5).equals(Expr::parse("z1 + 1.5")));
}
