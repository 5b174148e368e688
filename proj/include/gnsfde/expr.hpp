#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnsfde {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"),
          position(pos) {}
    std::size_t position;
};

/// Coefficient expression AST. Grammar (see docs/dsl.md):
///   literals, time variable t, segment reads x<i>(<lag>) with lag <= 0,
///   neutral-adjusted endpoint reads z<i>, operators + - * and unary -,
///   functions min(a,b), max(a,b), tanh(a), abs(a).
class Expr {
  public:
    struct Node {
        enum class Kind : std::uint8_t {
            literal,
            time_var,
            segment_read,
            neutral_read,
            negate,
            add,
            sub,
            mul,
            min_fn,
            max_fn,
            tanh_fn,
            abs_fn,
        };
        Kind kind = Kind::literal;
        double value = 0.0; // literal
        int component = 0;  // 1-based; segment_read / neutral_read
        double lag = 0.0;   // segment_read, always <= 0
        int lhs = -1;
        int rhs = -1;
    };

    static Expr parse(const std::string& text);
    static Expr literal(double v);
    /// New expression equal to e + c (used by the drift epsilon shift).
    static Expr add_constant(const Expr& e, double c);

    /// Canonical text form; parse(str()) is structurally equal to *this.
    std::string str() const;
    bool equals(const Expr& other) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    int root() const { return root_; }

    bool uses_segment_reads() const;
    bool uses_neutral_reads() const;

  private:
    int append(Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }
    friend class ExprParser;

    std::vector<Node> nodes_;
    int root_ = -1;
};

/// Evaluation inputs. `history` is a row-major array with `d` columns whose
/// row `end_row` holds the segment's right endpoint; a read at lag l*dt
/// resolves to row end_row + l. `z` holds the neutral-adjusted endpoint
/// values when the expression uses z reads.
struct EvalContext {
    double t = 0.0;
    const double* history = nullptr;
    long end_row = 0;
    int d = 1;
    const double* z = nullptr;
};

/// Expression compiled against a grid: lags resolved to step offsets and
/// component indices validated. Evaluation is a small stack machine.
class CompiledExpr {
  public:
    struct Binding {
        int d = 1;
        long delay_steps = 0;
        double dt = 1.0;
        bool allow_segment_reads = true;
        bool allow_neutral_reads = true;
        bool allow_time = true;
    };

    static CompiledExpr compile(const Expr& e, const Binding& b);

    double eval(const EvalContext& ctx) const;

  private:
    enum class OpCode : std::uint8_t {
        push_const,
        push_time,
        push_x,
        push_z,
        neg,
        add,
        sub,
        mul,
        min_fn,
        max_fn,
        tanh_fn,
        abs_fn,
    };
    struct Op {
        OpCode code;
        std::int32_t a = 0; // component - 1 for reads
        std::int32_t b = 0; // lag in steps (<= 0) for segment reads
        double value = 0.0; // push_const
    };

    std::vector<Op> ops_;
};

} // namespace gnsfde
