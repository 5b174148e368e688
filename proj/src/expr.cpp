#include "gnsfde/expr.hpp"

#include "gnsfde/util.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace gnsfde {

namespace {
using Kind = Expr::Node::Kind;
}

class ExprParser {
  public:
    explicit ExprParser(const std::string& text) : text_(text) {}

    Expr run() {
        if (text_.find_first_not_of(" \t\r\n") == std::string::npos)
            throw ParseError("empty expression", 0);
        Expr e;
        e.root_ = parse_sum(e);
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

  private:
    int parse_sum(Expr& e) {
        int lhs = parse_product(e);
        for (;;) {
            skip_ws();
            if (consume('+'))
                lhs = e.append({Kind::add, 0, 0, 0, lhs, parse_product(e)});
            else if (consume('-'))
                lhs = e.append({Kind::sub, 0, 0, 0, lhs, parse_product(e)});
            else
                return lhs;
        }
    }

    int parse_product(Expr& e) {
        int lhs = parse_unary(e);
        for (;;) {
            skip_ws();
            if (consume('*'))
                lhs = e.append({Kind::mul, 0, 0, 0, lhs, parse_unary(e)});
            else
                return lhs;
        }
    }

    int parse_unary(Expr& e) {
        skip_ws();
        if (consume('-')) return e.append({Kind::negate, 0, 0, 0, parse_unary(e), -1});
        return parse_primary(e);
    }

    int parse_primary(Expr& e) {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return e.append({Kind::literal, parse_number(), 0, 0, -1, -1});
        if (consume('(')) {
            const int inner = parse_sum(e);
            expect(')');
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_name(e);
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    int parse_name(Expr& e) {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::string name = text_.substr(start, pos_ - start);
        if (name == "t") return e.append({Kind::time_var, 0, 0, 0, -1, -1});
        if (name == "x" || name == "z") {
            const int component = parse_index(start);
            if (name == "z") return e.append({Kind::neutral_read, 0, component, 0, -1, -1});
            expect('(');
            const std::size_t lag_pos = pos_;
            const double lag = parse_signed_number();
            if (lag > 0.0) throw ParseError("lag must lie in [-r0, 0]", lag_pos);
            expect(')');
            return e.append({Kind::segment_read, 0, component, lag, -1, -1});
        }
        if (name == "min" || name == "max") {
            expect('(');
            const int a = parse_sum(e);
            expect(',');
            const int b = parse_sum(e);
            expect(')');
            return e.append({name == "min" ? Kind::min_fn : Kind::max_fn, 0, 0, 0, a, b});
        }
        if (name == "tanh" || name == "abs") {
            expect('(');
            const int a = parse_sum(e);
            expect(')');
            return e.append({name == "tanh" ? Kind::tanh_fn : Kind::abs_fn, 0, 0, 0, a, -1});
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }

    int parse_index(std::size_t name_pos) {
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            throw ParseError("expected a component index", pos_);
        long v = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            v = v * 10 + (text_[pos_] - '0');
            if (v > 1'000'000) throw ParseError("component index out of range", name_pos);
            ++pos_;
        }
        if (v < 1) throw ParseError("component index must be >= 1", name_pos);
        return static_cast<int>(v);
    }

    double parse_signed_number() {
        skip_ws();
        double sign = 1.0;
        if (consume('-'))
            sign = -1.0;
        else
            consume('+');
        skip_ws();
        return sign * parse_number();
    }

    double parse_number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) throw ParseError("expected a number", pos_);
        if (!std::isfinite(v)) throw ParseError("numeric literal out of range", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!consume(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

Expr Expr::parse(const std::string& text) { return ExprParser(text).run(); }

Expr Expr::literal(double v) {
    Expr e;
    e.root_ = e.append({Kind::literal, v, 0, 0, -1, -1});
    return e;
}

Expr Expr::add_constant(const Expr& e, double c) {
    Expr out = e;
    const int lit = out.append({Kind::literal, c, 0, 0, -1, -1});
    out.root_ = out.append({Kind::add, 0, 0, 0, e.root_, lit});
    return out;
}

namespace {

int precedence(Kind k) {
    switch (k) {
        case Kind::add:
        case Kind::sub: return 1;
        case Kind::mul: return 2;
        case Kind::negate: return 3;
        default: return 4;
    }
}

void print_node(const std::vector<Expr::Node>& nodes, int id, int parent_prec, std::string& out) {
    const Expr::Node& n = nodes[static_cast<std::size_t>(id)];
    const int prec = precedence(n.kind);
    const bool parens = prec < parent_prec;
    if (parens) out += '(';
    switch (n.kind) {
        case Kind::literal: out += format_double(n.value); break;
        case Kind::time_var: out += 't'; break;
        case Kind::segment_read:
            out += 'x';
            out += std::to_string(n.component);
            out += '(';
            out += format_double(n.lag);
            out += ')';
            break;
        case Kind::neutral_read:
            out += 'z';
            out += std::to_string(n.component);
            break;
        case Kind::negate:
            out += '-';
            print_node(nodes, n.lhs, 3, out);
            break;
        case Kind::add:
        case Kind::sub:
            print_node(nodes, n.lhs, 1, out);
            out += n.kind == Kind::add ? " + " : " - ";
            print_node(nodes, n.rhs, 2, out);
            break;
        case Kind::mul:
            print_node(nodes, n.lhs, 2, out);
            out += " * ";
            print_node(nodes, n.rhs, 3, out);
            break;
        case Kind::min_fn:
        case Kind::max_fn:
            out += n.kind == Kind::min_fn ? "min(" : "max(";
            print_node(nodes, n.lhs, 0, out);
            out += ", ";
            print_node(nodes, n.rhs, 0, out);
            out += ')';
            break;
        case Kind::tanh_fn:
        case Kind::abs_fn:
            out += n.kind == Kind::tanh_fn ? "tanh(" : "abs(";
            print_node(nodes, n.lhs, 0, out);
            out += ')';
            break;
    }
    if (parens) out += ')';
}

bool nodes_equal(const std::vector<Expr::Node>& a, int ia, const std::vector<Expr::Node>& b,
                 int ib) {
    if ((ia < 0) != (ib < 0)) return false;
    if (ia < 0) return true;
    const Expr::Node& na = a[static_cast<std::size_t>(ia)];
    const Expr::Node& nb = b[static_cast<std::size_t>(ib)];
    if (na.kind != nb.kind || na.value != nb.value || na.component != nb.component ||
        na.lag != nb.lag)
        return false;
    return nodes_equal(a, na.lhs, b, nb.lhs) && nodes_equal(a, na.rhs, b, nb.rhs);
}

} // namespace

std::string Expr::str() const {
    std::string out;
    print_node(nodes_, root_, 0, out);
    return out;
}

bool Expr::equals(const Expr& other) const {
    return nodes_equal(nodes_, root_, other.nodes_, other.root_);
}

bool Expr::uses_segment_reads() const {
    for (const Node& n : nodes_)
        if (n.kind == Kind::segment_read) return true;
    return false;
}

bool Expr::uses_neutral_reads() const {
    for (const Node& n : nodes_)
        if (n.kind == Kind::neutral_read) return true;
    return false;
}

CompiledExpr CompiledExpr::compile(const Expr& e, const Binding& b) {
    CompiledExpr out;
    const auto& nodes = e.nodes();

    // Postorder emission; returns the stack depth consumed by the subtree.
    const auto emit = [&](const auto& self, int id) -> int {
        const Expr::Node& n = nodes[static_cast<std::size_t>(id)];
        switch (n.kind) {
            case Kind::literal:
                out.ops_.push_back({OpCode::push_const, 0, 0, n.value});
                return 1;
            case Kind::time_var:
                if (!b.allow_time)
                    throw std::invalid_argument("expression may not reference t here");
                out.ops_.push_back({OpCode::push_time, 0, 0, 0.0});
                return 1;
            case Kind::segment_read: {
                if (!b.allow_segment_reads)
                    throw std::invalid_argument("expression may not read segment values here");
                if (n.component < 1 || n.component > b.d)
                    throw std::invalid_argument("component index x" + std::to_string(n.component) +
                                                " out of range 1.." + std::to_string(b.d));
                const double ratio = n.lag / b.dt;
                const long lag_steps = std::lround(ratio);
                if (std::abs(ratio - static_cast<double>(lag_steps)) >
                    1e-9 * std::max(1.0, std::abs(ratio)))
                    throw std::invalid_argument("lag " + format_double(n.lag) +
                                                " is not aligned to the grid step");
                if (lag_steps < -b.delay_steps || lag_steps > 0)
                    throw std::invalid_argument("lag " + format_double(n.lag) +
                                                " outside [-r0, 0]");
                out.ops_.push_back({OpCode::push_x, n.component - 1,
                                    static_cast<std::int32_t>(lag_steps), 0.0});
                return 1;
            }
            case Kind::neutral_read:
                if (!b.allow_neutral_reads)
                    throw std::invalid_argument("expression may not reference z here");
                if (n.component < 1 || n.component > b.d)
                    throw std::invalid_argument("component index z" + std::to_string(n.component) +
                                                " out of range 1.." + std::to_string(b.d));
                out.ops_.push_back({OpCode::push_z, n.component - 1, 0, 0.0});
                return 1;
            case Kind::negate: {
                const int d1 = self(self, n.lhs);
                out.ops_.push_back({OpCode::neg, 0, 0, 0.0});
                return d1;
            }
            case Kind::tanh_fn:
            case Kind::abs_fn: {
                const int d1 = self(self, n.lhs);
                out.ops_.push_back(
                    {n.kind == Kind::tanh_fn ? OpCode::tanh_fn : OpCode::abs_fn, 0, 0, 0.0});
                return d1;
            }
            default: {
                const int d1 = self(self, n.lhs);
                const int d2 = self(self, n.rhs);
                OpCode code;
                switch (n.kind) {
                    case Kind::add: code = OpCode::add; break;
                    case Kind::sub: code = OpCode::sub; break;
                    case Kind::mul: code = OpCode::mul; break;
                    case Kind::min_fn: code = OpCode::min_fn; break;
                    default: code = OpCode::max_fn; break;
                }
                out.ops_.push_back({code, 0, 0, 0.0});
                return std::max(d1, 1 + d2);
            }
        }
    };
    const int depth = emit(emit, e.root());
    if (depth > 60) throw std::invalid_argument("expression nesting too deep");
    return out;
}

double CompiledExpr::eval(const EvalContext& ctx) const {
    double stack[64];
    int top = -1;
    for (const Op& op : ops_) {
        switch (op.code) {
            case OpCode::push_const: stack[++top] = op.value; break;
            case OpCode::push_time: stack[++top] = ctx.t; break;
            case OpCode::push_x:
                stack[++top] =
                    ctx.history[static_cast<std::size_t>(ctx.end_row + op.b) * ctx.d + op.a];
                break;
            case OpCode::push_z: stack[++top] = ctx.z[op.a]; break;
            case OpCode::neg: stack[top] = -stack[top]; break;
            case OpCode::add: stack[top - 1] += stack[top]; --top; break;
            case OpCode::sub: stack[top - 1] -= stack[top]; --top; break;
            case OpCode::mul: stack[top - 1] *= stack[top]; --top; break;
            case OpCode::min_fn:
                stack[top - 1] = std::min(stack[top - 1], stack[top]);
                --top;
                break;
            case OpCode::max_fn:
                stack[top - 1] = std::max(stack[top - 1], stack[top]);
                --top;
                break;
            case OpCode::tanh_fn: stack[top] = std::tanh(stack[top]); break;
            case OpCode::abs_fn: stack[top] = std::abs(stack[top]); break;
        }
    }
    return stack[0];
}

} // namespace gnsfde
