#include "ocreg/expr.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "ocreg/errors.hpp"

namespace ocreg {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Parser {
 public:
  Parser(std::string_view text, int n, int r) : text_(text), n_(n), r_(r) {}

  std::vector<Expr::Node> run() {
    skip_ws();
    if (pos_ == text_.size()) throw ParseError("empty expression", pos_);
    parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
    return std::move(nodes_);
  }

 private:
  using Op = Expr::Op;

  int push(Op op, int lhs = -1, int rhs = -1) {
    Expr::Node node;
    node.op = op;
    node.lhs = lhs;
    node.rhs = rhs;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) throw ParseError(std::string("expected '") + c + "' but reached end of input", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        int rhs = parse_term();
        lhs = push(Op::Add, lhs, rhs);
      } else if (accept('-')) {
        int rhs = parse_term();
        lhs = push(Op::Sub, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        int rhs = parse_unary();
        lhs = push(Op::Mul, lhs, rhs);
      } else if (accept('/')) {
        int rhs = parse_unary();
        lhs = push(Op::Div, lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    if (accept('-')) {
      int operand = parse_unary();
      return push(Op::Neg, operand);
    }
    return parse_power();
  }

  int parse_power() {
    int base = parse_primary();
    if (accept('^')) {
      int exponent = parse_unary();
      return push(Op::Pow, base, exponent);
    }
    return base;
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  int parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t count = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++count;
      }
      return count;
    };
    std::size_t mantissa = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) throw ParseError("malformed number", start);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw ParseError("malformed exponent", start);
    }
    double value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ParseError("number out of range", start);
    int id = push(Op::Num);
    nodes_[id].value = value;
    return id;
  }

  int parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    static constexpr std::pair<std::string_view, Op> kFuncs[] = {
        {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt},
        {"sin", Op::Sin}, {"cos", Op::Cos}, {"abs", Op::Abs},
    };
    for (const auto& [fname, op] : kFuncs) {
      if (name == fname) {
        expect('(');
        int arg = parse_expr();
        expect(')');
        return push(op, arg);
      }
    }
    if (name == "t") return push(Op::Time);

    if ((name[0] == 'x' || name[0] == 'u') && name.size() > 1) {
      const std::string_view digits = name.substr(1);
      bool all_digits = true;
      for (char d : digits) all_digits = all_digits && std::isdigit(static_cast<unsigned char>(d));
      if (all_digits) {
        long k = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        const int limit = name[0] == 'x' ? n_ : r_;
        if (ec != std::errc() || k < 1 || k > limit) {
          throw ParseError("variable index out of range: '" + std::string(name) + "' (dimension " +
                               std::to_string(limit) + ")",
                           start);
        }
        int id = push(name[0] == 'x' ? Op::State : Op::Control);
        nodes_[id].index = static_cast<int>(k - 1);
        return id;
      }
    }
    throw ParseError("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  int n_;
  int r_;
  std::size_t pos_ = 0;
  std::vector<Expr::Node> nodes_;
};

bool is_integer(double y) { return std::isfinite(y) && std::floor(y) == y; }

}  // namespace

std::string format_point(const Point& p) {
  std::string s = "(t=" + fmt_double(p.t) + ", x=[";
  for (std::size_t i = 0; i < p.x.size(); ++i) s += (i ? ", " : "") + fmt_double(p.x[i]);
  s += "], u=[";
  for (std::size_t i = 0; i < p.u.size(); ++i) s += (i ? ", " : "") + fmt_double(p.u[i]);
  return s + "])";
}

Expr Expr::parse(std::string_view text, int n, int r) {
  if (n < 0 || r < 0) throw DimensionError("negative dimension");
  Expr e;
  e.n_ = n;
  e.r_ = r;
  e.nodes_ = Parser(text, n, r).run();
  return e;
}

void Expr::check_point(const Point& p) const {
  if (static_cast<int>(p.x.size()) != n_ || static_cast<int>(p.u.size()) != r_) {
    throw DimensionError("point has |x|=" + std::to_string(p.x.size()) + ", |u|=" + std::to_string(p.u.size()) +
                         " but expression declares n=" + std::to_string(n_) + ", r=" + std::to_string(r_));
  }
}

double Expr::eval(const Point& p) const {
  check_point(p);
  std::vector<double> val(nodes_.size());
  auto domain = [&](int id, const char* what) -> DomainError {
    return DomainError(what, subtree_string(id), format_point(p));
  };
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    const int id = static_cast<int>(i);
    const double a = nd.lhs >= 0 ? val[nd.lhs] : 0.0;
    const double b = nd.rhs >= 0 ? val[nd.rhs] : 0.0;
    double out = 0.0;
    switch (nd.op) {
      case Op::Num: out = nd.value; break;
      case Op::Time: out = p.t; break;
      case Op::State: out = p.x[nd.index]; break;
      case Op::Control: out = p.u[nd.index]; break;
      case Op::Add: out = a + b; break;
      case Op::Sub: out = a - b; break;
      case Op::Mul: out = a * b; break;
      case Op::Div:
        if (b == 0.0) throw domain(id, "division by zero");
        out = a / b;
        break;
      case Op::Pow:
        if (a < 0.0 && !is_integer(b)) throw domain(id, "negative base with non-integer exponent");
        if (a == 0.0 && b < 0.0) throw domain(id, "zero base with negative exponent");
        out = std::pow(a, b);
        break;
      case Op::Neg: out = -a; break;
      case Op::Exp: out = std::exp(a); break;
      case Op::Log:
        if (a <= 0.0) throw domain(id, "log of non-positive argument");
        out = std::log(a);
        break;
      case Op::Sqrt:
        if (a < 0.0) throw domain(id, "sqrt of negative argument");
        out = std::sqrt(a);
        break;
      case Op::Sin: out = std::sin(a); break;
      case Op::Cos: out = std::cos(a); break;
      case Op::Abs: out = std::abs(a); break;
    }
    val[i] = out;
  }
  return val.back();
}

Dual Expr::eval_dual(const Point& p, int channel) const {
  check_point(p);
  struct Slot {
    double v;
    double d;
    bool dep;  // structurally depends on the seeded channel
  };
  std::vector<Slot> s(nodes_.size());
  auto domain = [&](int id, const char* what) -> DomainError {
    return DomainError(what, subtree_string(id), format_point(p));
  };
  auto kink = [&](int id, const char* what) -> NonDifferentiableError {
    return NonDifferentiableError(what, subtree_string(id), format_point(p));
  };
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    const int id = static_cast<int>(i);
    const Slot a = nd.lhs >= 0 ? s[nd.lhs] : Slot{0, 0, false};
    const Slot b = nd.rhs >= 0 ? s[nd.rhs] : Slot{0, 0, false};
    Slot out{0.0, 0.0, a.dep || b.dep};
    switch (nd.op) {
      case Op::Num: out = {nd.value, 0.0, false}; break;
      case Op::Time: {
        const bool seeded = channel == Channel::time();
        out = {p.t, seeded ? 1.0 : 0.0, seeded};
        break;
      }
      case Op::State: {
        const bool seeded = channel == Channel::state(nd.index);
        out = {p.x[nd.index], seeded ? 1.0 : 0.0, seeded};
        break;
      }
      case Op::Control: {
        const bool seeded = channel == Channel::control(n_, nd.index);
        out = {p.u[nd.index], seeded ? 1.0 : 0.0, seeded};
        break;
      }
      case Op::Add: out.v = a.v + b.v; out.d = a.d + b.d; break;
      case Op::Sub: out.v = a.v - b.v; out.d = a.d - b.d; break;
      case Op::Mul: out.v = a.v * b.v; out.d = a.d * b.v + a.v * b.d; break;
      case Op::Div:
        if (b.v == 0.0) throw domain(id, "division by zero");
        out.v = a.v / b.v;
        out.d = (a.d * b.v - a.v * b.d) / (b.v * b.v);
        break;
      case Op::Pow:
        if (a.v < 0.0 && !is_integer(b.v)) throw domain(id, "negative base with non-integer exponent");
        if (a.v == 0.0 && b.v < 0.0) throw domain(id, "zero base with negative exponent");
        out.v = std::pow(a.v, b.v);
        if (!out.dep) {
          out.d = 0.0;
        } else if (!b.dep) {
          if (a.v == 0.0 && b.v < 1.0 && b.v != 0.0) throw kink(id, "power with exponent below 1 at zero base");
          out.d = b.v == 0.0 ? 0.0 : b.v * std::pow(a.v, b.v - 1.0) * a.d;
        } else {
          if (a.v <= 0.0) throw kink(id, "variable exponent needs a positive base");
          out.d = out.v * (b.d * std::log(a.v) + b.v * a.d / a.v);
        }
        break;
      case Op::Neg: out.v = -a.v; out.d = -a.d; break;
      case Op::Exp: out.v = std::exp(a.v); out.d = out.v * a.d; break;
      case Op::Log:
        if (a.v <= 0.0) throw domain(id, "log of non-positive argument");
        out.v = std::log(a.v);
        out.d = a.d / a.v;
        break;
      case Op::Sqrt:
        if (a.v < 0.0) throw domain(id, "sqrt of negative argument");
        out.v = std::sqrt(a.v);
        if (a.dep) {
          if (std::abs(a.v) < kKinkGuard) throw kink(id, "sqrt derivative inside kink guard band");
          out.d = a.d / (2.0 * out.v);
        }
        break;
      case Op::Sin: out.v = std::sin(a.v); out.d = std::cos(a.v) * a.d; break;
      case Op::Cos: out.v = std::cos(a.v); out.d = -std::sin(a.v) * a.d; break;
      case Op::Abs:
        out.v = std::abs(a.v);
        if (a.dep) {
          if (std::abs(a.v) < kKinkGuard) throw kink(id, "abs derivative inside kink guard band");
          out.d = a.v > 0.0 ? a.d : -a.d;
        }
        break;
    }
    s[i] = out;
  }
  return {s.back().v, s.back().d};
}

Gradient Expr::grad(const Point& p) const {
  Gradient g;
  g.d_dx.resize(n_);
  g.d_du.resize(r_);
  const Dual dt = eval_dual(p, Channel::time());
  g.value = dt.v;
  g.d_dt = dt.d;
  for (int i = 0; i < n_; ++i) g.d_dx[i] = eval_dual(p, Channel::state(i)).d;
  for (int j = 0; j < r_; ++j) g.d_du[j] = eval_dual(p, Channel::control(n_, j)).d;
  return g;
}

double Expr::partials(const Point& p, const std::vector<int>& channels, std::vector<double>& out) const {
  out.resize(channels.size());
  if (channels.empty()) return eval(p);
  double value = 0.0;
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const Dual d = eval_dual(p, channels[k]);
    value = d.v;
    out[k] = d.d;
  }
  return value;
}

bool Expr::depends_on(int channel) const {
  for (const Node& nd : nodes_) {
    if (nd.op == Op::Time && channel == Channel::time()) return true;
    if (nd.op == Op::State && channel == Channel::state(nd.index)) return true;
    if (nd.op == Op::Control && channel == Channel::control(n_, nd.index)) return true;
  }
  return false;
}

bool Expr::is_control_variable(int j) const {
  return !nodes_.empty() && nodes_.back().op == Op::Control && nodes_.back().index == j;
}

std::string Expr::subtree_string(int id) const {
  const Node& nd = nodes_[id];
  auto fn = [&](const char* name) { return std::string(name) + "(" + subtree_string(nd.lhs) + ")"; };
  auto bin = [&](const char* op) {
    return "(" + subtree_string(nd.lhs) + " " + op + " " + subtree_string(nd.rhs) + ")";
  };
  switch (nd.op) {
    case Op::Num: return fmt_double(nd.value);
    case Op::Time: return "t";
    case Op::State: return "x" + std::to_string(nd.index + 1);
    case Op::Control: return "u" + std::to_string(nd.index + 1);
    case Op::Add: return bin("+");
    case Op::Sub: return bin("-");
    case Op::Mul: return bin("*");
    case Op::Div: return bin("/");
    case Op::Pow: return bin("^");
    case Op::Neg: return "(-" + subtree_string(nd.lhs) + ")";
    case Op::Exp: return fn("exp");
    case Op::Log: return fn("log");
    case Op::Sqrt: return fn("sqrt");
    case Op::Sin: return fn("sin");
    case Op::Cos: return fn("cos");
    case Op::Abs: return fn("abs");
  }
  return {};
}

std::string Expr::to_string() const { return nodes_.empty() ? std::string() : subtree_string(root()); }

bool Expr::same_subtree(const Expr& other, int a, int b) const {
  const Node& x = nodes_[a];
  const Node& y = other.nodes_[b];
  if (x.op != y.op || x.index != y.index) return false;
  if (x.op == Op::Num) return std::bit_cast<std::uint64_t>(x.value) == std::bit_cast<std::uint64_t>(y.value);
  if ((x.lhs >= 0) != (y.lhs >= 0) || (x.rhs >= 0) != (y.rhs >= 0)) return false;
  if (x.lhs >= 0 && !same_subtree(other, x.lhs, y.lhs)) return false;
  if (x.rhs >= 0 && !same_subtree(other, x.rhs, y.rhs)) return false;
  return true;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.n_ != b.n_ || a.r_ != b.r_) return false;
  if (a.nodes_.empty() || b.nodes_.empty()) return a.nodes_.empty() == b.nodes_.empty();
  return a.same_subtree(b, a.root(), b.root());
}

}  // namespace ocreg
