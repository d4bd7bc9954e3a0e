#pragma once

// Scalar expressions over (t, x1..xn, u1..ur) with forward-mode derivatives.
//
// Grammar (whitespace-insensitive):
//
//   expr    = term { ("+" | "-") term } ;
//   term    = unary { ("*" | "/") unary } ;
//   unary   = "-" unary | power ;
//   power   = primary [ "^" unary ] ;            (* right-associative *)
//   primary = number | variable | func "(" expr ")" | "(" expr ")" ;
//   func    = "exp" | "log" | "sqrt" | "sin" | "cos" | "abs" ;
//   variable= "t" | "x" index | "u" index ;      (* index is 1-based *)
//   number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//
// `^` binds tighter than unary minus, so -x1^2 is -(x1^2) and 2^-1 is 2^(-1).

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ocreg {

/// Guard band around the kinks of sqrt (at 0) and abs (at 0). A derivative
/// that would need sqrt'(s) or abs'(s) with |s| below this value is refused.
inline constexpr double kKinkGuard = 1e-12;

/// Argument bundle for evaluating L and phi.
struct Point {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> u;
};

std::string format_point(const Point& p);

/// Value plus one directional derivative.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};

struct Gradient {
  double value = 0.0;
  double d_dt = 0.0;
  std::vector<double> d_dx;
  std::vector<double> d_du;
};

/// Input channel of a derivative sweep: 0 is t, 1..n are x1..xn and
/// n+1..n+r are u1..ur.
struct Channel {
  static constexpr int time() { return 0; }
  static constexpr int state(int i) { return 1 + i; }
  static int control(int n, int j) { return 1 + n + j; }
};

class Expr {
 public:
  enum class Op : std::uint8_t {
    Num, Time, State, Control,
    Add, Sub, Mul, Div, Pow, Neg,
    Exp, Log, Sqrt, Sin, Cos, Abs,
  };

  struct Node {
    Op op = Op::Num;
    double value = 0.0;  // literal value for Num
    int index = -1;      // 0-based variable index for State/Control
    int lhs = -1;        // child node ids; unary ops use lhs only
    int rhs = -1;
  };

  Expr() = default;

  /// Parses `text` against the declared dimensions. Throws ParseError.
  static Expr parse(std::string_view text, int n, int r);

  int n() const noexcept { return n_; }
  int r() const noexcept { return r_; }
  bool empty() const noexcept { return nodes_.empty(); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int root() const noexcept { return static_cast<int>(nodes_.size()) - 1; }

  /// IEEE evaluation. Throws DomainError on log/sqrt/pow of bad arguments and on
  /// division by zero.
  double eval(const Point& p) const;

  /// One forward-mode sweep seeded on `channel`.
  Dual eval_dual(const Point& p, int channel) const;

  /// Value and all first partials, one sweep per input channel.
  Gradient grad(const Point& p) const;

  /// Value and partials for the listed channels only; entries of `out` follow
  /// `channels`. Kinks in subexpressions that do not depend on a channel do not
  /// affect that channel.
  double partials(const Point& p, const std::vector<int>& channels, std::vector<double>& out) const;

  /// True when the tree references the given channel.
  bool depends_on(int channel) const;

  /// Fully parenthesised text that re-parses to the same tree.
  std::string to_string() const;
  std::string subtree_string(int node) const;

  /// Root is the bare control variable u_{j+1}.
  bool is_control_variable(int j) const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  void check_point(const Point& p) const;
  bool same_subtree(const Expr& other, int a, int b) const;

  std::vector<Node> nodes_;
  int n_ = 0;
  int r_ = 0;
};

}  // namespace ocreg
