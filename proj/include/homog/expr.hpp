#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace homog {

// Variables available to coefficient expressions.
enum class Var : int { t = 0, x1 = 1, x2 = 2, y1 = 3, y2 = 4 };
inline constexpr int kNumVars = 5;

struct EvalPoint {
  double t = 0, x1 = 0, x2 = 0, y1 = 0, y2 = 0;
};

// Arithmetic expression over {t, x1, x2, y1, y2} with +, -, *, /, ^,
// sin, cos, exp and the constant pi. The cell variables y1, y2 are
// evaluated modulo 1, so every expression is periodic in y by
// construction. Value type with a flat postorder AST; copies are cheap
// and evaluation is reentrant.
class Expr {
 public:
  Expr();  // the constant 0

  static Expr parse(const std::string& text);  // throws Error(config) with position
  static Expr constant(double v);

  double eval(const EvalPoint& p) const;
  std::string to_string() const;

  bool uses(Var v) const { return (var_mask_ >> static_cast<int>(v)) & 1u; }
  bool uses_any_y() const { return uses(Var::y1) || uses(Var::y2); }
  bool is_constant() const { return var_mask_ == 0; }
  std::uint32_t var_mask() const { return var_mask_; }

 private:
  enum class Op : std::uint8_t { num, var, add, sub, mul, div, pow, neg, sin, cos, exp };
  struct Node {
    Op op;
    double value = 0;  // num
    int var = 0;       // var
    int a = -1, b = -1;
  };

  std::vector<Node> nodes_;  // postorder: children precede parents, root last
  std::uint32_t var_mask_ = 0;

  friend class ExprParser;
  std::string print(int i) const;
};

}  // namespace homog
