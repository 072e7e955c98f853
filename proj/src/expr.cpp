#include "homog/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "homog/common.hpp"

namespace homog {

namespace {
double wrap01(double v) { return v - std::floor(v); }
}  // namespace

// Recursive-descent parser for
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' unary)?
//   atom   := number | ident | func '(' expr ')' | '(' expr ')'
// Numbers accept decimal and scientific notation. Identifiers are the
// variables t, x1, x2, y1, y2, the constant pi, and the functions
// sin, cos, exp.
class ExprParser {
 public:
  explicit ExprParser(const std::string& s) : s_(s) {}

  Expr run() {
    Expr e;
    e.nodes_.clear();
    out_ = &e;
    int root = parse_expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    (void)root;  // root is last node by construction
    if (e.nodes_.empty()) fail("empty expression");
    return e;
  }

 private:
  const std::string& s_;
  size_t pos_ = 0;
  Expr* out_ = nullptr;

  [[noreturn]] void fail(const std::string& what) {
    config_error("expression error at position " + std::to_string(pos_) + ": " + what +
                 " in \"" + s_ + "\"");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  bool accept(char c) {
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Expr::Node n) {
    out_->nodes_.push_back(n);
    return static_cast<int>(out_->nodes_.size()) - 1;
  }
  int push_num(double v) { return push({Expr::Op::num, v, 0, -1, -1}); }
  int push_var(Var v) {
    out_->var_mask_ |= 1u << static_cast<int>(v);
    return push({Expr::Op::var, 0, static_cast<int>(v), -1, -1});
  }
  int push_bin(Expr::Op op, int a, int b) { return push({op, 0, 0, a, b}); }
  int push_un(Expr::Op op, int a) { return push({op, 0, 0, a, -1}); }

  int parse_expr() {
    int a = parse_term();
    while (true) {
      if (accept('+'))
        a = push_bin(Expr::Op::add, a, parse_term());
      else if (accept('-'))
        a = push_bin(Expr::Op::sub, a, parse_term());
      else
        return a;
    }
  }

  int parse_term() {
    int a = parse_unary();
    while (true) {
      if (accept('*'))
        a = push_bin(Expr::Op::mul, a, parse_unary());
      else if (accept('/'))
        a = push_bin(Expr::Op::div, a, parse_unary());
      else
        return a;
    }
  }

  int parse_unary() {
    if (accept('-')) return push_un(Expr::Op::neg, parse_unary());
    return parse_power();
  }

  int parse_power() {
    int a = parse_atom();
    if (accept('^')) return push_bin(Expr::Op::pow, a, parse_unary());
    return a;
  }

  int parse_atom() {
    char c = peek();
    if (c == '(') {
      ++pos_;
      int a = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return a;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    if (c == '\0') fail("unexpected end of input");
    fail(std::string("unexpected character '") + c + "'");
  }

  int parse_number() {
    skip_ws();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<size_t>(end - begin);
    return push_num(v);
  }

  int parse_ident() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
      ++pos_;
    std::string id = s_.substr(start, pos_ - start);
    if (id == "t") return push_var(Var::t);
    if (id == "x1") return push_var(Var::x1);
    if (id == "x2") return push_var(Var::x2);
    if (id == "y1") return push_var(Var::y1);
    if (id == "y2") return push_var(Var::y2);
    if (id == "pi") return push_num(M_PI);
    if (id == "sin" || id == "cos" || id == "exp") {
      if (!accept('(')) fail("expected '(' after " + id);
      int a = parse_expr();
      if (!accept(')')) fail("expected ')'");
      if (id == "sin") return push_un(Expr::Op::sin, a);
      if (id == "cos") return push_un(Expr::Op::cos, a);
      return push_un(Expr::Op::exp, a);
    }
    pos_ = start;
    fail("unknown identifier \"" + id + "\"");
  }
};

Expr::Expr() { nodes_.assign(1, Node{Op::num, 0.0, 0, -1, -1}); }

Expr Expr::parse(const std::string& text) { return ExprParser(text).run(); }

Expr Expr::constant(double v) {
  Expr e;
  e.nodes_[0].value = v;
  return e;
}

double Expr::eval(const EvalPoint& p) const {
  double vars[kNumVars] = {p.t, p.x1, p.x2, wrap01(p.y1), wrap01(p.y2)};

  double stackbuf[64];
  std::vector<double> heapbuf;
  double* v = stackbuf;
  if (nodes_.size() > 64) {
    heapbuf.resize(nodes_.size());
    v = heapbuf.data();
  }

  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::num: v[i] = n.value; break;
      case Op::var: v[i] = vars[n.var]; break;
      case Op::add: v[i] = v[n.a] + v[n.b]; break;
      case Op::sub: v[i] = v[n.a] - v[n.b]; break;
      case Op::mul: v[i] = v[n.a] * v[n.b]; break;
      case Op::div: v[i] = v[n.a] / v[n.b]; break;  // IEEE inf/nan; validators flag non-finite
      case Op::pow: v[i] = std::pow(v[n.a], v[n.b]); break;
      case Op::neg: v[i] = -v[n.a]; break;
      case Op::sin: v[i] = std::sin(v[n.a]); break;
      case Op::cos: v[i] = std::cos(v[n.a]); break;
      case Op::exp: v[i] = std::exp(v[n.a]); break;
    }
  }
  return v[nodes_.size() - 1];
}

std::string Expr::print(int i) const {
  const Node& n = nodes_[i];
  static const char* varname[kNumVars] = {"t", "x1", "x2", "y1", "y2"};
  switch (n.op) {
    case Op::num: return fmt_g(n.value, 17);
    case Op::var: return varname[n.var];
    case Op::add: return "(" + print(n.a) + " + " + print(n.b) + ")";
    case Op::sub: return "(" + print(n.a) + " - " + print(n.b) + ")";
    case Op::mul: return "(" + print(n.a) + " * " + print(n.b) + ")";
    case Op::div: return "(" + print(n.a) + " / " + print(n.b) + ")";
    case Op::pow: return "(" + print(n.a) + " ^ " + print(n.b) + ")";
    case Op::neg: return "(-" + print(n.a) + ")";
    case Op::sin: return "sin(" + print(n.a) + ")";
    case Op::cos: return "cos(" + print(n.a) + ")";
    case Op::exp: return "exp(" + print(n.a) + ")";
  }
  return "";
}

std::string Expr::to_string() const { return print(static_cast<int>(nodes_.size()) - 1); }

}  // namespace homog
