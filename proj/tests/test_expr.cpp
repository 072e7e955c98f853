#include <cmath>

#include "doctest.h"
#include "homog/common.hpp"
#include "homog/expr.hpp"

using namespace homog;

TEST_CASE("constants and arithmetic") {
  CHECK(Expr::parse("1").eval({}) == 1.0);
  CHECK(Expr::parse("2 + 3*4").eval({}) == 14.0);
  CHECK(Expr::parse("1 - 2 - 3").eval({}) == -4.0);   // left associative
  CHECK(Expr::parse("2^3^2").eval({}) == 512.0);      // right associative
  CHECK(Expr::parse("-2^2").eval({}) == -4.0);        // unary binds looser than ^
  CHECK(Expr::parse("2^-1").eval({}) == 0.5);
  CHECK(Expr::parse("1.5e2").eval({}) == 150.0);
  CHECK(Expr::parse("pi").eval({}) == doctest::Approx(M_PI));
}

TEST_CASE("variables and functions") {
  EvalPoint p;
  p.y1 = 0.25;
  CHECK(Expr::parse("2 + sin(2*pi*y1)").eval(p) == doctest::Approx(3.0));
  p.t = 2;
  p.x1 = 0.5;
  p.x2 = 0.25;
  CHECK(Expr::parse("t*x1 + cos(0)*x2").eval(p) == doctest::Approx(1.25));
  CHECK(Expr::parse("exp(0)").eval({}) == 1.0);
}

TEST_CASE("y evaluated modulo 1") {
  Expr f = Expr::parse("sin(2*pi*y1) + cos(2*pi*y2)");
  for (double y1 : {0.1, 0.37, 0.9})
    for (double y2 : {0.0, 0.51}) {
      EvalPoint a{0, 0, 0, y1, y2};
      EvalPoint b{0, 0, 0, y1 + 1.0, y2 - 1.0};
      CHECK(f.eval(a) == doctest::Approx(f.eval(b)).epsilon(1e-14));
    }
  // holds for any expression of y, by the evaluation convention
  Expr g = Expr::parse("y1*y1 - y2");
  EvalPoint a{0, 0, 0, 0.3, 0.8};
  EvalPoint b{0, 0, 0, 1.3, -0.2};
  CHECK(g.eval(a) == doctest::Approx(g.eval(b)).epsilon(1e-14));
}

TEST_CASE("syntax errors carry a position") {
  CHECK_THROWS_WITH_AS(Expr::parse("x1/"), doctest::Contains("position 3"), Error);
  CHECK_THROWS_AS(Expr::parse("2 +"), Error);
  CHECK_THROWS_AS(Expr::parse("(1"), Error);
  CHECK_THROWS_AS(Expr::parse("1 2"), Error);
  CHECK_THROWS_WITH_AS(Expr::parse("foo + 1"), doctest::Contains("unknown identifier"), Error);
  CHECK_THROWS_AS(Expr::parse(""), Error);
  CHECK_THROWS_AS(Expr::parse("sin 0"), Error);
}

TEST_CASE("print/parse round trip is stable") {
  const char* samples[] = {
      "1",
      "2 + sin(2*pi*y1)",
      "-(x1 + x2)^2 / (1 + t)",
      "exp(-t) * cos(2*pi*y2) - y1/4",
      "0.25 + (1 - cos(2*pi*y1))",
      "2^-(x1*3)",
  };
  for (const char* s : samples) {
    Expr e1 = Expr::parse(s);
    std::string p1 = e1.to_string();
    Expr e2 = Expr::parse(p1);
    CHECK(p1 == e2.to_string());
    EvalPoint pt{0.7, 0.3, 0.9, 0.12, 0.77};
    CHECK(e1.eval(pt) == doctest::Approx(e2.eval(pt)).epsilon(1e-15));
  }
}

TEST_CASE("division is IEEE-guarded, not fatal") {
  double v = Expr::parse("1/0").eval({});
  CHECK(std::isinf(v));
  CHECK(std::isfinite(Expr::parse("1/(2 + sin(0))").eval({})));
}

TEST_CASE("variable usage mask") {
  Expr e = Expr::parse("t + y2");
  CHECK(e.uses(Var::t));
  CHECK(e.uses(Var::y2));
  CHECK(!e.uses(Var::x1));
  CHECK(!e.uses(Var::y1));
  CHECK(e.uses_any_y());
  CHECK(Expr::parse("3*pi").is_constant());
}
