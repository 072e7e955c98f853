#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "homog/expr.hpp"
#include "homog/geometry.hpp"

namespace homog {

// Shape-aware container of expression entries, row-major.
struct TensorExpr {
  int rows = 0, cols = 0;
  std::vector<Expr> entries;

  TensorExpr() = default;
  TensorExpr(int r, int c) : rows(r), cols(c), entries(static_cast<size_t>(r) * c) {}
  static TensorExpr identity(int n);
  static TensorExpr constant(const Eigen::MatrixXd& m);

  Expr& at(int r, int c) { return entries[static_cast<size_t>(r) * cols + c]; }
  const Expr& at(int r, int c) const { return entries[static_cast<size_t>(r) * cols + c]; }
  Eigen::MatrixXd eval(const EvalPoint& p) const;
  std::uint32_t var_mask() const;
};

// The coefficient families of the oscillating system, as evaluable
// functions of (t, x, y). J is stored epsilon-free; the fine-scale
// assembly applies the epsilon scaling.
struct CoefficientSet {
  static constexpr int d = 2;
  int N = 1;

  TensorExpr M;                  // N x N
  TensorExpr E;                  // d x d
  std::array<TensorExpr, 2> D;   // per direction i: N x N
  std::vector<Expr> H;           // N
  TensorExpr K;                  // N x N
  std::array<TensorExpr, 2> J;   // per direction i: N x N
  TensorExpr L;                  // N x N, (t,x) only
  TensorExpr G;                  // N x N, (t,x) only
  std::vector<Expr> Ustar;       // N, x only

  static CoefficientSet zero(int N);  // all-zero entries except nothing; M,E left zero too

  EvalPoint point(double t, const Vec2& x, const Vec2& y) const;

  Eigen::MatrixXd evalM(double t, const Vec2& x, const Vec2& y) const;
  Eigen::Matrix2d evalE(double t, const Vec2& x, const Vec2& y) const;
  Eigen::MatrixXd evalD(int i, double t, const Vec2& x, const Vec2& y) const;
  Eigen::VectorXd evalH(double t, const Vec2& x, const Vec2& y) const;
  Eigen::MatrixXd evalK(double t, const Vec2& x, const Vec2& y) const;
  Eigen::MatrixXd evalJ(int i, double t, const Vec2& x, const Vec2& y) const;
  Eigen::MatrixXd evalL(double t, const Vec2& x) const;
  Eigen::MatrixXd evalG(double t, const Vec2& x) const;
  Eigen::VectorXd evalUstar(const Vec2& x) const;

  std::uint32_t var_mask() const;  // union over all entries
  bool time_dependent() const;
  bool micro_x_dependent() const;  // E or D depends on x (cell problems vary with x)
  bool micro_t_dependent() const;  // E or D depends on t
};

struct SampleGrid {
  int nt = 9, nx = 17, ny = 17;
  double T = 1.0;  // t sampled over [0, T]
};

struct ValidationReport {
  struct A3Entry {
    int i, beta, alpha;
    double D_sup, bound;  // strict inequality D_sup^2 < bound required
    bool ok;
  };
  bool pass = false;
  bool finite = true;
  bool a2_ok = false;          // sampled positivity of diag(M), diag(E)
  double min_M_diag = 0, min_E_diag = 0;
  std::vector<double> m_alpha, e_i;  // sampled inf of the diagonals
  std::vector<A3Entry> a3;
  bool LG_y_independent = true;  // L, G, Ustar must not reference y
  bool y_periodic = true;        // micro coefficients continuous across the cell seam
  std::string detail;

  std::string summary() const;
};

ValidationReport validate_assumptions(const CoefficientSet& c, const SampleGrid& grid = {});

// Three-component mixture parameters for the concrete-corrosion preset.
struct CorrosionParams {
  Eigen::Vector3d phi{0.3, 0.2, 0.5};
  Eigen::Vector2d chi{1.0, 1.0};
  Eigen::Vector2d mu{1.0, 1.0};
  Eigen::Vector2d lambda_lame{1.0, 1.0};  // carried by the mixture model; the reduced
                                          // two-phase system does not consume it
  double gamma1 = -2.0, gamma2 = -1.0;    // gamma1 > gamma2, both negative
  Eigen::Vector3d kappa_rates{1.0, 1.0, 1.0};
  double F_value = 1.0;  // frozen reaction magnitude

  void validate() const;
};

struct CorrosionMatrices {
  Eigen::Matrix2d Mtilde, F, Gtilde, Ginv;
  double detG = 0;
};

CorrosionMatrices corrosion_matrices(const CorrosionParams& p);
CoefficientSet corrosion_preset(const CorrosionParams& p);

}  // namespace homog
