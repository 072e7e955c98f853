#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include "homog/cell.hpp"
#include "homog/coefficients.hpp"
#include "homog/geometry.hpp"

namespace homog {

// Y*-average with the unit-cell normalization: (1/|Y|) int_{Y*} f dy,
// |Y| = 1.
double average(const Mesh& cell, const ScalFun& f);

// Effective tensors at one macro point, each computed along two routes:
// the direct corrector form and the transposed (Gram-like) form, whose
// agreement is a discretization/solver cross-check.
struct EffectiveTensors {
  Eigen::Matrix2d Estar = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d Estar_gram = Eigen::Matrix2d::Zero();
  double Estar_discrepancy = 0;
  std::array<Eigen::MatrixXd, 2> Dstar;
  std::array<Eigen::MatrixXd, 2> Dstar_alt;
  double Dstar_discrepancy = 0;
  Eigen::MatrixXd Mbar, Kbar;
  Eigen::VectorXd Hbar;
  double porosity = 1.0;  // |Y*|
  bool consistent = true;

  void require_consistent(double threshold) const;  // throws when discrepancy exceeds it
};

Eigen::Matrix2d compute_Estar(const Mesh& cell, const CoefficientSet& coeffs,
                              const MacroPoint& at, const std::vector<Eigen::VectorXd>& W,
                              Eigen::Matrix2d* gram_form = nullptr);

std::array<Eigen::MatrixXd, 2> compute_Dstar(const Mesh& cell, const CoefficientSet& coeffs,
                                             const MacroPoint& at,
                                             const std::vector<Eigen::VectorXd>& Z,
                                             const std::vector<Eigen::VectorXd>& W,
                                             std::array<Eigen::MatrixXd, 2>* alt_form = nullptr);

EffectiveTensors compute_effective(const Mesh& cell, const CoefficientSet& coeffs,
                                   const MacroPoint& at, const std::vector<Eigen::VectorXd>& W,
                                   const std::vector<Eigen::VectorXd>& Z);

// Both sides of the first-order duality identity
//   int (grad_y W)^T . D dy = int E . grad_y Z dy,
// returned per (i, alpha, beta) as two d x (N*N) matrices.
void wd_identity(const Mesh& cell, const CoefficientSet& coeffs, const MacroPoint& at,
                 const std::vector<Eigen::VectorXd>& W, const std::vector<Eigen::VectorXd>& Z,
                 Eigen::MatrixXd& lhs, Eigen::MatrixXd& rhs);

// Cached (t, x) -> effective tensor evaluation for the macro solver.
// Axes the coefficients do not reference collapse to a single solve.
class EffectiveTensorField {
 public:
  EffectiveTensorField(const Mesh& cell, const CoefficientSet& coeffs, SolveOptions opts);

  struct Value {
    Eigen::Matrix2d Estar;
    std::array<Eigen::MatrixXd, 2> Dstar;
    Eigen::MatrixXd Mbar, Kbar;
    Eigen::VectorXd Hbar;
  };

  const Value& at(double t, const Vec2& x) const;
  int solves() const { return n_solves_; }

 private:
  const Mesh& cell_;
  const CoefficientSet& coeffs_;
  SolveOptions opts_;
  bool micro_t_ = false, micro_x_ = false;  // W/Z solves depend on these axes
  bool avg_t_ = false, avg_x_ = false;      // averages depend on these axes
  mutable int n_solves_ = 0;
  mutable std::vector<std::pair<std::array<long long, 3>, Value>> cache_;

  Value compute(double t, const Vec2& x) const;
};

void write_effective_csv(std::ostream& out, const std::vector<MacroPoint>& points,
                         const std::vector<EffectiveTensorField::Value>& values, int N);

}  // namespace homog
