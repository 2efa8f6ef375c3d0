#pragma once

#include "robustcov/scatter.hpp"
#include "robustcov/spectral.hpp"
#include "robustcov/types.hpp"

namespace robustcov {

struct ThresholdRule {
  enum class Kind { Hard, Soft, Scad, AdaptiveLasso };

  Kind kind = Kind::Soft;
  double scad_a = 3.7;      // > 2
  double alasso_eta = 1.0;  // >= 1

  static ThresholdRule hard() { return {Kind::Hard}; }
  static ThresholdRule soft() { return {Kind::Soft}; }
  static ThresholdRule scad(double a = 3.7) { return {Kind::Scad, a}; }
  static ThresholdRule adaptive_lasso(double eta = 1.0) {
    ThresholdRule r{Kind::AdaptiveLasso};
    r.alasso_eta = eta;
    return r;
  }

  void validate() const;
};

/// Applies the thresholding rule s(x; tau). Every rule maps |x| <= tau to 0
/// and otherwise moves x by at most tau.
double threshold_value(double x, double tau, const ThresholdRule& rule);

/// w_n = sqrt(log d / n) + sqrt(log n / n).
double w_n(int n, int d);

/// Element-wise constant threshold level C * w_n.
double threshold_level(int n, int d, double c);

struct PoetEstimate {
  Matrix sigma_tau;    // reassembled estimate
  Matrix sigma_u_tau;  // thresholded (optionally repaired) residual
  SpectralSplit split;
  double threshold_level = 0.0;
  ThresholdRule rule;
  int m = 0;
  bool repaired = false;
};

struct PoetOptions {
  bool pd_repair = false;          // clip residual eigenvalues before reassembly
  double repair_floor_scale = 1e-4;  // floor = scale * trace / d
};

/// Principal orthogonal complement thresholding: split off the rank-m
/// leading part, threshold the residual off-diagonal entries (diagonal kept),
/// reassemble.
PoetEstimate poet(const Matrix& s, int m, double tau, const ThresholdRule& rule,
                  const PoetOptions& options = {});

PoetEstimate poet(const ScatterEstimate& s, int m, double tau,
                  const ThresholdRule& rule, const PoetOptions& options = {});

/// Eigenvalue clipping: eigenvalues below `floor` are raised to it.
Matrix clip_eigenvalues(const Matrix& m, double floor);

/// Clips eigenvalues at repair_floor_scale * trace(m) / d.
Matrix pd_repair(const Matrix& m, double repair_floor_scale = 1e-4);

}  // namespace robustcov
