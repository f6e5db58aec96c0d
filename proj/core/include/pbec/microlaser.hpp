#pragma once

#include <span>

namespace pbec {

struct MicrolaserParams {
  double beta = 0.01;
  double kappa = 2e11;
  double P = 0.0;  // pump, excitations per second
  double scale = 1.0;

  double P_th() const { return kappa / beta; }
  void validate() const;
};

/// Non-negative root of n^2 + n (1 - beta P / kappa) / beta - P / kappa = 0.
double microlaser_n(const MicrolaserParams& p);

// Same root in terms of s = P / P_th, which is all the curve shape needs.
double microlaser_n_reduced(double beta, double s);

struct PumpSignal {
  double pump = 0.0;
  double signal = 0.0;
};

struct MicrolaserFit {
  double beta = 0.0;
  double P_th = 0.0;
  double scale = 0.0;
  double residual = 0.0;  // sum of squared log residuals
  int iterations = 0;
  bool at_bound = false;
  // Set when the data shows no curvature in log-log space, so beta is not
  // constrained by the fit.
  bool beta_unidentifiable = false;
};

/// Fits signal = scale * n(P; beta, P_th) in log-log space.
MicrolaserFit fit_microlaser(std::span<const PumpSignal> data);

}  // namespace pbec
