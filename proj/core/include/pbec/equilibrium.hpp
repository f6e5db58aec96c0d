#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "pbec/numerics.hpp"
#include "pbec/physics.hpp"

namespace pbec {

struct EquilibriumParams {
  double T = 300.0;
  double mu = -1e-21;  // J, relative to eps_0
  double scale = 1.0;

  void validate() const;
};

/// g / (exp((eps_rel - mu) / k_B T) - 1).
double be_population(double eps_rel, double g, const EquilibriumParams& params);

/// Sum of be_population over the ladder.
double total_population(const ModeLadder& ladder, double T, double mu);

/// Chemical potential giving n_tot photons on the ladder at temperature T.
double solve_mu(double n_tot, const ModeLadder& ladder, double T,
                const numerics::SolverConfig& cfg = {1e-12, 1e-14, 400, 1e-3});

struct LevelSignal {
  int level = 0;
  double signal = 0.0;
};

struct BeFit {
  EquilibriumParams params;
  double residual = 0.0;  // sum of squared log residuals
  int iterations = 0;
  bool at_bound = false;
};

/// Fits (T, mu, scale) by minimising sum (log model - log signal)^2.
BeFit fit_be(std::span<const LevelSignal> observed, const ModeLadder& ladder);

/// (pi^2/6) (k_B T / eps)^2.
double critical_number_2dho(double T, double eps);

enum class Criterion { I, II, III, IV };

struct CriterionConfig {
  double alpha = 2.0;
  Criterion which = Criterion::IV;
};

enum class Phase { NotCondensed, BEC, MultimodeCondensate, LaserNoGround };

struct PhaseLabel {
  Phase phase = Phase::NotCondensed;
  std::vector<bool> condensed;  // one flag per level
};

/// Criteria (i) and (ii) only ever flag the ground level; (iii) and (iv)
/// are evaluated per level. Equality counts as not condensed.
PhaseLabel classify_condensation(std::span<const double> populations, double T, double eps,
                                 const CriterionConfig& cfg = {});

std::string_view to_string(Phase phase);
std::string_view to_string(Criterion criterion);

}  // namespace pbec
