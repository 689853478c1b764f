#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loaddev/dataio.hpp"
#include "loaddev/doe.hpp"

namespace loaddev::shotsim {

/// Sampling distribution for one covariate.  Normal by default; a Bernoulli
/// column (case_mouth_square) draws 0/1 with success probability `mean`.
struct CovariateDistribution {
  double mean = 0.0;
  double sd = 0.0;
  bool bernoulli = false;
};

/// Published measurement means and standard deviations for all 13
/// covariates, keyed by column name.
std::map<std::string, CovariateDistribution> default_covariate_distributions();

struct CellOffset {
  double sd = 0.0;  // seating depth level
  double pc = 0.0;  // powder charge level
  double dx = 0.0;
  double dy = 0.0;
};

struct CellMultiplier {
  double sd = 0.0;
  double pc = 0.0;
  double factor = 1.0;  // >= 0
};

/// Ground truth for a simulated experiment.  Impact dispersion for a shot is
/// sigma x its cell's multiplier x exp(sum of slope x (covariate - mean)),
/// applied per axis of an independent bivariate normal; the cell offset
/// shifts the group center.
struct EffectModel {
  double sigma = 1.0;  // >= 0, length units per axis
  std::uint64_t seed = 1;
  std::vector<CellOffset> offsets;
  std::vector<CellMultiplier> multipliers;
  std::map<std::string, double> covariate_slopes;  // column name -> slope on log dispersion
};

/// Effect model plus the covariate distributions to draw from.
struct SimConfig {
  EffectModel effects;
  std::map<std::string, CovariateDistribution> covariates = default_covariate_distributions();
};

/// Parse a JSON config document: optional keys sigma, seed, offsets,
/// multipliers, covariate_slopes, covariates (per-column mean/sd overrides).
SimConfig parse_sim_config(const std::string& json_text);

/// Simulate one experiment over the plan: covariates per cartridge, a
/// shuffled firing order, and one shot per case at its cell offset plus
/// circular bivariate normal noise.  Velocity is recorded for roughly half
/// the shots.  Deterministic: the same inputs give identical records.
dataio::Dataset simulate_experiment(
    const doe::DesignPlan& plan, const EffectModel& effects,
    const std::map<std::string, CovariateDistribution>& covariates =
        default_covariate_distributions());

struct PowerRow {
  std::string term;     // model term name
  std::string display;  // human label
  int detected = 0;     // seeds with p < alpha
  double rate = 0.0;
};

struct PowerResult {
  int n_seeds = 0;
  double alpha = 0.05;
  std::vector<PowerRow> rows;  // one per model term, model order
};

/// Empirical detection rate per model term: simulate n_seeds experiments
/// (seeds effects.seed, effects.seed + 1, ...), run the sequential ANOVA on
/// each, and count p-values below alpha.
PowerResult power_run(const doe::DesignPlan& plan, const EffectModel& effects, int n_seeds,
                      double alpha);

}  // namespace loaddev::shotsim
