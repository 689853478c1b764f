#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace loaddev {
class Rng;
}

namespace loaddev::doe {

/// One experimental factor: a name, a unit label, and its ordered levels.
struct FactorDef {
  std::string name;
  std::string unit;
  std::vector<double> levels;
};

/// Throws ValidationError unless the factor has >= 2 strictly increasing,
/// finite levels and a nonempty name.
void validate(const FactorDef& factor);

/// One point of the factor grid: a value per factor, in factor order.
using LevelTuple = std::vector<double>;

/// Full Cartesian product of the factor levels, row-major with the first
/// factor slowest.  Throws on an empty factor list or an invalid factor.
std::vector<LevelTuple> build_factor_grid(const std::vector<FactorDef>& factors);

struct Assignment {
  std::string case_id;
  std::string block;
  int level_index = 0;  // into the grid
};

/// Factor structure plus block layout; the input to randomization.
struct PlanSkeleton {
  std::vector<FactorDef> factors;
  std::vector<std::string> blocks;
  int cases_per_block = 0;
};

/// A fully randomized experiment plan.  For a given (skeleton, seed) the
/// plan regenerates identically, and its serialization is byte-stable.
struct DesignPlan {
  std::vector<FactorDef> factors;
  std::vector<std::string> blocks;
  int cases_per_block = 0;
  std::uint64_t seed = 0;
  std::string rng_id;
  std::vector<LevelTuple> grid;
  std::vector<Assignment> assignments;

  const LevelTuple& level_of(const Assignment& a) const { return grid[static_cast<std::size_t>(a.level_index)]; }
};

/// Core randomization over an abstract grid of `n_levels` points.
///
/// Phase 1: within each block, a uniform random bijection places one case on
/// each level (requires cases_per_block >= n_levels).  Phase 2: every
/// remaining case in the block draws its level independently and uniformly,
/// with replacement, so final per-level counts are intentionally unequal.
/// Blocks are processed in order from a single RNG stream.
///
/// Case ids are "L<block>-C<index>" with the index zero-padded to the width
/// of cases_per_block.
std::vector<Assignment> assign_cases(int n_levels, const std::vector<std::string>& blocks,
                                     int cases_per_block, Rng& rng);

/// Build the grid from the skeleton's factors and randomize, recording the
/// seed and RNG identity.  Errors: invalid factors, zero blocks, duplicate
/// block ids, or cases_per_block below the level count ("phase-1
/// infeasible").
DesignPlan randomize_assignment(const PlanSkeleton& skeleton, std::uint64_t seed);

/// Per-(level, block) case counts for reporting and validation.
struct CountTable {
  std::vector<LevelTuple> levels;
  std::vector<std::string> blocks;
  std::vector<std::vector<int>> counts;  // [level][block]

  int level_total(std::size_t level) const;
  int block_total(std::size_t block) const;
  int grand_total() const;
};

CountTable assignment_counts(const DesignPlan& plan);

/// Plan files: a CSV of assignments (case_id, block, one column per factor)
/// plus a JSON sidecar at <csv path>.json holding factors, blocks, seed, and
/// the RNG identity.
void save_plan(const DesignPlan& plan, const std::string& csv_path);
DesignPlan load_plan(const std::string& csv_path);

/// In-memory forms of the two plan files; save_plan/load_plan wrap these.
std::string plan_csv(const DesignPlan& plan);
std::string plan_sidecar_json(const DesignPlan& plan);
DesignPlan parse_plan(const std::string& csv_text, const std::string& sidecar_json,
                      const std::string& context);

/// The factor grids this library ships as defaults: bullet seating depth
/// 0.005..0.030 in steps of 0.005 inches, powder charge 25.3..26.2 in steps
/// of 0.1 grains.
FactorDef default_seating_depth_factor();
FactorDef default_powder_charge_factor();

}  // namespace loaddev::doe
