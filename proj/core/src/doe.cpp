#include "loaddev/doe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "loaddev/csv.hpp"
#include "loaddev/errors.hpp"
#include "loaddev/rng.hpp"

namespace loaddev::doe {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string padded_index(int index, int width) {
  std::string digits = std::to_string(index);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  }
  return digits;
}

int digits_of(int n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

}  // namespace

void validate(const FactorDef& factor) {
  if (factor.name.empty()) {
    throw ValidationError("factor has no name");
  }
  if (factor.levels.size() < 2) {
    throw ValidationError("factor '" + factor.name + "' needs at least 2 levels");
  }
  for (std::size_t i = 0; i < factor.levels.size(); ++i) {
    if (!std::isfinite(factor.levels[i])) {
      throw ValidationError("factor '" + factor.name + "' has a non-finite level");
    }
    if (i > 0 && !(factor.levels[i] > factor.levels[i - 1])) {
      throw ValidationError("factor '" + factor.name + "' levels must be strictly increasing");
    }
  }
}

std::vector<LevelTuple> build_factor_grid(const std::vector<FactorDef>& factors) {
  if (factors.empty()) {
    throw ValidationError("factor list is empty");
  }
  std::size_t total = 1;
  for (const auto& f : factors) {
    validate(f);
    total *= f.levels.size();
  }

  std::vector<LevelTuple> grid;
  grid.reserve(total);
  LevelTuple tuple(factors.size());
  // Odometer over factor indices, first factor slowest.
  std::vector<std::size_t> idx(factors.size(), 0);
  for (std::size_t row = 0; row < total; ++row) {
    for (std::size_t fpos = 0; fpos < factors.size(); ++fpos) {
      tuple[fpos] = factors[fpos].levels[idx[fpos]];
    }
    grid.push_back(tuple);
    for (std::size_t fpos = factors.size(); fpos-- > 0;) {
      if (++idx[fpos] < factors[fpos].levels.size()) break;
      idx[fpos] = 0;
    }
  }
  return grid;
}

std::vector<Assignment> assign_cases(int n_levels, const std::vector<std::string>& blocks,
                                     int cases_per_block, Rng& rng) {
  if (n_levels < 1) {
    throw ValidationError("at least one experimental level is required");
  }
  if (blocks.empty()) {
    throw ValidationError("at least one block is required");
  }
  if (cases_per_block < n_levels) {
    throw ValidationError("phase-1 infeasible: " + std::to_string(cases_per_block) +
                          " cases per block < " + std::to_string(n_levels) + " levels");
  }

  const int width = digits_of(cases_per_block);
  std::vector<Assignment> assignments;
  assignments.reserve(blocks.size() * static_cast<std::size_t>(cases_per_block));

  for (const auto& block : blocks) {
    // Phase 1: uniform random bijection of the first n_levels cases onto the levels.
    std::vector<int> levels(static_cast<std::size_t>(n_levels));
    std::iota(levels.begin(), levels.end(), 0);
    rng.shuffle(levels);
    for (int c = 0; c < cases_per_block; ++c) {
      Assignment a;
      a.case_id = "L" + block + "-C" + padded_index(c + 1, width);
      a.block = block;
      // Phase 2: remaining cases draw uniformly, with replacement.
      a.level_index = c < n_levels ? levels[static_cast<std::size_t>(c)]
                                   : static_cast<int>(rng.below(static_cast<std::uint64_t>(n_levels)));
      assignments.push_back(std::move(a));
    }
  }
  return assignments;
}

DesignPlan randomize_assignment(const PlanSkeleton& skeleton, std::uint64_t seed) {
  std::set<std::string> unique_blocks(skeleton.blocks.begin(), skeleton.blocks.end());
  if (unique_blocks.size() != skeleton.blocks.size()) {
    throw ValidationError("duplicate block ids");
  }

  DesignPlan plan;
  plan.factors = skeleton.factors;
  plan.blocks = skeleton.blocks;
  plan.cases_per_block = skeleton.cases_per_block;
  plan.seed = seed;
  plan.rng_id = Rng::kAlgorithm;
  plan.grid = build_factor_grid(skeleton.factors);

  Rng rng(seed);
  plan.assignments = assign_cases(static_cast<int>(plan.grid.size()), skeleton.blocks,
                                  skeleton.cases_per_block, rng);
  return plan;
}

int CountTable::level_total(std::size_t level) const {
  return std::accumulate(counts[level].begin(), counts[level].end(), 0);
}

int CountTable::block_total(std::size_t block) const {
  int total = 0;
  for (const auto& row : counts) total += row[block];
  return total;
}

int CountTable::grand_total() const {
  int total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) total += level_total(i);
  return total;
}

CountTable assignment_counts(const DesignPlan& plan) {
  CountTable table;
  table.levels = plan.grid;
  table.blocks = plan.blocks;
  table.counts.assign(plan.grid.size(), std::vector<int>(plan.blocks.size(), 0));

  for (const auto& a : plan.assignments) {
    const auto bit = std::find(plan.blocks.begin(), plan.blocks.end(), a.block);
    if (bit == plan.blocks.end() || a.level_index < 0 ||
        a.level_index >= static_cast<int>(plan.grid.size())) {
      throw ValidationError("assignment for case '" + a.case_id + "' is not on the plan's grid");
    }
    const auto b = static_cast<std::size_t>(bit - plan.blocks.begin());
    ++table.counts[static_cast<std::size_t>(a.level_index)][b];
  }
  return table;
}

std::string plan_csv(const DesignPlan& plan) {
  csv::Table table;
  table.header = {"case_id", "block"};
  for (const auto& f : plan.factors) table.header.push_back(f.name);

  for (const auto& a : plan.assignments) {
    std::vector<std::string> row = {a.case_id, a.block};
    for (double v : plan.level_of(a)) row.push_back(csv::format_double(v));
    table.rows.push_back(std::move(row));
  }
  return csv::to_string(table);
}

std::string plan_sidecar_json(const DesignPlan& plan) {
  ordered_json j;
  j["format_version"] = 1;
  j["rng"] = plan.rng_id;
  j["seed"] = plan.seed;
  j["blocks"] = plan.blocks;
  j["cases_per_block"] = plan.cases_per_block;
  j["factors"] = ordered_json::array();
  for (const auto& f : plan.factors) {
    ordered_json jf;
    jf["name"] = f.name;
    jf["unit"] = f.unit;
    jf["levels"] = f.levels;
    j["factors"].push_back(std::move(jf));
  }
  return j.dump(2) + "\n";
}

DesignPlan parse_plan(const std::string& csv_text, const std::string& sidecar_json,
                      const std::string& context) {
  DesignPlan plan;

  ordered_json j;
  try {
    j = ordered_json::parse(sidecar_json);
  } catch (const std::exception& e) {
    throw ValidationError(context + " sidecar: invalid JSON: " + e.what());
  }
  try {
    plan.rng_id = j.at("rng").get<std::string>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.blocks = j.at("blocks").get<std::vector<std::string>>();
    plan.cases_per_block = j.at("cases_per_block").get<int>();
    for (const auto& jf : j.at("factors")) {
      FactorDef f;
      f.name = jf.at("name").get<std::string>();
      f.unit = jf.at("unit").get<std::string>();
      f.levels = jf.at("levels").get<std::vector<double>>();
      plan.factors.push_back(std::move(f));
    }
  } catch (const ordered_json::exception& e) {
    throw ValidationError(context + " sidecar: " + e.what());
  }
  plan.grid = build_factor_grid(plan.factors);

  const csv::Table table = csv::parse(csv_text, context);
  const int id_col = table.require_column("case_id", context);
  const int block_col = table.require_column("block", context);
  std::vector<int> factor_cols;
  for (const auto& f : plan.factors) factor_cols.push_back(table.require_column(f.name, context));

  std::set<std::string> seen_ids;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = context + " row " + std::to_string(r + 1);
    Assignment a;
    a.case_id = row[static_cast<std::size_t>(id_col)];
    a.block = row[static_cast<std::size_t>(block_col)];
    if (!seen_ids.insert(a.case_id).second) {
      throw ValidationError(where + ": duplicate case_id '" + a.case_id + "'");
    }
    if (std::find(plan.blocks.begin(), plan.blocks.end(), a.block) == plan.blocks.end()) {
      throw ValidationError(where + ": block '" + a.block + "' not declared in sidecar");
    }

    LevelTuple tuple;
    for (std::size_t fpos = 0; fpos < factor_cols.size(); ++fpos) {
      tuple.push_back(csv::parse_double(row[static_cast<std::size_t>(factor_cols[fpos])],
                                        where + " column " + plan.factors[fpos].name));
    }
    const auto git = std::find(plan.grid.begin(), plan.grid.end(), tuple);
    if (git == plan.grid.end()) {
      throw ValidationError(where + ": level combination is not on the factor grid");
    }
    a.level_index = static_cast<int>(git - plan.grid.begin());
    plan.assignments.push_back(std::move(a));
  }
  return plan;
}

void save_plan(const DesignPlan& plan, const std::string& csv_path) {
  csv::write_text_file(csv_path, plan_csv(plan));
  csv::write_text_file(csv_path + ".json", plan_sidecar_json(plan));
}

DesignPlan load_plan(const std::string& csv_path) {
  return parse_plan(csv::read_text_file(csv_path), csv::read_text_file(csv_path + ".json"),
                    csv_path);
}

FactorDef default_seating_depth_factor() {
  return {"seating_depth", "in", {0.005, 0.010, 0.015, 0.020, 0.025, 0.030}};
}

FactorDef default_powder_charge_factor() {
  return {"powder_charge", "gr", {25.3, 25.4, 25.5, 25.6, 25.7, 25.8, 25.9, 26.0, 26.1, 26.2}};
}

}  // namespace loaddev::doe
