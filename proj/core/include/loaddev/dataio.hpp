#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "loaddev/doe.hpp"
#include "loaddev/linmod.hpp"
#include "loaddev/surface.hpp"

namespace loaddev::dataio {

/// One fired shot, in target-local coordinates with the bulls-eye at the
/// origin.  valid is false exactly when invalid_reason is set.
struct ShotRecord {
  std::string case_id;
  std::string target_id;
  double x = 0.0;
  double y = 0.0;
  long seq = 0;  // 1-based firing order, unique across the dataset
  std::optional<double> velocity;  // pass-through only, never analyzed
  bool valid = true;
  std::string invalid_reason;  // one of shooter_error, tumbled, wrong_target, other
};

/// One loaded cartridge with its factor levels and measured covariates.
struct CartridgeRecord {
  std::string case_id;
  std::string lot;
  double seating_depth = 0.0;  // in
  double powder_charge = 0.0;  // gr
  double case_length = 0.0;            // in
  double neck_inner_diameter = 0.0;    // in
  double neck_outer_diameter = 0.0;    // in
  double neck_thickness = 0.0;         // in
  double head_space = 0.0;             // thousandths of an inch from standard, may be negative
  double primer_pocket_depth = 0.0;    // in
  double primer_pocket_diameter = 0.0; // in
  double case_weight = 0.0;            // gr
  double case_volume = 0.0;            // gr of media
  double primer_weight = 0.0;          // gr
  double bullet_overall_length = 0.0;  // in
  double bullet_weight = 0.0;          // gr
  double case_mouth_square = 0.0;      // 1 = square, 0 = not
};

/// Covariate registry entry: snake_case column name, display label, member.
struct CovariateField {
  const char* name;
  const char* display;
  double CartridgeRecord::*member;
};

/// The 13 covariates in file-schema order (cartridges.csv column order).
const std::vector<CovariateField>& covariate_schema_fields();

/// Same covariates in the order the descriptive-statistics report uses.
std::vector<std::string> covariate_stats_order();

/// Same covariates in the fixed order they enter the ANCOVA model.
std::vector<std::string> covariate_model_order();

/// Lookup by snake_case name; throws ValidationError for unknown names.
const CovariateField& covariate_field(const std::string& name);

/// A design plan joined with its cartridges and shots.
struct Dataset {
  doe::DesignPlan plan;
  std::vector<CartridgeRecord> cartridges;
  std::vector<ShotRecord> shots;
  std::unordered_map<std::string, std::size_t> cartridge_index;  // case_id -> cartridges index

  const CartridgeRecord& cartridge_of(const ShotRecord& shot) const;
};

/// Parse a cartridges file on its own (descriptive statistics and the lot
/// screen need no plan or shots).
std::vector<CartridgeRecord> load_cartridges(const std::string& cartridges_path);

/// Parse and join the three files.  Enforces referential integrity: every
/// shot's case exists, cases are unique, and each cartridge's lot and level
/// tuple match its plan assignment.  Error messages name the offending row.
Dataset load_dataset(const std::string& shots_path, const std::string& cartridges_path,
                     const std::string& plan_path);

void save_cartridges(std::span<const CartridgeRecord> cartridges, const std::string& path);
void save_shots(std::span<const ShotRecord> shots, const std::string& path);

/// Write the dataset back out (plan sidecar included).  load(save(d)) == d.
void save_dataset(const Dataset& dataset, const std::string& shots_path,
                  const std::string& cartridges_path, const std::string& plan_path);

struct InvalidationFlag {
  std::string case_id;
  std::string reason;  // shooter_error, tumbled, wrong_target, or other
};

std::vector<InvalidationFlag> load_flags(const std::string& path);

struct InvalidationReport {
  std::map<std::string, int> by_reason;  // shots invalidated per reason
  int flagged = 0;
  int valid_after = 0;
};

/// Mark every shot of each flagged case invalid with the flag's reason.
/// Coordinates and covariates are never touched.  A flag referencing an
/// unknown case, or a duplicate flag, is an error.
InvalidationReport apply_invalidation(Dataset& dataset, std::span<const InvalidationFlag> flags);

struct ColumnStats {
  std::string name;
  std::string display;
  int n = 0;
  double mean = 0.0;
  std::optional<double> sd;  // absent when n = 1
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;  // midpoint average for even n
};

/// Per-column mean, sample standard deviation, extrema, and median over the
/// given cartridge columns (covariates plus seating_depth / powder_charge).
std::vector<ColumnStats> descriptive_stats(std::span<const CartridgeRecord> cartridges,
                                           const std::vector<std::string>& columns);

struct LotScreenRow {
  std::string covariate;
  std::string display;
  int df = 0;
  double ss = 0.0;
  std::optional<double> ms;
  std::optional<double> f;
  std::optional<double> p;
  bool significant = false;
};

/// One-way ANOVA of each covariate against lot, flagging differences at
/// level alpha.  This is the screen that justifies blocking on lot.
/// Requires at least two lots with at least two cartridges each.
std::vector<LotScreenRow> lot_difference_screen(std::span<const CartridgeRecord> cartridges,
                                                double alpha = 0.05);

struct StabilityPoint {
  long seq = 0;
  double distance = 0.0;  // from the target-local bulls-eye at the origin
};

struct StabilityResult {
  std::vector<StabilityPoint> series;  // valid shots, ascending seq
  bool degenerate = false;  // a half has fewer than 2 shots or zero variance
  double var_first = 0.0;
  double var_second = 0.0;
  double f = 0.0;  // second-half variance over first-half variance
  int df1 = 0;
  int df2 = 0;
  double p = 1.0;  // two-sided
};

/// Distance-from-bulls-eye series in firing order, with a two-halves
/// variance-ratio check as a simple dispersion-constancy indicator.
StabilityResult stability_series(const Dataset& dataset);

/// Valid shots tagged with their factor levels, for surface estimation.
std::vector<surface::LeveledShot> leveled_shots(const Dataset& dataset);

/// Modeling table over the valid shots: response radial_deviation (distance
/// from the shot's (seating depth, powder charge) cell center), categorical
/// lot / seating_depth / powder_charge with plan-declared level order, and
/// the 13 covariates.  Cell centers are computed after invalidation.
linmod::DataTable analysis_table(const Dataset& dataset);

/// lot + seating depth + powder charge + their interaction, in that order.
linmod::ModelSpec default_anova_spec();

/// The same terms followed by the 13 covariates in model order.
linmod::ModelSpec default_ancova_spec();

}  // namespace loaddev::dataio
