#include "loaddev/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <unordered_set>

#include "loaddev/csv.hpp"
#include "loaddev/errors.hpp"
#include "loaddev/fdist.hpp"

namespace loaddev::dataio {

namespace {

const std::set<std::string>& allowed_reasons() {
  static const std::set<std::string> reasons = {"shooter_error", "tumbled", "wrong_target",
                                                "other"};
  return reasons;
}

void check_reason(const std::string& reason, const std::string& context) {
  if (!allowed_reasons().contains(reason))
    throw ValidationError(context + ": unknown invalidation reason '" + reason +
                          "' (expected shooter_error, tumbled, wrong_target, or other)");
}

void check_finite(double value, const std::string& column, const std::string& case_id) {
  if (!std::isfinite(value))
    throw ValidationError("cartridge '" + case_id + "': " + column + " is not finite");
}

std::string level_label(double value) { return csv::format_double(value); }

}  // namespace

const std::vector<CovariateField>& covariate_schema_fields() {
  static const std::vector<CovariateField> fields = {
      {"case_length", "Case Length", &CartridgeRecord::case_length},
      {"neck_inner_diameter", "Neck Inner Diameter", &CartridgeRecord::neck_inner_diameter},
      {"neck_outer_diameter", "Neck Outer Diameter", &CartridgeRecord::neck_outer_diameter},
      {"neck_thickness", "Neck Thickness", &CartridgeRecord::neck_thickness},
      {"head_space", "Head Space", &CartridgeRecord::head_space},
      {"primer_pocket_depth", "Primer Pocket Depth", &CartridgeRecord::primer_pocket_depth},
      {"primer_pocket_diameter", "Primer Pocket Diameter", &CartridgeRecord::primer_pocket_diameter},
      {"case_weight", "Case Weight", &CartridgeRecord::case_weight},
      {"case_volume", "Case Volume", &CartridgeRecord::case_volume},
      {"primer_weight", "Primer Weight", &CartridgeRecord::primer_weight},
      {"bullet_overall_length", "Bullet Overall Length", &CartridgeRecord::bullet_overall_length},
      {"bullet_weight", "Bullet Weight", &CartridgeRecord::bullet_weight},
      {"case_mouth_square", "Case Mouth Square", &CartridgeRecord::case_mouth_square},
  };
  return fields;
}

std::vector<std::string> covariate_stats_order() {
  return {"case_length",        "neck_inner_diameter",   "neck_outer_diameter",
          "neck_thickness",     "head_space",            "primer_pocket_depth",
          "primer_pocket_diameter", "case_weight",       "case_mouth_square",
          "case_volume",        "primer_weight",         "bullet_overall_length",
          "bullet_weight"};
}

std::vector<std::string> covariate_model_order() {
  return {"case_length",        "case_mouth_square",     "case_volume",
          "case_weight",        "head_space",            "neck_inner_diameter",
          "neck_outer_diameter", "neck_thickness",       "primer_pocket_depth",
          "primer_pocket_diameter", "primer_weight",     "bullet_weight",
          "bullet_overall_length"};
}

const CovariateField& covariate_field(const std::string& name) {
  for (const CovariateField& f : covariate_schema_fields()) {
    if (name == f.name) return f;
  }
  throw ValidationError("unknown covariate column '" + name + "'");
}

const CartridgeRecord& Dataset::cartridge_of(const ShotRecord& shot) const {
  auto it = cartridge_index.find(shot.case_id);
  if (it == cartridge_index.end())
    throw ValidationError("shot seq " + std::to_string(shot.seq) + " references unknown case '" +
                          shot.case_id + "'");
  return cartridges[it->second];
}

namespace {

std::vector<CartridgeRecord> parse_cartridges(const csv::Table& table) {
  std::size_t c_case = table.require_column("case_id", "cartridges");
  std::size_t c_lot = table.require_column("lot", "cartridges");
  std::size_t c_sd = table.require_column("seating_depth", "cartridges");
  std::size_t c_pc = table.require_column("powder_charge", "cartridges");
  std::vector<std::size_t> c_cov;
  for (const CovariateField& f : covariate_schema_fields())
    c_cov.push_back(table.require_column(f.name, "cartridges"));

  std::vector<CartridgeRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    CartridgeRecord rec;
    rec.case_id = row[c_case];
    rec.lot = row[c_lot];
    if (rec.case_id.empty()) throw ValidationError("cartridges: empty case_id");
    if (rec.lot.empty()) throw ValidationError("cartridge '" + rec.case_id + "': empty lot");
    rec.seating_depth = csv::parse_double(row[c_sd], "seating_depth");
    rec.powder_charge = csv::parse_double(row[c_pc], "powder_charge");
    check_finite(rec.seating_depth, "seating_depth", rec.case_id);
    check_finite(rec.powder_charge, "powder_charge", rec.case_id);
    const auto& fields = covariate_schema_fields();
    for (std::size_t i = 0; i < fields.size(); ++i) {
      double v = csv::parse_double(row[c_cov[i]], fields[i].name);
      check_finite(v, fields[i].name, rec.case_id);
      rec.*(fields[i].member) = v;
    }
    for (const char* w : {"case_weight", "primer_weight", "bullet_weight"}) {
      if (rec.*(covariate_field(w).member) <= 0.0)
        throw ValidationError("cartridge '" + rec.case_id + "': " + w + " must be positive");
    }
    if (rec.case_mouth_square != 0.0 && rec.case_mouth_square != 1.0)
      throw ValidationError("cartridge '" + rec.case_id + "': case_mouth_square must be 0 or 1");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ShotRecord> parse_shots(const csv::Table& table) {
  std::size_t c_case = table.require_column("case_id", "shots");
  std::size_t c_target = table.require_column("target_id", "shots");
  std::size_t c_x = table.require_column("x", "shots");
  std::size_t c_y = table.require_column("y", "shots");
  std::size_t c_seq = table.require_column("seq", "shots");
  int c_vel = table.column("velocity");
  int c_valid = table.column("valid");
  int c_reason = table.column("invalid_reason");

  std::vector<ShotRecord> out;
  out.reserve(table.rows.size());
  std::unordered_set<long> seen_seq;
  for (const auto& row : table.rows) {
    ShotRecord rec;
    rec.case_id = row[c_case];
    rec.target_id = row[c_target];
    if (rec.case_id.empty()) throw ValidationError("shots: empty case_id");
    if (rec.target_id.empty())
      throw ValidationError("shot for case '" + rec.case_id + "': empty target_id");
    rec.x = csv::parse_double(row[c_x], "x");
    rec.y = csv::parse_double(row[c_y], "y");
    if (!std::isfinite(rec.x) || !std::isfinite(rec.y))
      throw ValidationError("shot for case '" + rec.case_id + "': non-finite coordinate");
    rec.seq = csv::parse_long(row[c_seq], "seq");
    if (rec.seq < 1)
      throw ValidationError("shot for case '" + rec.case_id + "': seq must be 1-based");
    if (!seen_seq.insert(rec.seq).second)
      throw ValidationError("shots: duplicate seq " + std::to_string(rec.seq));
    if (c_vel >= 0 && !row[c_vel].empty())
      rec.velocity = csv::parse_double(row[c_vel], "velocity");
    if (c_reason >= 0) rec.invalid_reason = row[c_reason];
    if (!rec.invalid_reason.empty())
      check_reason(rec.invalid_reason, "shot seq " + std::to_string(rec.seq));
    if (c_valid >= 0) {
      const std::string& v = row[c_valid];
      if (v != "0" && v != "1")
        throw ValidationError("shot seq " + std::to_string(rec.seq) +
                              ": valid must be 0 or 1, got '" + v + "'");
      rec.valid = (v == "1");
    } else {
      rec.valid = rec.invalid_reason.empty();
    }
    if (rec.valid != rec.invalid_reason.empty())
      throw ValidationError("shot seq " + std::to_string(rec.seq) +
                            ": valid flag contradicts invalid_reason");
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<CartridgeRecord> load_cartridges(const std::string& cartridges_path) {
  return parse_cartridges(csv::read_file(cartridges_path));
}

Dataset load_dataset(const std::string& shots_path, const std::string& cartridges_path,
                     const std::string& plan_path) {
  Dataset ds;
  ds.plan = doe::load_plan(plan_path);
  ds.cartridges = parse_cartridges(csv::read_file(cartridges_path));
  ds.shots = parse_shots(csv::read_file(shots_path));

  std::unordered_map<std::string, const doe::Assignment*> plan_of;
  for (const doe::Assignment& a : ds.plan.assignments) plan_of[a.case_id] = &a;

  for (std::size_t i = 0; i < ds.cartridges.size(); ++i) {
    const CartridgeRecord& c = ds.cartridges[i];
    if (!ds.cartridge_index.emplace(c.case_id, i).second)
      throw ValidationError("cartridges: duplicate case_id '" + c.case_id + "'");
    auto it = plan_of.find(c.case_id);
    if (it == plan_of.end())
      throw ValidationError("cartridge '" + c.case_id + "' is not in the plan");
    const doe::Assignment& a = *it->second;
    if (c.lot != a.block)
      throw ValidationError("cartridge '" + c.case_id + "': lot '" + c.lot +
                            "' does not match plan block '" + a.block + "'");
    const doe::LevelTuple& tuple = ds.plan.level_of(a);
    if (tuple.size() != 2 || c.seating_depth != tuple[0] || c.powder_charge != tuple[1])
      throw ValidationError("cartridge '" + c.case_id +
                            "': level tuple does not match its plan assignment");
  }

  for (const ShotRecord& s : ds.shots) {
    if (!ds.cartridge_index.contains(s.case_id))
      throw ValidationError("shot seq " + std::to_string(s.seq) + " references unknown case '" +
                            s.case_id + "'");
  }
  return ds;
}

void save_cartridges(std::span<const CartridgeRecord> cartridges, const std::string& path) {
  csv::Table table;
  table.header = {"case_id", "lot", "seating_depth", "powder_charge"};
  for (const CovariateField& f : covariate_schema_fields()) table.header.push_back(f.name);
  for (const CartridgeRecord& c : cartridges) {
    std::vector<std::string> row = {c.case_id, c.lot, csv::format_double(c.seating_depth),
                                    csv::format_double(c.powder_charge)};
    for (const CovariateField& f : covariate_schema_fields())
      row.push_back(csv::format_double(c.*(f.member)));
    table.rows.push_back(std::move(row));
  }
  csv::write_file(table, path);
}

void save_shots(std::span<const ShotRecord> shots, const std::string& path) {
  csv::Table table;
  table.header = {"case_id", "target_id", "x", "y", "seq", "velocity", "valid", "invalid_reason"};
  for (const ShotRecord& s : shots) {
    table.rows.push_back({s.case_id, s.target_id, csv::format_double(s.x), csv::format_double(s.y),
                          std::to_string(s.seq),
                          s.velocity ? csv::format_double(*s.velocity) : std::string(),
                          s.valid ? "1" : "0", s.invalid_reason});
  }
  csv::write_file(table, path);
}

void save_dataset(const Dataset& dataset, const std::string& shots_path,
                  const std::string& cartridges_path, const std::string& plan_path) {
  doe::save_plan(dataset.plan, plan_path);
  save_cartridges(dataset.cartridges, cartridges_path);
  save_shots(dataset.shots, shots_path);
}

std::vector<InvalidationFlag> load_flags(const std::string& path) {
  csv::Table table = csv::read_file(path);
  std::size_t c_case = table.require_column("case_id", "flags");
  std::size_t c_reason = table.require_column("reason", "flags");
  std::vector<InvalidationFlag> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    InvalidationFlag flag{row[c_case], row[c_reason]};
    if (flag.case_id.empty()) throw ValidationError("flags: empty case_id");
    check_reason(flag.reason, "flag for case '" + flag.case_id + "'");
    out.push_back(std::move(flag));
  }
  return out;
}

InvalidationReport apply_invalidation(Dataset& dataset, std::span<const InvalidationFlag> flags) {
  std::unordered_set<std::string> flagged_cases;
  InvalidationReport report;
  for (const InvalidationFlag& flag : flags) {
    if (!dataset.cartridge_index.contains(flag.case_id))
      throw ValidationError("flag references unknown case '" + flag.case_id + "'");
    if (!flagged_cases.insert(flag.case_id).second)
      throw ValidationError("duplicate flag for case '" + flag.case_id + "'");
    bool hit = false;
    for (ShotRecord& shot : dataset.shots) {
      if (shot.case_id != flag.case_id) continue;
      shot.valid = false;
      shot.invalid_reason = flag.reason;
      ++report.by_reason[flag.reason];
      ++report.flagged;
      hit = true;
    }
    if (!hit)
      throw ValidationError("flag for case '" + flag.case_id + "' matches no shot");
  }
  for (const ShotRecord& shot : dataset.shots)
    if (shot.valid) ++report.valid_after;
  return report;
}

std::vector<ColumnStats> descriptive_stats(std::span<const CartridgeRecord> cartridges,
                                           const std::vector<std::string>& columns) {
  if (cartridges.empty()) throw ValidationError("no cartridges to summarize");
  std::vector<ColumnStats> out;
  for (const std::string& name : columns) {
    double CartridgeRecord::*member = nullptr;
    std::string display;
    if (name == "seating_depth") {
      member = &CartridgeRecord::seating_depth;
      display = "Seating Depth";
    } else if (name == "powder_charge") {
      member = &CartridgeRecord::powder_charge;
      display = "Powder Charge";
    } else if (name == "case_id" || name == "lot") {
      throw ValidationError("column '" + name + "' is not numeric");
    } else {
      const CovariateField& f = covariate_field(name);
      member = f.member;
      display = f.display;
    }

    std::vector<double> values;
    values.reserve(cartridges.size());
    for (const CartridgeRecord& c : cartridges) values.push_back(c.*member);
    std::sort(values.begin(), values.end());

    ColumnStats stats;
    stats.name = name;
    stats.display = std::move(display);
    stats.n = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    stats.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
      stats.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    stats.min = values.front();
    stats.max = values.back();
    std::size_t mid = values.size() / 2;
    stats.median = (values.size() % 2 == 1) ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
    out.push_back(std::move(stats));
  }
  return out;
}

std::vector<LotScreenRow> lot_difference_screen(std::span<const CartridgeRecord> cartridges,
                                                double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
  std::map<std::string, int> lot_sizes;
  std::vector<std::string> lots;  // first-appearance order
  for (const CartridgeRecord& c : cartridges) {
    if (lot_sizes[c.lot]++ == 0) lots.push_back(c.lot);
  }
  if (lots.size() < 2) throw ValidationError("lot screen needs at least two lots");
  for (const auto& [lot, n] : lot_sizes) {
    if (n < 2)
      throw ValidationError("lot screen needs at least two cartridges per lot; lot '" + lot +
                            "' has " + std::to_string(n));
  }

  std::vector<std::string> lot_labels;
  lot_labels.reserve(cartridges.size());
  for (const CartridgeRecord& c : cartridges) lot_labels.push_back(c.lot);

  std::vector<LotScreenRow> out;
  for (const CovariateField& f : covariate_schema_fields()) {
    linmod::DataTable data;
    data.add_categorical("lot", lot_labels, lots);
    std::vector<double> values;
    values.reserve(cartridges.size());
    double max_abs = 0.0;
    for (const CartridgeRecord& c : cartridges) {
      values.push_back(c.*(f.member));
      max_abs = std::max(max_abs, std::abs(values.back()));
    }
    data.add_numeric(f.name, std::move(values));

    linmod::ModelSpec spec;
    spec.response = f.name;
    spec.terms = {linmod::block_term("lot", "lot")};
    linmod::AnovaTable table = linmod::type1_anova(spec, data);

    const linmod::AnovaRow& row = table.terms.at(0);
    LotScreenRow screen;
    screen.covariate = f.name;
    screen.display = f.display;
    screen.df = row.df;
    screen.ss = row.ss;
    screen.ms = row.ms;
    screen.f = row.f;
    screen.p = row.p;
    // A response with no variation beyond rounding noise carries no lot
    // signal; without this guard the F ratio is noise over noise.
    const double noise_floor = 1e-24 * static_cast<double>(cartridges.size()) *
                               std::max(1.0, max_abs * max_abs);
    if ((!screen.f && screen.ss <= 1e-12 * std::max(table.total.ss, 1.0)) ||
        table.total.ss <= noise_floor) {
      screen.f = 0.0;
      screen.p = 1.0;
    }
    screen.significant = screen.p.has_value() && *screen.p < alpha;
    out.push_back(std::move(screen));
  }
  return out;
}

StabilityResult stability_series(const Dataset& dataset) {
  StabilityResult result;
  for (const ShotRecord& s : dataset.shots) {
    if (!s.valid) continue;
    result.series.push_back({s.seq, std::hypot(s.x, s.y)});
  }
  std::sort(result.series.begin(), result.series.end(),
            [](const StabilityPoint& a, const StabilityPoint& b) { return a.seq < b.seq; });

  auto variance = [](std::span<const StabilityPoint> half) {
    double sum = 0.0;
    for (const StabilityPoint& p : half) sum += p.distance;
    double mean = sum / static_cast<double>(half.size());
    double ss = 0.0;
    for (const StabilityPoint& p : half) ss += (p.distance - mean) * (p.distance - mean);
    return ss / static_cast<double>(half.size() - 1);
  };

  std::size_t n = result.series.size();
  std::size_t n1 = n / 2;
  std::size_t n2 = n - n1;
  if (n1 < 2 || n2 < 2) {
    result.degenerate = true;
    return result;
  }
  std::span<const StabilityPoint> all(result.series);
  result.var_first = variance(all.subspan(0, n1));
  result.var_second = variance(all.subspan(n1));
  result.df1 = static_cast<int>(n2) - 1;
  result.df2 = static_cast<int>(n1) - 1;
  if (result.var_first <= 0.0 || result.var_second <= 0.0) {
    result.degenerate = true;
    return result;
  }
  result.f = result.var_second / result.var_first;
  double upper = f_pvalue(result.f, result.df1, result.df2);
  result.p = std::min(1.0, 2.0 * std::min(upper, 1.0 - upper));
  return result;
}

std::vector<surface::LeveledShot> leveled_shots(const Dataset& dataset) {
  std::vector<surface::LeveledShot> out;
  for (const ShotRecord& s : dataset.shots) {
    if (!s.valid) continue;
    const CartridgeRecord& c = dataset.cartridge_of(s);
    out.push_back({c.seating_depth, c.powder_charge, s.x, s.y});
  }
  return out;
}

linmod::DataTable analysis_table(const Dataset& dataset) {
  if (dataset.plan.factors.size() != 2)
    throw ValidationError("analysis expects the two-factor seating depth x powder charge design");

  std::vector<const ShotRecord*> shots;
  for (const ShotRecord& s : dataset.shots)
    if (s.valid) shots.push_back(&s);
  if (shots.empty()) throw ValidationError("no valid shots to analyze");

  // Cell centers over valid shots, per (seating depth, powder charge) cell.
  const std::vector<double>& sd_levels = dataset.plan.factors[0].levels;
  const std::vector<double>& pc_levels = dataset.plan.factors[1].levels;
  std::size_t n_cells = sd_levels.size() * pc_levels.size();
  std::vector<double> cx(n_cells, 0.0), cy(n_cells, 0.0);
  std::vector<int> count(n_cells, 0);

  auto index_of = [](double value, const std::vector<double>& levels) {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] == value) return i;
    throw ComputationError("joined level is missing from the plan grid");
  };

  std::vector<std::size_t> cell_of(shots.size());
  for (std::size_t k = 0; k < shots.size(); ++k) {
    const CartridgeRecord& c = dataset.cartridge_of(*shots[k]);
    std::size_t cell =
        index_of(c.seating_depth, sd_levels) * pc_levels.size() + index_of(c.powder_charge, pc_levels);
    cell_of[k] = cell;
    cx[cell] += shots[k]->x;
    cy[cell] += shots[k]->y;
    ++count[cell];
  }
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    if (count[cell] == 0) continue;
    cx[cell] /= count[cell];
    cy[cell] /= count[cell];
  }

  std::vector<double> response(shots.size());
  std::vector<std::string> lot(shots.size()), sd(shots.size()), pc(shots.size());
  std::vector<std::vector<double>> covariates(covariate_schema_fields().size(),
                                              std::vector<double>(shots.size()));
  for (std::size_t k = 0; k < shots.size(); ++k) {
    const ShotRecord& s = *shots[k];
    const CartridgeRecord& c = dataset.cartridge_of(s);
    response[k] = std::hypot(s.x - cx[cell_of[k]], s.y - cy[cell_of[k]]);
    lot[k] = c.lot;
    sd[k] = level_label(c.seating_depth);
    pc[k] = level_label(c.powder_charge);
    const auto& fields = covariate_schema_fields();
    for (std::size_t j = 0; j < fields.size(); ++j)
      covariates[j][k] = c.*(fields[j].member);
  }

  std::vector<std::string> sd_labels, pc_labels;
  for (double v : sd_levels) sd_labels.push_back(level_label(v));
  for (double v : pc_levels) pc_labels.push_back(level_label(v));

  linmod::DataTable data;
  data.add_numeric("radial_deviation", std::move(response));
  data.add_categorical("lot", lot, dataset.plan.blocks);
  data.add_categorical("seating_depth", sd, sd_labels);
  data.add_categorical("powder_charge", pc, pc_labels);
  const auto& fields = covariate_schema_fields();
  for (std::size_t j = 0; j < fields.size(); ++j)
    data.add_numeric(fields[j].name, std::move(covariates[j]));
  return data;
}

linmod::ModelSpec default_anova_spec() {
  linmod::ModelSpec spec;
  spec.response = "radial_deviation";
  spec.terms = {
      linmod::block_term("lot", "lot"),
      linmod::factor_term("seating_depth", "Seating Depth"),
      linmod::factor_term("powder_charge", "Powder Charge"),
      linmod::interaction_term({"seating_depth", "powder_charge"},
                               "Seating Depth * Powder Charge"),
  };
  return spec;
}

linmod::ModelSpec default_ancova_spec() {
  linmod::ModelSpec spec = default_anova_spec();
  for (const std::string& name : covariate_model_order()) {
    const CovariateField& f = covariate_field(name);
    spec.terms.push_back(linmod::covariate_term(f.name, f.display));
  }
  return spec;
}

}  // namespace loaddev::dataio
