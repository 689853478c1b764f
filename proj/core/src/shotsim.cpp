#include "loaddev/shotsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

#include <nlohmann/json.hpp>

#include "loaddev/errors.hpp"
#include "loaddev/linmod.hpp"
#include "loaddev/rng.hpp"

namespace loaddev::shotsim {

namespace {

std::size_t grid_index(const doe::DesignPlan& plan, double sd, double pc, const char* what) {
  auto find = [&](double value, const std::vector<double>& levels) -> std::size_t {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i] == value) return i;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      double scale = std::max(std::abs(levels[i]), std::abs(value));
      if (std::abs(levels[i] - value) <= 1e-9 * scale) return i;
    }
    throw ValidationError(std::string(what) + " references a level not on the plan grid");
  };
  if (plan.factors.size() != 2)
    throw ValidationError("simulation expects the two-factor design");
  std::size_t i = find(sd, plan.factors[0].levels);
  std::size_t j = find(pc, plan.factors[1].levels);
  return i * plan.factors[1].levels.size() + j;
}

void validate(const EffectModel& effects,
              const std::map<std::string, CovariateDistribution>& covariates) {
  if (!(effects.sigma >= 0.0) || !std::isfinite(effects.sigma))
    throw ValidationError("sigma must be finite and non-negative");
  for (const CellMultiplier& m : effects.multipliers) {
    if (!(m.factor >= 0.0) || !std::isfinite(m.factor))
      throw ValidationError("dispersion multipliers must be finite and non-negative");
  }
  for (const CellOffset& o : effects.offsets) {
    if (!std::isfinite(o.dx) || !std::isfinite(o.dy))
      throw ValidationError("cell offsets must be finite");
  }
  for (const auto& [name, slope] : effects.covariate_slopes) {
    dataio::covariate_field(name);
    if (!std::isfinite(slope)) throw ValidationError("covariate slope must be finite");
    if (!covariates.contains(name))
      throw ValidationError("no distribution configured for covariate '" + name + "'");
  }
  for (const auto& [name, dist] : covariates) {
    dataio::covariate_field(name);
    if (!std::isfinite(dist.mean) || !std::isfinite(dist.sd) || dist.sd < 0.0)
      throw ValidationError("covariate distribution for '" + name + "' is invalid");
    if (dist.bernoulli && (dist.mean < 0.0 || dist.mean > 1.0))
      throw ValidationError("Bernoulli probability for '" + name + "' must be in [0, 1]");
  }
}

double draw_covariate(Rng& rng, const std::string& name, const CovariateDistribution& dist) {
  if (dist.bernoulli) return rng.uniform01() < dist.mean ? 1.0 : 0.0;
  // The weight columns must stay positive to satisfy the cartridge schema;
  // with realistic configurations a redraw never actually triggers.
  bool positive_only =
      (name == "case_weight" || name == "primer_weight" || name == "bullet_weight");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double v = dist.mean + dist.sd * rng.normal();
    if (!positive_only || v > 0.0) return v;
  }
  throw ComputationError("covariate '" + name + "' cannot be drawn positive; check its mean/sd");
}

}  // namespace

std::map<std::string, CovariateDistribution> default_covariate_distributions() {
  return {
      {"case_length", {1.7526, 0.0044, false}},
      {"neck_inner_diameter", {0.2200, 0.0005, false}},
      {"neck_outer_diameter", {0.2414, 0.0006, false}},
      {"neck_thickness", {0.0114, 0.0005, false}},
      {"head_space", {-8.4303, 1.8566, false}},
      {"primer_pocket_depth", {0.1190, 0.0012, false}},
      {"primer_pocket_diameter", {0.1710, 0.0005, false}},
      {"case_weight", {92.9526, 0.7691, false}},
      {"case_volume", {45.8341, 0.5118, false}},
      {"primer_weight", {3.2650, 0.0478, false}},
      {"bullet_overall_length", {0.8107, 0.0010, false}},
      {"bullet_weight", {55.0195, 0.0711, false}},
      {"case_mouth_square", {0.7316, 0.0, true}},
  };
}

SimConfig parse_sim_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("simulation config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("simulation config must be a JSON object");

  SimConfig config;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "sigma") {
        config.effects.sigma = value.get<double>();
      } else if (key == "seed") {
        config.effects.seed = value.get<std::uint64_t>();
      } else if (key == "offsets") {
        for (const auto& item : value) {
          config.effects.offsets.push_back({item.at("seating_depth").get<double>(),
                                            item.at("powder_charge").get<double>(),
                                            item.at("dx").get<double>(),
                                            item.at("dy").get<double>()});
        }
      } else if (key == "multipliers") {
        for (const auto& item : value) {
          config.effects.multipliers.push_back({item.at("seating_depth").get<double>(),
                                                item.at("powder_charge").get<double>(),
                                                item.at("factor").get<double>()});
        }
      } else if (key == "covariate_slopes") {
        for (const auto& [name, slope] : value.items())
          config.effects.covariate_slopes[name] = slope.get<double>();
      } else if (key == "covariates") {
        for (const auto& [name, spec] : value.items()) {
          CovariateDistribution dist;
          auto it = config.covariates.find(name);
          if (it != config.covariates.end()) dist = it->second;
          if (spec.contains("mean")) dist.mean = spec.at("mean").get<double>();
          if (spec.contains("sd")) dist.sd = spec.at("sd").get<double>();
          if (spec.contains("bernoulli")) dist.bernoulli = spec.at("bernoulli").get<bool>();
          config.covariates[name] = dist;
        }
      } else {
        throw ValidationError("unknown simulation config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed simulation config: ") + e.what());
  }
  validate(config.effects, config.covariates);
  return config;
}

dataio::Dataset simulate_experiment(const doe::DesignPlan& plan, const EffectModel& effects,
                                    const std::map<std::string, CovariateDistribution>& covariates) {
  validate(effects, covariates);
  for (const auto& [name, dist] : default_covariate_distributions()) {
    if (!covariates.contains(name))
      throw ValidationError("no distribution configured for covariate '" + name + "'");
  }

  std::size_t n_cells = plan.grid.size();
  std::vector<double> off_x(n_cells, 0.0), off_y(n_cells, 0.0), mult(n_cells, 1.0);
  for (const CellOffset& o : effects.offsets) {
    std::size_t cell = grid_index(plan, o.sd, o.pc, "offset");
    off_x[cell] = o.dx;
    off_y[cell] = o.dy;
  }
  for (const CellMultiplier& m : effects.multipliers)
    mult[grid_index(plan, m.sd, m.pc, "multiplier")] = m.factor;

  Rng rng(effects.seed);
  dataio::Dataset ds;
  ds.plan = plan;

  // Covariates per cartridge, in plan order, each in schema order.
  const auto& fields = dataio::covariate_schema_fields();
  for (const doe::Assignment& a : plan.assignments) {
    dataio::CartridgeRecord rec;
    rec.case_id = a.case_id;
    rec.lot = a.block;
    const doe::LevelTuple& tuple = plan.level_of(a);
    if (tuple.size() != 2) throw ValidationError("simulation expects the two-factor design");
    rec.seating_depth = tuple[0];
    rec.powder_charge = tuple[1];
    for (const dataio::CovariateField& f : fields)
      rec.*(f.member) = draw_covariate(rng, f.name, covariates.at(f.name));
    ds.cartridge_index.emplace(rec.case_id, ds.cartridges.size());
    ds.cartridges.push_back(std::move(rec));
  }

  // Firing order: one uniform shuffle of all cases.
  std::vector<std::size_t> order(ds.cartridges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  int width = 1;
  for (std::size_t n = ds.cartridges.size(); n >= 10; n /= 10) ++width;

  ds.shots.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const dataio::CartridgeRecord& c = ds.cartridges[order[k]];
    std::size_t cell = grid_index(plan, c.seating_depth, c.powder_charge, "assignment");

    double log_scale = 0.0;
    for (const auto& [name, slope] : effects.covariate_slopes) {
      const dataio::CovariateField& f = dataio::covariate_field(name);
      log_scale += slope * (c.*(f.member) - covariates.at(name).mean);
    }
    double s = effects.sigma * mult[cell] * std::exp(log_scale);

    dataio::ShotRecord shot;
    shot.case_id = c.case_id;
    shot.seq = static_cast<long>(k) + 1;
    std::string digits = std::to_string(shot.seq);
    shot.target_id = "T" + std::string(width > static_cast<int>(digits.size())
                                           ? width - digits.size()
                                           : 0, '0') + digits;
    shot.x = off_x[cell] + s * rng.normal();
    shot.y = off_y[cell] + s * rng.normal();
    // Roughly half the shots get a chronograph reading, as pass-through data.
    if (rng.uniform01() < 0.5) shot.velocity = 3200.0 + 30.0 * rng.normal();
    ds.shots.push_back(std::move(shot));
  }
  return ds;
}

PowerResult power_run(const doe::DesignPlan& plan, const EffectModel& effects, int n_seeds,
                      double alpha) {
  if (n_seeds < 1) throw ValidationError("power run needs at least one seed");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");

  linmod::ModelSpec spec = dataio::default_anova_spec();
  PowerResult result;
  result.n_seeds = n_seeds;
  result.alpha = alpha;
  for (const linmod::Term& term : spec.terms)
    result.rows.push_back({term.name, term.display, 0, 0.0});

  for (int i = 0; i < n_seeds; ++i) {
    EffectModel seeded = effects;
    seeded.seed = effects.seed + static_cast<std::uint64_t>(i);
    dataio::Dataset ds = simulate_experiment(plan, seeded);
    linmod::AnovaTable table = linmod::type1_anova(spec, dataio::analysis_table(ds));
    for (std::size_t t = 0; t < result.rows.size(); ++t) {
      const linmod::AnovaRow& row = table.terms.at(t);
      if (row.p && *row.p < alpha) ++result.rows[t].detected;
    }
  }
  for (PowerRow& row : result.rows)
    row.rate = static_cast<double>(row.detected) / static_cast<double>(n_seeds);
  return result;
}

}  // namespace loaddev::shotsim
