// Command-line front end for the load-development pipeline:
// design -> simulate (or ingest measured data) -> stats / screen-lots ->
// anova / ancova -> surface / rank / stability.
//
// Exit codes: 0 success, 1 input or validation problem, 2 computation
// failure.  Human-readable tables go to stdout; --json switches the
// payload to full-precision JSON; --out redirects the payload to a file.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "loaddev/csv.hpp"
#include "loaddev/dataio.hpp"
#include "loaddev/doe.hpp"
#include "loaddev/errors.hpp"
#include "loaddev/linmod.hpp"
#include "loaddev/shotsim.hpp"
#include "loaddev/surface.hpp"

namespace {

using loaddev::ValidationError;
using nlohmann::ordered_json;
namespace csvio = loaddev::csv;
namespace dataio = loaddev::dataio;
namespace doe = loaddev::doe;
namespace linmod = loaddev::linmod;
namespace shotsim = loaddev::shotsim;
namespace surface = loaddev::surface;

void emit(const std::string& payload, const std::string& out_path) {
  if (out_path.empty())
    std::cout << payload;
  else
    csvio::write_text_file(out_path, payload);
}

// Fixed-decimal rendering with -0.00... normalized to 0.00...
std::string fixed(double value, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, value);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

// Aligned plain-text table; numeric columns right-aligned, two spaces
// between columns, trailing whitespace trimmed.
std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows,
                         const std::vector<bool>& right_align) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    std::string text;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) text += "  ";
      std::string pad(width[c] - cells[c].size(), ' ');
      text += right_align[c] ? pad + cells[c] : cells[c] + pad;
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    os << text << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
  return os.str();
}

struct DatasetArgs {
  std::string shots;
  std::string cartridges;
  std::string plan;
  std::string flags;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& args) {
  cmd->add_option("--shots", args.shots, "Shot records CSV")->required();
  cmd->add_option("--cartridges", args.cartridges, "Cartridge records CSV")->required();
  cmd->add_option("--plan", args.plan, "Design plan CSV (sidecar JSON alongside)")->required();
  cmd->add_option("--flags", args.flags, "Invalidation flags CSV; flagged shots are excluded");
}

dataio::Dataset load_with_flags(const DatasetArgs& args) {
  dataio::Dataset ds = dataio::load_dataset(args.shots, args.cartridges, args.plan);
  if (!args.flags.empty()) dataio::apply_invalidation(ds, dataio::load_flags(args.flags));
  return ds;
}

// A model term token: a known column name, or names joined by '*' for an
// interaction.  Kind and display label follow the standard analysis columns.
linmod::Term term_from_token(const std::string& token) {
  auto display_of = [](const std::string& column) -> std::string {
    if (column == "lot") return "lot";
    if (column == "seating_depth") return "Seating Depth";
    if (column == "powder_charge") return "Powder Charge";
    return dataio::covariate_field(column).display;  // throws for unknown columns
  };

  std::vector<std::string> columns;
  std::string piece;
  std::istringstream is(token);
  while (std::getline(is, piece, '*')) {
    if (piece.empty()) throw ValidationError("malformed model term '" + token + "'");
    columns.push_back(piece);
  }
  if (columns.empty()) throw ValidationError("malformed model term '" + token + "'");
  if (columns.size() > 1) {
    std::string display;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i > 0) display += " * ";
      display += display_of(columns[i]);
    }
    return linmod::interaction_term(columns, display);
  }
  const std::string& column = columns[0];
  std::string display = display_of(column);
  if (column == "lot") return linmod::block_term(column, display);
  if (column == "seating_depth" || column == "powder_charge")
    return linmod::factor_term(column, display);
  return linmod::covariate_term(column, display);
}

linmod::ModelSpec spec_from_terms(const std::vector<std::string>& tokens) {
  linmod::ModelSpec spec;
  spec.response = "radial_deviation";
  for (const std::string& token : tokens) spec.terms.push_back(term_from_token(token));
  return spec;
}

int run_design(const std::string& out, std::uint64_t seed, const std::vector<std::string>& blocks,
               int cases_per_block) {
  doe::PlanSkeleton skeleton;
  skeleton.factors = {doe::default_seating_depth_factor(), doe::default_powder_charge_factor()};
  skeleton.blocks = blocks;
  skeleton.cases_per_block = cases_per_block;
  doe::DesignPlan plan = doe::randomize_assignment(skeleton, seed);
  doe::save_plan(plan, out);
  std::cout << "plan: " << plan.assignments.size() << " cases, " << plan.blocks.size()
            << " blocks x " << plan.cases_per_block << ", " << plan.grid.size()
            << " grid cells, seed " << plan.seed << "\n"
            << "wrote " << out << " and " << out << ".json\n";
  return 0;
}

int run_simulate(const std::string& plan_path, const std::string& config_path,
                 std::optional<std::uint64_t> seed, const std::string& out_cartridges,
                 const std::string& out_shots) {
  doe::DesignPlan plan = doe::load_plan(plan_path);
  shotsim::SimConfig config;
  if (!config_path.empty())
    config = shotsim::parse_sim_config(csvio::read_text_file(config_path));
  if (seed) config.effects.seed = *seed;
  dataio::Dataset ds = shotsim::simulate_experiment(plan, config.effects, config.covariates);
  dataio::save_cartridges(ds.cartridges, out_cartridges);
  dataio::save_shots(ds.shots, out_shots);
  std::cout << "simulated " << ds.cartridges.size() << " cartridges, " << ds.shots.size()
            << " shots (seed " << config.effects.seed << ")\n"
            << "wrote " << out_cartridges << " and " << out_shots << "\n";
  return 0;
}

int run_stats(const std::string& cartridges_path, std::vector<std::string> columns, bool json,
              const std::string& out) {
  std::vector<dataio::CartridgeRecord> cartridges = dataio::load_cartridges(cartridges_path);
  if (columns.empty()) columns = dataio::covariate_stats_order();
  std::vector<dataio::ColumnStats> stats = dataio::descriptive_stats(cartridges, columns);

  if (json) {
    ordered_json doc = ordered_json::array();
    for (const dataio::ColumnStats& s : stats) {
      ordered_json row;
      row["column"] = s.name;
      row["display"] = s.display;
      row["n"] = s.n;
      row["mean"] = s.mean;
      row["std_dev"] = s.sd ? ordered_json(*s.sd) : ordered_json(nullptr);
      row["minimum"] = s.min;
      row["maximum"] = s.max;
      row["median"] = s.median;
      doc.push_back(std::move(row));
    }
    emit(doc.dump(2) + "\n", out);
    return 0;
  }

  std::vector<std::vector<std::string>> rows;
  for (const dataio::ColumnStats& s : stats) {
    rows.push_back({s.display, std::to_string(s.n), fixed(s.mean, 4),
                    s.sd ? fixed(*s.sd, 4) : "", fixed(s.min, 4), fixed(s.max, 4),
                    fixed(s.median, 4)});
  }
  emit(render_table({"Column", "N", "Mean", "Std Dev", "Minimum", "Maximum", "Median"}, rows,
                    {false, true, true, true, true, true, true}),
       out);
  return 0;
}

int run_screen_lots(const std::string& cartridges_path, double alpha, bool json,
                    const std::string& out) {
  std::vector<dataio::CartridgeRecord> cartridges = dataio::load_cartridges(cartridges_path);
  std::vector<dataio::LotScreenRow> screen = dataio::lot_difference_screen(cartridges, alpha);

  if (json) {
    ordered_json doc;
    doc["alpha"] = alpha;
    doc["covariates"] = ordered_json::array();
    for (const dataio::LotScreenRow& r : screen) {
      ordered_json row;
      row["covariate"] = r.covariate;
      row["display"] = r.display;
      row["df"] = r.df;
      row["ss"] = r.ss;
      row["ms"] = r.ms ? ordered_json(*r.ms) : ordered_json(nullptr);
      row["f"] = r.f ? ordered_json(*r.f) : ordered_json(nullptr);
      row["p"] = r.p ? ordered_json(*r.p) : ordered_json(nullptr);
      row["significant"] = r.significant;
      doc["covariates"].push_back(std::move(row));
    }
    emit(doc.dump(2) + "\n", out);
    return 0;
  }

  std::vector<std::vector<std::string>> rows;
  int n_significant = 0;
  for (const dataio::LotScreenRow& r : screen) {
    rows.push_back({r.display, std::to_string(r.df), csvio::format_double(r.ss),
                    r.ms ? csvio::format_double(*r.ms) : "", r.f ? fixed(*r.f, 2) : "",
                    r.p ? fixed(*r.p, 4) : "", r.significant ? "*" : ""});
    if (r.significant) ++n_significant;
  }
  std::ostringstream os;
  os << render_table({"Covariate", "DF", "Sum of Squares", "Mean Square", "F Value", "Pr > F",
                      "Signif"},
                     rows, {false, true, true, true, true, true, false});
  os << "significant at alpha = " << csvio::format_double(alpha) << ": " << n_significant
     << " of " << screen.size() << "\n";
  emit(os.str(), out);
  return 0;
}

int run_model(const DatasetArgs& args, bool ancova, const std::vector<std::string>& terms,
              bool json, const std::string& out) {
  dataio::Dataset ds = load_with_flags(args);
  linmod::ModelSpec spec = terms.empty()
                               ? (ancova ? dataio::default_ancova_spec() : dataio::default_anova_spec())
                               : spec_from_terms(terms);
  linmod::AnovaTable table = ancova ? linmod::type1_ancova(spec, dataio::analysis_table(ds))
                                    : linmod::type1_anova(spec, dataio::analysis_table(ds));
  emit(json ? linmod::to_json(table) : linmod::to_text(table), out);
  return 0;
}

int run_surface(const DatasetArgs& args, const std::string& format, int interpolate,
                const std::string& out) {
  dataio::Dataset ds = load_with_flags(args);
  if (ds.plan.factors.size() != 2)
    throw ValidationError("surface expects the two-factor seating depth x powder charge design");
  surface::SurfaceGrid grid =
      surface::cell_means(dataio::leveled_shots(ds), ds.plan.factors[0].levels,
                          ds.plan.factors[1].levels);
  std::string payload;
  if (interpolate > 0) {
    payload = surface::export_surface_interpolated(grid, interpolate);
  } else {
    payload = surface::export_surface(grid, format == "dense" ? surface::SurfaceFormat::dense_csv
                                                              : surface::SurfaceFormat::long_csv);
  }
  emit(payload, out);
  return 0;
}

int run_rank(const DatasetArgs& args, const std::string& grid_path, const std::string& format,
             int top, int bottom, bool json, const std::string& out) {
  surface::SurfaceGrid grid;
  if (!grid_path.empty()) {
    grid = surface::import_surface(csvio::read_text_file(grid_path),
                                   format == "dense" ? surface::SurfaceFormat::dense_csv
                                                     : surface::SurfaceFormat::long_csv);
  } else {
    dataio::Dataset ds = load_with_flags(args);
    if (ds.plan.factors.size() != 2)
      throw ValidationError("rank expects the two-factor seating depth x powder charge design");
    grid = surface::cell_means(dataio::leveled_shots(ds), ds.plan.factors[0].levels,
                               ds.plan.factors[1].levels);
  }
  if (top < 0 || bottom < 0) throw ValidationError("--top and --bottom must be non-negative");

  std::vector<surface::RankEntry> entries = surface::rank_levels(grid);
  std::size_t n = entries.size();
  std::size_t n_top = std::min<std::size_t>(static_cast<std::size_t>(top), n);
  std::size_t n_bottom = std::min<std::size_t>(static_cast<std::size_t>(bottom), n - n_top);

  auto entry_json = [](const surface::RankEntry& e) {
    ordered_json row;
    row["rank"] = e.rank;
    row["seating_depth"] = e.sd;
    row["powder_charge"] = e.pc;
    row["mean_radius"] = e.mean_radius;
    row["n"] = e.n > 0 ? ordered_json(e.n) : ordered_json(nullptr);
    return row;
  };

  if (json) {
    ordered_json doc;
    doc["cells"] = static_cast<int>(n);
    doc["top"] = ordered_json::array();
    doc["bottom"] = ordered_json::array();
    for (std::size_t i = 0; i < n_top; ++i) doc["top"].push_back(entry_json(entries[i]));
    for (std::size_t i = n - n_bottom; i < n; ++i)
      doc["bottom"].push_back(entry_json(entries[i]));
    emit(doc.dump(2) + "\n", out);
    return 0;
  }

  std::vector<std::vector<std::string>> rows;
  auto add_row = [&](const char* group, const surface::RankEntry& e) {
    rows.push_back({group, std::to_string(e.rank), csvio::format_double(e.sd),
                    csvio::format_double(e.pc), fixed(e.mean_radius, 2),
                    e.n > 0 ? std::to_string(e.n) : ""});
  };
  for (std::size_t i = 0; i < n_top; ++i) add_row("top", entries[i]);
  for (std::size_t i = n - n_bottom; i < n; ++i) add_row("bottom", entries[i]);
  emit(render_table({"Group", "Rank", "Seating Depth", "Powder Charge", "Mean Radius", "N"}, rows,
                    {false, true, true, true, true, true}),
       out);
  return 0;
}

int run_stability(const DatasetArgs& args, const std::string& series_path, bool json,
                  const std::string& out) {
  dataio::Dataset ds = load_with_flags(args);
  dataio::StabilityResult res = dataio::stability_series(ds);

  if (!series_path.empty()) {
    csvio::Table table;
    table.header = {"seq", "distance"};
    for (const dataio::StabilityPoint& p : res.series)
      table.rows.push_back({std::to_string(p.seq), csvio::format_double(p.distance)});
    csvio::write_file(table, series_path);
  }

  if (json) {
    ordered_json doc;
    doc["n"] = static_cast<int>(res.series.size());
    doc["degenerate"] = res.degenerate;
    if (!res.degenerate) {
      doc["var_first"] = res.var_first;
      doc["var_second"] = res.var_second;
      doc["f"] = res.f;
      doc["df1"] = res.df1;
      doc["df2"] = res.df2;
      doc["p"] = res.p;
    }
    doc["series"] = ordered_json::array();
    for (const dataio::StabilityPoint& p : res.series)
      doc["series"].push_back(ordered_json{{"seq", p.seq}, {"distance", p.distance}});
    emit(doc.dump(2) + "\n", out);
    return 0;
  }

  std::ostringstream os;
  os << "shots: " << res.series.size() << "\n";
  if (res.degenerate) {
    os << "variance ratio: degenerate (too few shots or zero variance)\n";
  } else {
    std::size_t n1 = res.series.size() / 2;
    os << "first half: n=" << n1 << ", variance=" << csvio::format_double(res.var_first) << "\n"
       << "second half: n=" << res.series.size() - n1
       << ", variance=" << csvio::format_double(res.var_second) << "\n"
       << "F(" << res.df1 << ", " << res.df2 << ") = " << fixed(res.f, 2) << "\n"
       << "Pr > F (two-sided) = " << fixed(res.p, 4) << "\n";
  }
  emit(os.str(), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Blocked factorial load development: design, simulate, and analyze "
      "shot-group experiments"};
  app.require_subcommand(1);
  int rc = 0;

  // design
  auto* design = app.add_subcommand("design", "Generate a randomized blocked factorial plan");
  std::string design_out;
  std::uint64_t design_seed = 1;
  std::vector<std::string> design_blocks = {"1", "2", "3", "4"};
  int design_cases = 100;
  design->add_option("--out", design_out, "Plan CSV path (JSON sidecar written alongside)")
      ->required();
  design->add_option("--seed", design_seed, "Randomization seed (default 1)");
  design->add_option("--blocks", design_blocks, "Block labels (default 1 2 3 4)")->delimiter(',');
  design->add_option("--cases-per-block", design_cases, "Cases per block (default 100)");
  design->callback(
      [&] { rc = run_design(design_out, design_seed, design_blocks, design_cases); });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Simulate an experiment over a plan");
  std::string sim_plan, sim_config, sim_out_cartridges, sim_out_shots;
  std::optional<std::uint64_t> sim_seed;
  simulate->add_option("--plan", sim_plan, "Design plan CSV")->required();
  simulate->add_option("--config", sim_config, "Effect model JSON config");
  simulate->add_option("--seed", sim_seed, "Override the config seed");
  simulate->add_option("--out-cartridges", sim_out_cartridges, "Cartridges CSV to write")
      ->required();
  simulate->add_option("--out-shots", sim_out_shots, "Shots CSV to write")->required();
  simulate->callback([&] {
    rc = run_simulate(sim_plan, sim_config, sim_seed, sim_out_cartridges, sim_out_shots);
  });

  // stats
  auto* stats = app.add_subcommand("stats", "Descriptive statistics of cartridge measurements");
  std::string stats_cartridges, stats_out;
  std::vector<std::string> stats_columns;
  bool stats_json = false;
  stats->add_option("--cartridges", stats_cartridges, "Cartridge records CSV")->required();
  stats->add_option("--columns", stats_columns, "Columns to summarize (default: all covariates)")
      ->delimiter(',');
  stats->add_flag("--json", stats_json, "Full-precision JSON output");
  stats->add_option("--out", stats_out, "Write output to a file instead of stdout");
  stats->callback([&] { rc = run_stats(stats_cartridges, stats_columns, stats_json, stats_out); });

  // screen-lots
  auto* screen = app.add_subcommand(
      "screen-lots", "One-way ANOVA of each covariate against lot (blocking justification)");
  std::string screen_cartridges, screen_out;
  double screen_alpha = 0.05;
  bool screen_json = false;
  screen->add_option("--cartridges", screen_cartridges, "Cartridge records CSV")->required();
  screen->add_option("--alpha", screen_alpha, "Significance level (default 0.05)");
  screen->add_flag("--json", screen_json, "Full-precision JSON output");
  screen->add_option("--out", screen_out, "Write output to a file instead of stdout");
  screen->callback(
      [&] { rc = run_screen_lots(screen_cartridges, screen_alpha, screen_json, screen_out); });

  // anova / ancova
  DatasetArgs anova_args, ancova_args;
  std::vector<std::string> anova_terms, ancova_terms;
  bool anova_json = false, ancova_json = false;
  std::string anova_out, ancova_out;

  auto* anova = app.add_subcommand(
      "anova", "Sequential ANOVA: lot + seating depth + powder charge + interaction");
  add_dataset_options(anova, anova_args);
  anova->add_option("--terms", anova_terms,
                    "Override model terms, e.g. lot,seating_depth,powder_charge,"
                    "seating_depth*powder_charge")
      ->delimiter(',');
  anova->add_flag("--json", anova_json, "Full-precision JSON output");
  anova->add_option("--out", anova_out, "Write output to a file instead of stdout");
  anova->callback([&] { rc = run_model(anova_args, false, anova_terms, anova_json, anova_out); });

  auto* ancova =
      app.add_subcommand("ancova", "Sequential ANCOVA: the ANOVA terms plus all 13 covariates");
  add_dataset_options(ancova, ancova_args);
  ancova->add_option("--terms", ancova_terms, "Override model terms")->delimiter(',');
  ancova->add_flag("--json", ancova_json, "Full-precision JSON output");
  ancova->add_option("--out", ancova_out, "Write output to a file instead of stdout");
  ancova->callback(
      [&] { rc = run_model(ancova_args, true, ancova_terms, ancova_json, ancova_out); });

  // surface
  auto* surf = app.add_subcommand("surface", "Per-cell mean-radius response surface CSV");
  DatasetArgs surf_args;
  std::string surf_format = "long", surf_out;
  int surf_interpolate = 0;
  add_dataset_options(surf, surf_args);
  surf->add_option("--format", surf_format, "Output shape: long or dense (default long)")
      ->check(CLI::IsMember({"long", "dense"}));
  surf->add_option("--interpolate", surf_interpolate,
                   "Emit a bilinearly refined long-form grid with N subdivisions per step");
  surf->add_option("--out", surf_out, "Write output to a file instead of stdout");
  surf->callback([&] { rc = run_surface(surf_args, surf_format, surf_interpolate, surf_out); });

  // rank
  auto* rank = app.add_subcommand("rank", "Rank cells by mean radius (best and worst)");
  DatasetArgs rank_args;
  std::string rank_grid, rank_format = "long", rank_out;
  int rank_top = 2, rank_bottom = 1;
  bool rank_json = false;
  rank->add_option("--grid", rank_grid, "Rank a stored surface CSV instead of a dataset");
  rank->add_option("--format", rank_format, "Stored surface shape: long or dense (default long)")
      ->check(CLI::IsMember({"long", "dense"}));
  rank->add_option("--shots", rank_args.shots, "Shot records CSV");
  rank->add_option("--cartridges", rank_args.cartridges, "Cartridge records CSV");
  rank->add_option("--plan", rank_args.plan, "Design plan CSV");
  rank->add_option("--flags", rank_args.flags, "Invalidation flags CSV");
  rank->add_option("--top", rank_top, "Best cells to print (default 2)");
  rank->add_option("--bottom", rank_bottom, "Worst cells to print (default 1)");
  rank->add_flag("--json", rank_json, "Full-precision JSON output");
  rank->add_option("--out", rank_out, "Write output to a file instead of stdout");
  rank->callback([&] {
    if (rank_grid.empty() &&
        (rank_args.shots.empty() || rank_args.cartridges.empty() || rank_args.plan.empty()))
      throw ValidationError("rank needs either --grid or --shots/--cartridges/--plan");
    rc = run_rank(rank_args, rank_grid, rank_format, rank_top, rank_bottom, rank_json, rank_out);
  });

  // stability
  auto* stability =
      app.add_subcommand("stability", "Distance-from-bulls-eye series and variance-ratio check");
  DatasetArgs stability_args;
  std::string stability_series_path, stability_out;
  bool stability_json = false;
  add_dataset_options(stability, stability_args);
  stability->add_option("--series", stability_series_path, "Write the (seq, distance) CSV here");
  stability->add_flag("--json", stability_json, "Full-precision JSON output");
  stability->add_option("--out", stability_out, "Write output to a file instead of stdout");
  stability->callback([&] {
    rc = run_stability(stability_args, stability_series_path, stability_json, stability_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const loaddev::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const loaddev::ComputationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return rc;
}
