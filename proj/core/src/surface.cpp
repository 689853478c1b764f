#include "loaddev/surface.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <tuple>
#include <vector>

#include "loaddev/csv.hpp"
#include "loaddev/errors.hpp"
#include "loaddev/groupstats.hpp"

namespace loaddev::surface {

namespace {

// Exact match first, then a 1e-9 relative-tolerance fallback so values that
// went through a text round trip still land on their level.
std::size_t level_index(double value, const std::vector<double>& levels, const char* what) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == value) return i;
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    double scale = std::max(std::abs(levels[i]), std::abs(value));
    if (std::abs(levels[i] - value) <= 1e-9 * scale) return i;
  }
  throw ValidationError(std::string(what) + " value " + csv::format_double(value) +
                        " is not a grid level");
}

void check_levels(const std::vector<double>& levels, const char* what) {
  if (levels.empty()) throw ValidationError(std::string(what) + " levels are empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!std::isfinite(levels[i]))
      throw ValidationError(std::string(what) + " level is not finite");
    if (i > 0 && levels[i] <= levels[i - 1])
      throw ValidationError(std::string(what) + " levels must be strictly increasing");
  }
}

}  // namespace

SurfaceGrid cell_means(std::span<const LeveledShot> shots, std::vector<double> sd_levels,
                       std::vector<double> pc_levels) {
  check_levels(sd_levels, "seating depth");
  check_levels(pc_levels, "powder charge");

  SurfaceGrid grid;
  grid.sd_levels = std::move(sd_levels);
  grid.pc_levels = std::move(pc_levels);
  grid.cells.assign(grid.sd_levels.size() * grid.pc_levels.size(), SurfaceCell{});

  std::vector<std::vector<groupstats::ImpactPoint>> buckets(grid.cells.size());
  for (const LeveledShot& s : shots) {
    std::size_t i = level_index(s.sd, grid.sd_levels, "seating depth");
    std::size_t j = level_index(s.pc, grid.pc_levels, "powder charge");
    buckets[i * grid.pc_levels.size() + j].push_back({s.x, s.y});
  }

  for (std::size_t k = 0; k < buckets.size(); ++k) {
    if (buckets[k].empty()) continue;
    SurfaceCell& cell = grid.cells[k];
    cell.occupied = true;
    cell.n = static_cast<int>(buckets[k].size());
    cell.mean_radius = groupstats::mean_radius(buckets[k]);
  }
  return grid;
}

std::vector<RankEntry> rank_levels(const SurfaceGrid& grid) {
  std::vector<RankEntry> out;
  for (std::size_t i = 0; i < grid.sd_levels.size(); ++i) {
    for (std::size_t j = 0; j < grid.pc_levels.size(); ++j) {
      const SurfaceCell& cell = grid.cell(i, j);
      if (!cell.occupied) continue;
      out.push_back({grid.sd_levels[i], grid.pc_levels[j], cell.mean_radius, cell.n, 0});
    }
  }
  if (out.empty()) throw ValidationError("surface has no occupied cells to rank");
  std::sort(out.begin(), out.end(), [](const RankEntry& a, const RankEntry& b) {
    return std::tie(a.mean_radius, a.pc, a.sd) < std::tie(b.mean_radius, b.pc, b.sd);
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
  return out;
}

std::string export_surface(const SurfaceGrid& grid, SurfaceFormat format) {
  std::ostringstream os;
  if (format == SurfaceFormat::long_csv) {
    os << "seating_depth,powder_charge,mean_radius,n\n";
    for (std::size_t i = 0; i < grid.sd_levels.size(); ++i) {
      for (std::size_t j = 0; j < grid.pc_levels.size(); ++j) {
        const SurfaceCell& cell = grid.cell(i, j);
        if (!cell.occupied) continue;
        os << csv::format_double(grid.sd_levels[i]) << ',' << csv::format_double(grid.pc_levels[j])
           << ',' << csv::format_double(cell.mean_radius) << ',' << cell.n << '\n';
      }
    }
    return os.str();
  }

  os << "seating_depth\\powder_charge";
  for (double pc : grid.pc_levels) os << ',' << csv::format_double(pc);
  os << '\n';
  for (std::size_t i = 0; i < grid.sd_levels.size(); ++i) {
    os << csv::format_double(grid.sd_levels[i]);
    for (std::size_t j = 0; j < grid.pc_levels.size(); ++j) {
      const SurfaceCell& cell = grid.cell(i, j);
      os << ',';
      if (cell.occupied) os << csv::format_double(cell.mean_radius);
    }
    os << '\n';
  }
  return os.str();
}

SurfaceGrid import_surface(const std::string& text, SurfaceFormat format) {
  csv::Table table = csv::parse(text, "surface");
  SurfaceGrid grid;

  if (format == SurfaceFormat::long_csv) {
    std::size_t c_sd = table.require_column("seating_depth", "surface");
    std::size_t c_pc = table.require_column("powder_charge", "surface");
    std::size_t c_mr = table.require_column("mean_radius", "surface");
    std::size_t c_n = table.require_column("n", "surface");

    std::vector<double> sds, pcs;
    for (const auto& row : table.rows) {
      double sd = csv::parse_double(row[c_sd], "seating_depth");
      double pc = csv::parse_double(row[c_pc], "powder_charge");
      if (std::find(sds.begin(), sds.end(), sd) == sds.end()) sds.push_back(sd);
      if (std::find(pcs.begin(), pcs.end(), pc) == pcs.end()) pcs.push_back(pc);
    }
    std::sort(sds.begin(), sds.end());
    std::sort(pcs.begin(), pcs.end());

    grid.sd_levels = std::move(sds);
    grid.pc_levels = std::move(pcs);
    grid.cells.assign(grid.sd_levels.size() * grid.pc_levels.size(), SurfaceCell{});
    for (const auto& row : table.rows) {
      std::size_t i =
          level_index(csv::parse_double(row[c_sd], "seating_depth"), grid.sd_levels, "seating depth");
      std::size_t j =
          level_index(csv::parse_double(row[c_pc], "powder_charge"), grid.pc_levels, "powder charge");
      SurfaceCell& cell = grid.cell(i, j);
      if (cell.occupied) throw ValidationError("surface has duplicate cell rows");
      cell.occupied = true;
      cell.mean_radius = csv::parse_double(row[c_mr], "mean_radius");
      cell.n = static_cast<int>(csv::parse_long(row[c_n], "n"));
      if (cell.n < 0) throw ValidationError("surface cell has negative n");
    }
    return grid;
  }

  if (table.header.empty() || table.header[0] != "seating_depth\\powder_charge")
    throw ValidationError("dense surface must start with a seating_depth\\powder_charge header");
  for (std::size_t j = 1; j < table.header.size(); ++j)
    grid.pc_levels.push_back(csv::parse_double(table.header[j], "powder_charge"));
  for (const auto& row : table.rows)
    grid.sd_levels.push_back(csv::parse_double(row[0], "seating_depth"));
  check_levels(grid.sd_levels, "seating depth");
  check_levels(grid.pc_levels, "powder charge");

  grid.cells.assign(grid.sd_levels.size() * grid.pc_levels.size(), SurfaceCell{});
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t j = 1; j < table.header.size(); ++j) {
      const std::string& cell_text = table.rows[i][j];
      if (cell_text.empty()) continue;
      SurfaceCell& cell = grid.cell(i, j - 1);
      cell.occupied = true;
      cell.mean_radius = csv::parse_double(cell_text, "mean_radius");
      cell.n = 0;  // the dense format does not carry counts
    }
  }
  return grid;
}

std::string export_surface_interpolated(const SurfaceGrid& grid, int subdivisions) {
  if (subdivisions < 1) throw ValidationError("subdivisions must be at least 1");
  if (grid.sd_levels.size() < 2 || grid.pc_levels.size() < 2)
    throw ValidationError("interpolation needs at least a 2x2 grid");

  std::ostringstream os;
  os << "seating_depth,powder_charge,mean_radius\n";
  for (std::size_t i = 0; i + 1 < grid.sd_levels.size(); ++i) {
    bool last_sd_band = (i + 2 == grid.sd_levels.size());
    for (std::size_t j = 0; j + 1 < grid.pc_levels.size(); ++j) {
      if (!grid.cell(i, j).occupied || !grid.cell(i, j + 1).occupied ||
          !grid.cell(i + 1, j).occupied || !grid.cell(i + 1, j + 1).occupied)
        continue;
      bool last_pc_band = (j + 2 == grid.pc_levels.size());
      int si_max = last_sd_band ? subdivisions : subdivisions - 1;
      int sj_max = last_pc_band ? subdivisions : subdivisions - 1;
      for (int si = 0; si <= si_max; ++si) {
        double u = static_cast<double>(si) / subdivisions;
        double sd = grid.sd_levels[i] + u * (grid.sd_levels[i + 1] - grid.sd_levels[i]);
        for (int sj = 0; sj <= sj_max; ++sj) {
          double v = static_cast<double>(sj) / subdivisions;
          double pc = grid.pc_levels[j] + v * (grid.pc_levels[j + 1] - grid.pc_levels[j]);
          double mr = (1 - u) * (1 - v) * grid.cell(i, j).mean_radius +
                      (1 - u) * v * grid.cell(i, j + 1).mean_radius +
                      u * (1 - v) * grid.cell(i + 1, j).mean_radius +
                      u * v * grid.cell(i + 1, j + 1).mean_radius;
          os << csv::format_double(sd) << ',' << csv::format_double(pc) << ','
             << csv::format_double(mr) << '\n';
        }
      }
    }
  }
  return os.str();
}

}  // namespace loaddev::surface
