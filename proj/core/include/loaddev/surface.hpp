#pragma once

#include <span>
#include <string>
#include <vector>

namespace loaddev::surface {

struct SurfaceCell {
  double mean_radius = 0.0;
  int n = 0;
  bool occupied = false;
};

/// Mean radius per (seating depth, powder charge) cell.  Rows follow
/// sd_levels, columns pc_levels.  Cells built by cell_means carry their shot
/// count; grids imported from the dense matrix format carry n = 0 (the
/// format stores values only).
struct SurfaceGrid {
  std::vector<double> sd_levels;
  std::vector<double> pc_levels;
  std::vector<SurfaceCell> cells;  // row-major, sd index major

  SurfaceCell& cell(std::size_t sd, std::size_t pc) { return cells[sd * pc_levels.size() + pc]; }
  const SurfaceCell& cell(std::size_t sd, std::size_t pc) const {
    return cells[sd * pc_levels.size() + pc];
  }
};

/// One shot tagged with its factor levels.
struct LeveledShot {
  double sd = 0.0;
  double pc = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Group the shots by cell, compute each occupied cell's center and mean
/// radius independently.  A shot whose levels are not on the grid is an
/// error; empty cells are simply left unoccupied.
SurfaceGrid cell_means(std::span<const LeveledShot> shots, std::vector<double> sd_levels,
                       std::vector<double> pc_levels);

struct RankEntry {
  double sd = 0.0;
  double pc = 0.0;
  double mean_radius = 0.0;
  int n = 0;
  int rank = 0;  // 1-based
};

/// Occupied cells sorted by ascending mean radius; ties break toward lower
/// powder charge, then lower seating depth.  Errors if no cell is occupied.
std::vector<RankEntry> rank_levels(const SurfaceGrid& grid);

enum class SurfaceFormat {
  long_csv,   // rows (seating_depth, powder_charge, mean_radius, n), occupied cells only
  dense_csv,  // seating-depth rows x powder-charge columns, blanks for empty cells
};

std::string export_surface(const SurfaceGrid& grid, SurfaceFormat format);
SurfaceGrid import_surface(const std::string& text, SurfaceFormat format);

/// Long-form export on a grid refined `subdivisions`-fold between adjacent
/// levels, bilinearly interpolated from the surrounding occupied cells.
/// Derived data for plotting; points next to an empty cell are skipped.
std::string export_surface_interpolated(const SurfaceGrid& grid, int subdivisions);

}  // namespace loaddev::surface
