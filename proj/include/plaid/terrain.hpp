#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plaid/rng.hpp"

namespace plaid {

enum class TerrainKind { flat, incline, steps, slopes, gaps, mixed };

inline constexpr std::array<TerrainKind, 5> kBaseTerrainKinds = {
    TerrainKind::flat, TerrainKind::incline, TerrainKind::steps, TerrainKind::slopes,
    TerrainKind::gaps};

std::string_view to_string(TerrainKind kind);
std::optional<TerrainKind> parse_terrain_kind(std::string_view name);

/// Generator ranges and grid geometry. Units are in the field names.
struct TerrainConfig {
  double length_m = 200.0;
  double grid_m = 0.05;
  std::size_t window_samples = 50;
  std::size_t window_stride_cells = 2;  // 0.1 m between window samples

  double incline_deg_min = 20.0;
  double incline_deg_max = 25.0;
  double step_width_m_min = 1.0;
  double step_width_m_max = 1.5;
  double step_height_m_min = 0.05;
  double step_height_m_max = 0.15;
  double slope_delta_deg_min = -20.0;
  double slope_delta_deg_max = 20.0;
  double slope_limit_deg = 20.0;
  double slope_segment_m = 0.1;
  double gap_width_m_min = 0.25;
  double gap_width_m_max = 0.30;
  double gap_flat_m_min = 2.0;
  double gap_flat_m_max = 2.5;
  double gap_depth_m = 1.0;
  double mixed_segment_m = 5.0;

  double window_spacing_m() const { return grid_m * double(window_stride_cells); }
  double lookahead_m() const { return window_spacing_m() * double(window_samples); }
  void validate() const;
};

/// A rise of `height` located at `x`.
struct StepEdge {
  double x = 0.0;
  double height = 0.0;
};

struct GapInterval {
  double start = 0.0;
  double end = 0.0;
  double width() const { return end - start; }
};

/// Every random draw a generator made, kept for range audits.
struct TerrainDraws {
  std::vector<double> incline_deg;
  std::vector<double> step_widths_m;
  std::vector<double> step_heights_m;
  std::vector<double> slope_deltas_deg;
  std::vector<double> gap_widths_m;
  std::vector<double> gap_flats_m;
  std::vector<TerrainKind> segment_kinds;
  std::vector<std::uint64_t> segment_seeds;
};

/// Heights on a uniform grid starting at x = 0, with per-cell grade (tan of
/// the local slope angle) and the discrete features that trigger failures.
struct Terrain {
  TerrainKind kind = TerrainKind::flat;
  double grid_m = 0.05;
  std::vector<double> heights;  // grid points
  std::vector<double> grade;    // cells, grade[i] spans [x_i, x_{i+1})
  std::vector<StepEdge> edges;
  std::vector<GapInterval> gaps;
  TerrainDraws draws;

  double length_m() const { return grid_m * double(heights.size() - 1); }
  std::size_t cell_of(double x) const;
  double height_at(double x) const { return heights[cell_of(x)]; }
  double grade_at(double x) const;
};

/// Profile of one base kind over [0, length_m], starting at height 0.
Terrain generate_profile(TerrainKind kind, Rng& rng, double length_m, const TerrainConfig& cfg);

/// Full-length terrain. Mixed terrain stitches `mixed_segment_m` segments whose
/// kinds are drawn uniformly from the five base kinds; each segment profile is
/// generated from its own seed (recorded in draws.segment_seeds).
Terrain gen_terrain(TerrainKind kind, Rng& rng, const TerrainConfig& cfg);

/// Heights at x + k * spacing, k = 1..window_samples, relative to the height at
/// x. Samples are read on the grid at cell(x) + k * window_stride_cells.
/// Throws TerminalRegionError past the end of the heightfield.
std::vector<float> terrain_window(const Terrain& terrain, double x, const TerrainConfig& cfg);

/// CSV `x,height`.
std::string terrain_csv(const Terrain& terrain);

}  // namespace plaid
