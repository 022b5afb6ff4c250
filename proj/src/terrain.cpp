#include "plaid/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plaid/csv.hpp"
#include "plaid/error.hpp"

namespace plaid {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::size_t cells_for(double length_m, double grid_m) {
  return static_cast<std::size_t>(std::llround(length_m / grid_m));
}

Terrain blank(TerrainKind kind, double length_m, double grid_m) {
  Terrain t;
  t.kind = kind;
  t.grid_m = grid_m;
  const auto cells = cells_for(length_m, grid_m);
  t.heights.assign(cells + 1, 0.0);
  t.grade.assign(cells, 0.0);
  return t;
}

void fill_incline(Terrain& t, Rng& rng, const TerrainConfig& cfg) {
  const double deg = uniform(rng, cfg.incline_deg_min, cfg.incline_deg_max);
  t.draws.incline_deg.push_back(deg);
  const double g = std::tan(deg * kDegToRad);
  for (std::size_t i = 0; i < t.heights.size(); ++i) t.heights[i] = double(i) * t.grid_m * g;
  for (auto& v : t.grade) v = g;
}

void fill_steps(Terrain& t, Rng& rng, const TerrainConfig& cfg) {
  const double length = t.length_m();
  double pos = 0.0;
  for (;;) {
    const double width = uniform(rng, cfg.step_width_m_min, cfg.step_width_m_max);
    t.draws.step_widths_m.push_back(width);
    pos += width;
    if (pos >= length) break;
    const double height = uniform(rng, cfg.step_height_m_min, cfg.step_height_m_max);
    t.draws.step_heights_m.push_back(height);
    t.edges.push_back({pos, height});
  }
  double level = 0.0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < t.heights.size(); ++i) {
    const double x = double(i) * t.grid_m;
    while (next < t.edges.size() && t.edges[next].x <= x) level += t.edges[next++].height;
    t.heights[i] = level;
  }
}

void fill_slopes(Terrain& t, Rng& rng, const TerrainConfig& cfg) {
  const auto seg_cells = std::max<std::size_t>(1, cells_for(cfg.slope_segment_m, t.grid_m));
  double angle = 0.0;
  double g = 0.0;
  for (std::size_t i = 0; i < t.grade.size(); ++i) {
    if (i % seg_cells == 0) {
      const double delta = uniform(rng, cfg.slope_delta_deg_min, cfg.slope_delta_deg_max);
      t.draws.slope_deltas_deg.push_back(delta);
      angle = std::clamp(angle + delta, -cfg.slope_limit_deg, cfg.slope_limit_deg);
      g = std::tan(angle * kDegToRad);
    }
    t.grade[i] = g;
    t.heights[i + 1] = t.heights[i] + t.grid_m * g;
  }
}

void fill_gaps(Terrain& t, Rng& rng, const TerrainConfig& cfg) {
  const double length = t.length_m();
  double pos = 0.0;
  for (;;) {
    const double flat = uniform(rng, cfg.gap_flat_m_min, cfg.gap_flat_m_max);
    t.draws.gap_flats_m.push_back(flat);
    pos += flat;
    if (pos >= length) break;
    const double width = uniform(rng, cfg.gap_width_m_min, cfg.gap_width_m_max);
    t.draws.gap_widths_m.push_back(width);
    if (pos + width > length) break;
    t.gaps.push_back({pos, pos + width});
    pos += width;
  }
  for (const auto& gap : t.gaps) {
    auto i = static_cast<std::size_t>(std::floor(gap.start / t.grid_m));
    for (; i < t.heights.size(); ++i) {
      const double x = double(i) * t.grid_m;
      if (x >= gap.end) break;
      if (x > gap.start) t.heights[i] = -cfg.gap_depth_m;
    }
  }
}

void append(std::vector<double>& dst, const std::vector<double>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

std::string_view to_string(TerrainKind kind) {
  switch (kind) {
    case TerrainKind::flat: return "flat";
    case TerrainKind::incline: return "incline";
    case TerrainKind::steps: return "steps";
    case TerrainKind::slopes: return "slopes";
    case TerrainKind::gaps: return "gaps";
    case TerrainKind::mixed: return "mixed";
  }
  return "unknown";
}

std::optional<TerrainKind> parse_terrain_kind(std::string_view name) {
  for (auto kind : {TerrainKind::flat, TerrainKind::incline, TerrainKind::steps,
                    TerrainKind::slopes, TerrainKind::gaps, TerrainKind::mixed}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

void TerrainConfig::validate() const {
  auto range = [](double lo, double hi, const char* what) {
    if (!(lo <= hi)) throw ConfigError(std::string("terrain range ") + what + " has min > max");
  };
  if (!(grid_m > 0.0) || !(length_m > grid_m)) throw ConfigError("terrain grid/length must be positive");
  if (window_samples < 1 || window_stride_cells < 1) throw ConfigError("terrain window must be non-empty");
  range(incline_deg_min, incline_deg_max, "incline_deg");
  range(step_width_m_min, step_width_m_max, "step_width_m");
  range(step_height_m_min, step_height_m_max, "step_height_m");
  range(slope_delta_deg_min, slope_delta_deg_max, "slope_delta_deg");
  range(gap_width_m_min, gap_width_m_max, "gap_width_m");
  range(gap_flat_m_min, gap_flat_m_max, "gap_flat_m");
  if (!(step_width_m_min > 0.0) || !(gap_flat_m_min > 0.0) || !(gap_width_m_min > 0.0)) {
    throw ConfigError("terrain segment widths must be positive");
  }
  if (!(slope_segment_m > 0.0) || !(mixed_segment_m > 0.0)) {
    throw ConfigError("terrain segment lengths must be positive");
  }
}

std::size_t Terrain::cell_of(double x) const {
  if (!(x >= 0.0)) return 0;
  const auto i = static_cast<std::size_t>(std::floor(x / grid_m));
  return std::min(i, heights.size() - 1);
}

double Terrain::grade_at(double x) const {
  if (grade.empty()) return 0.0;
  return grade[std::min(cell_of(x), grade.size() - 1)];
}

Terrain generate_profile(TerrainKind kind, Rng& rng, double length_m, const TerrainConfig& cfg) {
  Terrain t = blank(kind, length_m, cfg.grid_m);
  switch (kind) {
    case TerrainKind::flat: break;
    case TerrainKind::incline: fill_incline(t, rng, cfg); break;
    case TerrainKind::steps: fill_steps(t, rng, cfg); break;
    case TerrainKind::slopes: fill_slopes(t, rng, cfg); break;
    case TerrainKind::gaps: fill_gaps(t, rng, cfg); break;
    case TerrainKind::mixed: throw ConfigError("mixed is not a base terrain profile");
  }
  return t;
}

Terrain gen_terrain(TerrainKind kind, Rng& rng, const TerrainConfig& cfg) {
  if (kind != TerrainKind::mixed) return generate_profile(kind, rng, cfg.length_m, cfg);

  Terrain t = blank(kind, cfg.length_m, cfg.grid_m);
  const std::size_t total_cells = t.grade.size();
  const std::size_t seg_cells = std::max<std::size_t>(1, cells_for(cfg.mixed_segment_m, cfg.grid_m));
  std::uniform_int_distribution<std::size_t> pick(0, kBaseTerrainKinds.size() - 1);
  for (std::size_t start = 0; start < total_cells; start += seg_cells) {
    const std::size_t cells = std::min(seg_cells, total_cells - start);
    const std::uint64_t seed = rng();
    const TerrainKind seg_kind = kBaseTerrainKinds[pick(rng)];
    t.draws.segment_seeds.push_back(seed);
    t.draws.segment_kinds.push_back(seg_kind);

    Rng seg_rng = make_rng(seed);
    const Terrain seg = generate_profile(seg_kind, seg_rng, double(cells) * cfg.grid_m, cfg);
    const double offset = t.heights[start];
    const double x0 = double(start) * cfg.grid_m;
    for (std::size_t i = 0; i <= cells; ++i) t.heights[start + i] = offset + seg.heights[i];
    for (std::size_t i = 0; i < cells; ++i) t.grade[start + i] = seg.grade[i];
    for (auto e : seg.edges) t.edges.push_back({x0 + e.x, e.height});
    for (auto g : seg.gaps) t.gaps.push_back({x0 + g.start, x0 + g.end});
    append(t.draws.incline_deg, seg.draws.incline_deg);
    append(t.draws.step_widths_m, seg.draws.step_widths_m);
    append(t.draws.step_heights_m, seg.draws.step_heights_m);
    append(t.draws.slope_deltas_deg, seg.draws.slope_deltas_deg);
    append(t.draws.gap_widths_m, seg.draws.gap_widths_m);
    append(t.draws.gap_flats_m, seg.draws.gap_flats_m);
  }
  return t;
}

std::vector<float> terrain_window(const Terrain& terrain, double x, const TerrainConfig& cfg) {
  const std::size_t i0 = terrain.cell_of(x);
  const std::size_t last = i0 + cfg.window_samples * cfg.window_stride_cells;
  if (x < 0.0 || last >= terrain.heights.size()) {
    throw TerminalRegionError("terrain window at x=" + std::to_string(x) + " runs past the terrain end (" +
                              std::to_string(terrain.length_m()) + " m)");
  }
  std::vector<float> out(cfg.window_samples);
  const double base = terrain.heights[i0];
  for (std::size_t k = 1; k <= cfg.window_samples; ++k) {
    out[k - 1] = static_cast<float>(terrain.heights[i0 + k * cfg.window_stride_cells] - base);
  }
  return out;
}

std::string terrain_csv(const Terrain& terrain) {
  CsvWriter csv{"x", "height"};
  for (std::size_t i = 0; i < terrain.heights.size(); ++i) {
    csv.cell(double(i) * terrain.grid_m).cell(terrain.heights[i]).end_row();
  }
  return csv.str();
}

}  // namespace plaid
