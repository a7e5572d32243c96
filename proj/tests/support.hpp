#pragma once

// Helpers shared by the unit suites and the acceptance runner: shipped config
// lookup, hand-rolled random generators, and a brute-force landscape oracle
// that classifies a cell from dense energy samples alone.

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include "magceptor/designer.hpp"
#include "magceptor/landscape.hpp"

namespace magceptor::testing {

inline std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(MAGCEPTOR_CONFIG_DIR) / name;
}

inline bool rel_close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Vec3 v(g(rng), g(rng), g(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

inline Vec3 random_point(std::mt19937_64& rng, double half_width) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  return Vec3(u(rng), u(rng), u(rng));
}

enum class OracleEntry { kDrive, kAnchor, kWeak };

struct OracleCell {
  OracleEntry entry = OracleEntry::kWeak;
  double peak = 0.0;       // largest outward slope force, N
  double min_rise = 0.0;   // smallest dU/dx over the stroke, N
};

// Drive: energy falls strictly (beyond friction) across every sample gap.
// Anchor: energy rises across every gap by at least anchor_min per metre.
inline OracleCell dense_cell(const Topology& t, const std::string& unit, const FieldKey& key,
                             const Thresholds& th, int n = 10001) {
  const auto ev = make_evaluator(t, unit, key);
  const auto& tr = ev->track();
  const double friction = t.unit(unit).track.friction_force;
  const double h = (tr.x_out - tr.x_in) / (n - 1);
  double prev = ev->energy(tr.x_in);
  double max_rise = -std::numeric_limits<double>::infinity();
  double min_rise = std::numeric_limits<double>::infinity();
  for (int i = 1; i < n; ++i) {
    const double x = i + 1 == n ? tr.x_out : tr.x_in + i * h;
    const double u = ev->energy(x);
    const double rise = (u - prev) / h;
    max_rise = std::max(max_rise, rise);
    min_rise = std::min(min_rise, rise);
    prev = u;
  }
  OracleCell c;
  c.peak = -min_rise;
  c.min_rise = min_rise;
  if (max_rise < -friction) c.entry = OracleEntry::kDrive;
  else if (min_rise > 0.0 && min_rise >= th.anchor_min) c.entry = OracleEntry::kAnchor;
  return c;
}

// Every unit has a key that drives it past drive_min and anchors all others.
inline bool dense_pass(const Topology& t, const Thresholds& th, int n = 10001) {
  std::vector<std::vector<OracleCell>> cells;
  for (const auto& k : t.keys) {
    std::vector<OracleCell> row;
    for (const auto& u : t.units) row.push_back(dense_cell(t, u.id, k, th, n));
    cells.push_back(std::move(row));
  }
  if (t.units.empty()) return false;
  for (std::size_t col = 0; col < t.units.size(); ++col) {
    bool found = false;
    for (const auto& row : cells) {
      bool ok = row[col].entry == OracleEntry::kDrive && row[col].peak >= th.drive_min;
      for (std::size_t c = 0; ok && c < row.size(); ++c) {
        if (c != col && row[c].entry != OracleEntry::kAnchor) ok = false;
      }
      if (ok) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

inline OracleEntry to_oracle(Entry e) {
  switch (e) {
    case Entry::kDrive: return OracleEntry::kDrive;
    case Entry::kAnchor: return OracleEntry::kAnchor;
    case Entry::kWeak: break;
  }
  return OracleEntry::kWeak;
}

}  // namespace magceptor::testing
