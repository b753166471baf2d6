#pragma once

// CSV and JSON export.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brslab/brscheck.hpp"
#include "brslab/system.hpp"

namespace brslab::io {

// 64-bit FNV-1a
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const nlohmann::json& cfg) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(cfg.dump());
  return os.str();
}

inline void write_number(std::ostream& os, double v) {
  if (std::isinf(v))
    os << (v > 0 ? "inf" : "-inf");
  else
    os << v;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << std::setprecision(17);
  os << "t";
  const auto dim = tr.states.empty() ? 0 : tr.states.front().size();
  for (Eigen::Index i = 0; i < dim; ++i) os << ",x" << i;
  os << "\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    write_number(os, tr.times[k]);
    for (Eigen::Index i = 0; i < dim; ++i) {
      os << ",";
      write_number(os, tr.states[k][i]);
    }
    os << "\n";
  }
}

inline nlohmann::json trajectory_sidecar(const Trajectory& tr) {
  return {{"t_max", std::isfinite(tr.t_max) ? nlohmann::json(tr.t_max) : nlohmann::json("inf")},
          {"blew_up", tr.blew_up}};
}

// Writes <path> and <path>.json
inline void save_trajectory(const std::filesystem::path& path, const Trajectory& tr) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  write_trajectory_csv(f, tr);
  std::ofstream j(path.string() + ".json");
  if (!j) throw std::runtime_error("cannot open " + path.string() + ".json");
  j << trajectory_sidecar(tr).dump(2) << "\n";
}

inline void write_reach_csv(std::ostream& os, const std::vector<ReachSample>& samples) {
  os << std::setprecision(17) << "t,norm_x,norm_u,norm_phi\n";
  for (const auto& s : samples) {
    write_number(os, s.t);
    os << ",";
    write_number(os, s.norm_x);
    os << ",";
    write_number(os, s.norm_u);
    os << ",";
    write_number(os, s.norm_phi);
    os << "\n";
  }
}

// One row per lift time: t, d*, u*, x*.
inline void write_tdi_csv(std::ostream& os, const TdiSample& s) {
  const auto& tr = s.lift.traj;
  const auto m = s.d.dim();
  const auto n = tr.states.empty() ? 0 : tr.states.front().size();
  os << std::setprecision(17) << "t";
  for (int i = 0; i < m; ++i) os << ",d" << i;
  for (int i = 0; i < m; ++i) os << ",u" << i;
  for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i;
  os << "\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.times[k];
    const Vec d = s.d(t), u = s.lift.u(t);
    write_number(os, t);
    for (int i = 0; i < m; ++i) os << "," << d[i];
    for (int i = 0; i < m; ++i) os << "," << u[i];
    for (Eigen::Index i = 0; i < n; ++i) {
      os << ",";
      write_number(os, tr.states[k][i]);
    }
    os << "\n";
  }
}

// dir/tdi_<index>.csv for each sample.
inline void save_tdi_samples(const std::filesystem::path& dir, const std::vector<TdiSample>& samples) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto path = dir / ("tdi_" + std::to_string(i) + ".csv");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    write_tdi_csv(f, samples[i]);
  }
}

struct LyapunovRow {
  double norm_x, V, W, tail_bound, alpha1, alpha2_plus_C;
};

inline void write_lyapunov_csv(std::ostream& os, const std::vector<LyapunovRow>& rows) {
  os << std::setprecision(17) << "norm_x,V,W,tail_bound,alpha1,alpha2_plus_C\n";
  for (const auto& r : rows)
    os << r.norm_x << "," << r.V << "," << r.W << "," << r.tail_bound << "," << r.alpha1 << "," << r.alpha2_plus_C
       << "\n";
}

}  // namespace brslab::io
