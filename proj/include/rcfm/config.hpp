#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rcfm/base_dynamics.hpp"
#include "rcfm/dimension.hpp"
#include "rcfm/interval_maps.hpp"
#include "rcfm/pressure.hpp"

namespace rcfm {

struct FamilyConfig {
  std::string kind = "example";  // example | cookie_cutter
  double a = 0.2;
  double b = 0.8;
  std::vector<CriticalBlock> blocks{{0.35, 0.65, 0}};
  std::pair<double, double> omega_range{3.2, 6.0};
  std::vector<AffinePiece> intervals;  // cookie_cutter only

  bool operator==(const FamilyConfig&) const = default;
};

struct AlphabetEntry {
  double param;
  double prob;

  bool operator==(const AlphabetEntry&) const = default;
};

struct BaseConfig {
  std::string kind = "dirac";  // dirac | rotation | bernoulli
  double param = 3.5;
  double alpha = 0.6180339887498949;
  std::pair<double, double> param_range{3.2, 6.0};
  std::vector<AlphabetEntry> alphabet;
  std::uint64_t seed = 1;

  bool operator==(const BaseConfig&) const = default;
};

struct NumericsConfig {
  int bins = 4096;
  double grade = 1.0 / 32;
  int burn_in = 240;
  int n_birkhoff = 50;
  int n_samples = 4;
  double tol = 1e-8;
  std::vector<int> k_schedule{5, 10, 20, 40, 60};
  int k_max = 60;
  double bisection_tol = 2e-3;
  std::vector<double> t_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
  double t = 1.0;
  int n_out = 50;
  int residual_depth = 3;
  bool dump_measures = false;
  int cylinder_depth = 6;
  std::vector<double> eps_schedule{1e-2, 1e-3, 1e-4};
  std::vector<int> n_iter_schedule{10, 15, 20};
  std::vector<double> delta_grid = geometric_deltas(2.0, 6, 14);
  int n_omega = 8;
  int max_depth = 400;
  std::uint64_t leaf_cap = 10'000'000;
  double dim_tolerance = 0.05;
  double eta = 0.05;
  int chi0_samples = 4096;
  int validate_grid = 1000;
  double validate_tol = 1e-8;

  bool operator==(const NumericsConfig&) const = default;
};

struct ExperimentConfig {
  FamilyConfig family;
  BaseConfig base;
  NumericsConfig numerics;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys and out-of-range values throw ConfigError
/// naming the dotted key. Missing keys take the defaults above.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

/// Applies "a.b.c=value" to a config document; value is read as JSON when
/// it parses, as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

RandomFamily make_family(const FamilyConfig& f);
BaseSystem make_base(const BaseConfig& b);
SolverConfig make_solver_config(const NumericsConfig& n, int threads);
DimensionConfig make_dimension_config(const NumericsConfig& n);

}  // namespace rcfm
