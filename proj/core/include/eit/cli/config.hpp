#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eit/experiments.hpp"
#include "eit/forward.hpp"
#include "eit/geometry.hpp"

namespace eit::cli {

struct DomainConfig {
  double r0 = 0.75;
  int regions = 2;
  Layout layout = Layout::EqualSectors;
  int rings = 1;
  int sectors_per_ring = 1;
};

struct MeshConfig {
  double target_h = 0.05;
};

struct ElectrodeConfig {
  int count = 16;
  double coverage = 1.0;
};

struct ModelConfig {
  double gamma_min = 0.5;
  double gamma_max = 4.0;
  std::vector<double> theta0;
};

struct PriorConfig {
  std::string kind = "uniform";  // or "truncated-gaussian"
  std::vector<double> mean;
  std::vector<double> sd;
};

struct McmcConfig {
  int iters = 10000;
  int burnin = 2000;
  int thin = 1;
  std::vector<double> step;  // empty: 10% of the box width
  bool adapt = true;
  std::string proposal = "laplace";  // or "fixed"
};

struct ExperimentSection {
  std::size_t n = 2000;
  std::vector<std::size_t> n_grid{250, 1000, 4000};
  int replicates = 50;
  double alpha = 0.1;
};

struct ExperimentConfig {
  DomainConfig domain;
  MeshConfig mesh;
  ElectrodeConfig electrodes;
  ModelConfig model;
  PriorConfig prior;
  McmcConfig mcmc;
  ExperimentSection experiment;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  void validate() const;  // throws ConfigError

  PartitionSpec partition_spec() const;
  ParameterBox box() const;
  Theta theta0() const;
  PosteriorSettings posterior_settings() const;
  // Mesh with boundary vertex count a multiple of 4 M, electrodes, model.
  ForwardModel build_model() const;
};

// Strict: unknown keys and violated constraints raise ConfigError naming
// the offending key.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(const std::string& json_text);

// Canonical JSON with every field spelled out (defaults included).
std::string to_json(const ExperimentConfig& config, int indent = 2);
// Hex FNV-1a digest of the compact canonical JSON.
std::string config_hash(const ExperimentConfig& config);

}  // namespace eit::cli
