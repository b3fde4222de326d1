#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "distq/model.hpp"
#include "distq/quantizer.hpp"
#include "distq/training.hpp"

namespace distq {

inline constexpr int kConfigVersion = 1;

// Versioned JSON experiment description. Unknown keys are rejected.
struct ExperimentConfig {
  std::string prior_kind = "uniform";
  double prior_low = -1.0;
  double prior_high = 1.0;
  double observation_bound = 3.0;

  Scheme scheme = Scheme::binary();
  std::vector<std::size_t> quantizer_hidden{20, 20, 20};
  std::vector<std::size_t> fc_hidden{30, 30, 30};

  std::size_t samples = 10000;
  std::size_t observations_per_sample = 20;
  std::size_t grid_half_count = 150;

  TrainingConfig quantizer_training;
  TrainingConfig fc_training;

  // Sweep axes. snr_db may hold +infinity for the noiseless case.
  std::vector<std::size_t> k_eval{10, 50, 100, 250};
  std::vector<std::size_t> k_s{50};
  std::vector<double> snr_db{std::numeric_limits<double>::infinity()};
  std::vector<std::string> methods{"proposed", "sqmlf", "pcrlb"};

  std::size_t n_test_trials = 10000;
  std::uint64_t seed = 1;
  std::string output_dir = "distq-out";
  std::size_t workers = 1;

  // Optional pre-trained checkpoints used by bound/simulate.
  std::string quantizer_checkpoint;
  std::string fc_checkpoint;

  PriorModel prior() const;
  NoiseModel noise(double snr_db) const;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

// FNV-1a over the canonical JSON encoding, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::string format_snr(double snr_db);
double parse_snr(const std::string& text);

}  // namespace distq
