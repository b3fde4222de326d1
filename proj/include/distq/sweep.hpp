#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "distq/artifacts.hpp"
#include "distq/config.hpp"
#include "distq/net.hpp"
#include "distq/quantizer.hpp"
#include "distq/training.hpp"

namespace distq {

struct TrainedSystem {
  QuantizerSpec quantizer;
  Mlp fc;
  TrainingTrace quantizer_trace;
  TrainingTrace fc_trace;
};

// Seed owned by one (snr, K_S) cell.
std::uint64_t cell_seed(std::uint64_t run_seed, double snr_db, std::size_t k_s);

TrainingData make_training_data(const ExperimentConfig& config, const NoiseModel& noise,
                                std::uint64_t seed);

// Stage 1 with K_S sensors, then stage 2 with the configured K_F. When
// trace_dir is set, loss traces and final checkpoints are written there.
TrainedSystem train_system(const ExperimentConfig& config, double snr_db, std::size_t k_s,
                           std::uint64_t seed, const std::string& trace_dir = "");

struct SweepFailure {
  std::string unit;
  std::string category;
  std::string message;
};

struct SweepOutcome {
  std::vector<ResultRow> rows;
  std::vector<SweepFailure> failures;
  std::size_t units_run = 0;
  std::size_t units_skipped = 0;
  ArtifactPaths artifacts;
};

// Runs every (snr, K_S) cell, appending rows to journal_<hash>.csv in the
// output directory. Cells whose rows are already journaled are skipped, so
// an interrupted sweep resumes where it stopped. Failed cells are written to
// failures_<hash>.csv and the sweep continues.
SweepOutcome sweep(const ExperimentConfig& config);

}  // namespace distq
