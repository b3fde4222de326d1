#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "distq/law.hpp"
#include "distq/model.hpp"
#include "distq/net.hpp"
#include "distq/quantizer.hpp"

namespace distq {

enum class Regime { d1_empirical, d2_grid };

std::string regime_name(Regime regime);
Regime regime_from_name(const std::string& name);

struct TrainingConfig {
  std::size_t sensors = 50;
  std::size_t batch_size = 100;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  Regime regime = Regime::d1_empirical;
  double gamma_floor = 1e-9;
  // Optional outputs; empty strings disable them.
  std::string trace_csv;
  std::string checkpoint_dir;
  std::size_t checkpoint_every = 0;
};

// Known-noise regime: parameter samples plus the artificial observation grid.
struct GridData {
  std::vector<double> thetas;
  ObservationGrid grid;
  NoiseModel noise;
};

using TrainingData = std::variant<DatasetD1, GridData>;

std::size_t training_size(const TrainingData& data);

// Loss of a batch on a fused-statistic support:
//   sum_t theta_t^2 - sum_s (sum_t theta_t w_ts)^2 / sum_t w_ts,
// with w_ts = p(s | gamma_t). Gammas are row-major B x dim.
struct QuantizerLoss {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d gamma, same layout as the input
  bool dead = false;         // every gamma sits on a clamp boundary
};

QuantizerLoss quantizer_loss(const FusedSupport& support, std::span<const double> thetas,
                             std::span<const double> gammas, double gamma_floor = kGammaClamp);

// sum_t sum_s w_ts (theta_t - F(s))^2 and its gradient w.r.t. the FC parameters.
struct FcLoss {
  double loss = 0.0;
  std::vector<double> grad;
};

FcLoss fc_loss(const FusedSupport& support, std::span<const double> thetas,
               std::span<const double> gammas, const Mlp& fc_net);

// Computes gamma for training samples and pushes d loss / d gamma back into
// controller parameters.
class GammaSource {
 public:
  explicit GammaSource(const TrainingData& data) : data_(&data) {}

  std::size_t size() const { return training_size(*data_); }
  double theta(std::size_t index) const;

  // Row-major |indices| x dim, clamped to [floor, 1 - floor] (one-hot: [floor, 1]).
  std::vector<double> gammas(const QuantizerSpec& spec, std::span<const std::size_t> indices,
                             double floor) const;
  // Accumulates parameter gradients, one buffer per controller. Components
  // that were clamped pass no gradient.
  void backprop(const QuantizerSpec& spec, std::span<const std::size_t> indices,
                std::span<const double> gammas, std::span<const double> dgamma, double floor,
                std::vector<std::vector<double>>& param_grads) const;

 private:
  const TrainingData* data_;
};

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  double wall_time = 0.0;
};

struct TrainingTrace {
  // Loss of the whole training set divided by its size, once before training
  // and after every epoch.
  std::vector<double> epoch_loss;
  std::vector<BatchRecord> batches;
  bool dead_controller = false;
};

struct QuantizerTraining {
  QuantizerSpec spec;
  TrainingTrace trace;
};

struct FcTraining {
  Mlp fc;
  TrainingTrace trace;
};

QuantizerTraining train_quantizer(const TrainingConfig& config, const TrainingData& data,
                                  QuantizerSpec spec);
FcTraining train_fc(const TrainingConfig& config, const TrainingData& data,
                    const QuantizerSpec& frozen_spec, Mlp fc_net);

// FC network for a scheme: input width 1, M or 2^M, tanh head.
Mlp make_fc_network(const Scheme& scheme, const std::vector<std::size_t>& hidden,
                    std::uint64_t seed);

void write_trace_csv(const std::string& path, const TrainingTrace& trace);

// Checkpoints: {"format":"distq-quantizer"} holds one network per controller;
// {"format":"distq-estimator"} wraps an FC network with its fusion scheme.
nlohmann::json quantizer_to_json(const QuantizerSpec& spec, std::uint64_t seed);
QuantizerSpec quantizer_from_json(const nlohmann::json& doc);
nlohmann::json estimator_to_json(const Mlp& fc_net, const Scheme& scheme, std::uint64_t seed);
Mlp estimator_from_json(const nlohmann::json& doc, Scheme* scheme = nullptr);

}  // namespace distq
