#include "distq/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "distq/error.hpp"
#include "distq/fusion.hpp"

namespace distq {

namespace {

constexpr double kLogWeightCutoff = -60.0;

bool on_boundary(double g, double floor) { return g <= floor || g >= 1.0 - floor; }

QuantizerLoss quantizer_loss_impl(const FusedSupport& support, std::span<const double> thetas,
                                  std::span<const double> gammas, double floor, bool want_grad) {
  const std::size_t B = thetas.size();
  const std::size_t dim = support.dim();
  const std::size_t S = support.size();
  require(gammas.size() == B * dim, ErrorCategory::contract,
          "quantizer_loss: gamma block does not match batch x dim");
  QuantizerLoss out;
  std::vector<double> lw(B * S);
  std::vector<double> N(S, 0.0), D(S, 0.0);
  double theta_sq = 0.0;
  out.dead = B > 0;
  for (std::size_t t = 0; t < B; ++t) {
    const auto g = gammas.subspan(t * dim, dim);
    for (double v : g) out.dead = out.dead && on_boundary(v, floor);
    std::span<double> row(lw.data() + t * S, S);
    support.log_weights(g, row);
    theta_sq += thetas[t] * thetas[t];
    for (std::size_t s = 0; s < S; ++s) {
      if (row[s] < kLogWeightCutoff) continue;
      const double w = std::exp(row[s]);
      N[s] += thetas[t] * w;
      D[s] += w;
    }
  }
  double explained = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (D[s] > 0.0) explained += N[s] * N[s] / D[s];
  }
  out.loss = theta_sq - explained;
  if (!want_grad) return out;

  out.grad.assign(B * dim, 0.0);
  std::vector<double> dlog(dim);
  for (std::size_t t = 0; t < B; ++t) {
    const auto g = gammas.subspan(t * dim, dim);
    for (std::size_t s = 0; s < S; ++s) {
      const double l = lw[t * S + s];
      if (l < kLogWeightCutoff || D[s] <= 0.0) continue;
      const double r = N[s] / D[s];
      const double dw = -r * (2.0 * thetas[t] - r) * std::exp(l);
      support.dlog_weight(s, g, dlog);
      for (std::size_t c = 0; c < dim; ++c) out.grad[t * dim + c] += dw * dlog[c];
    }
  }
  return out;
}

struct FcAccumulators {
  std::vector<double> N, D, Q;
};

FcAccumulators accumulate_fc(const FusedSupport& support, std::span<const double> thetas,
                             std::span<const double> gammas) {
  const std::size_t B = thetas.size();
  const std::size_t dim = support.dim();
  const std::size_t S = support.size();
  require(gammas.size() == B * dim, ErrorCategory::contract,
          "fc_loss: gamma block does not match batch x dim");
  FcAccumulators acc{std::vector<double>(S, 0.0), std::vector<double>(S, 0.0),
                     std::vector<double>(S, 0.0)};
  std::vector<double> row(S);
  for (std::size_t t = 0; t < B; ++t) {
    support.log_weights(gammas.subspan(t * dim, dim), row);
    const double th = thetas[t];
    for (std::size_t s = 0; s < S; ++s) {
      if (row[s] < kLogWeightCutoff) continue;
      const double w = std::exp(row[s]);
      acc.D[s] += w;
      acc.N[s] += th * w;
      acc.Q[s] += th * th * w;
    }
  }
  return acc;
}

FcLoss fc_loss_impl(const FusedSupport& support, std::span<const double> thetas,
                    std::span<const double> gammas, const Mlp& fc_net, bool want_grad) {
  require(fc_net.input_dim() == support.dim() && fc_net.output_dim() == 1,
          ErrorCategory::configuration,
          "FC network must map " + std::to_string(support.dim()) + " inputs to one output");
  const auto acc = accumulate_fc(support, thetas, gammas);
  FcLoss out;
  if (want_grad) out.grad.assign(fc_net.parameter_count(), 0.0);
  ForwardTrace trace;
  for (std::size_t s = 0; s < support.size(); ++s) {
    if (acc.D[s] <= 0.0) continue;
    const auto x = fc_input(support.statistic(s));
    const double f = fc_net.forward(x, trace)[0];
    out.loss += acc.Q[s] - 2.0 * f * acc.N[s] + f * f * acc.D[s];
    if (want_grad) {
      const double up = 2.0 * (f * acc.D[s] - acc.N[s]);
      fc_net.backward(trace, std::span<const double>(&up, 1), out.grad);
    }
  }
  return out;
}

std::vector<double> thetas_of(const GammaSource& source, std::span<const std::size_t> idx) {
  std::vector<double> th(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) th[i] = source.theta(idx[i]);
  return th;
}

double clamp_gamma(double g, double floor, bool onehot) {
  return std::clamp(g, floor, onehot ? 1.0 : 1.0 - floor);
}

// d loss / d controller output at x, masked where gamma was clamped.
void push_back_through(const QuantizerSpec& spec, double x, std::span<const double> upstream,
                       std::vector<std::vector<double>>& param_grads, ForwardTrace& trace) {
  const double in = x;
  if (spec.scheme().kind == SchemeKind::onehot) {
    const Mlp& net = spec.controllers().front().net();
    net.forward(std::span<const double>(&in, 1), trace);
    net.backward(trace, upstream, param_grads[0]);
    return;
  }
  for (std::size_t m = 0; m < spec.controllers().size(); ++m) {
    if (upstream[m] == 0.0) continue;
    const Mlp& net = spec.controllers()[m].net();
    net.forward(std::span<const double>(&in, 1), trace);
    net.backward(trace, upstream.subspan(m, 1), param_grads[m]);
  }
}

void require_networks(const QuantizerSpec& spec) {
  for (const auto& c : spec.controllers()) {
    require(c.is_network(), ErrorCategory::configuration,
            "controller '" + c.name() + "' is analytic and cannot be trained");
  }
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

void check_loop_config(const TrainingConfig& config, std::size_t T) {
  require(config.sensors >= 1, ErrorCategory::configuration, "training needs K >= 1");
  require(config.batch_size >= 2, ErrorCategory::configuration, "batch size must be at least 2");
  require(config.batch_size <= T, ErrorCategory::configuration,
          "batch size " + std::to_string(config.batch_size) + " exceeds the " +
              std::to_string(T) + " training samples");
  require(config.learning_rate >= 0.0 && std::isfinite(config.learning_rate),
          ErrorCategory::configuration, "learning rate must be finite and nonnegative");
  require(config.gamma_floor > 0.0 && config.gamma_floor < 0.5, ErrorCategory::configuration,
          "gamma_floor must lie in (0, 0.5)");
}

void check_regime(const TrainingConfig& config, const TrainingData& data) {
  const bool grid = std::holds_alternative<GridData>(data);
  require(grid == (config.regime == Regime::d2_grid), ErrorCategory::configuration,
          "regime " + regime_name(config.regime) + " does not match the training data");
}

std::string checkpoint_path(const std::string& dir, const std::string& stem, std::size_t epoch) {
  return (std::filesystem::path(dir) / (stem + "_epoch" + std::to_string(epoch) + ".json"))
      .string();
}

void save_quantizer_nets(const std::string& dir, const QuantizerSpec& spec, std::uint64_t seed,
                         const std::string& stem) {
  std::filesystem::create_directories(dir);
  save_json((std::filesystem::path(dir) / (stem + ".json")).string(),
            quantizer_to_json(spec, seed));
}

[[noreturn]] void abort_non_finite(const std::string& stage, std::size_t epoch, std::size_t batch,
                                   double loss, const std::string& snapshot) {
  std::ostringstream msg;
  msg << stage << ": non-finite loss " << loss << " at epoch " << epoch << ", batch " << batch;
  if (!snapshot.empty()) msg << "; parameters saved to " << snapshot;
  throw Error(ErrorCategory::numeric_domain, msg.str());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string regime_name(Regime regime) {
  return regime == Regime::d1_empirical ? "d1-empirical" : "d2-grid";
}

Regime regime_from_name(const std::string& name) {
  if (name == "d1-empirical") return Regime::d1_empirical;
  if (name == "d2-grid") return Regime::d2_grid;
  throw Error(ErrorCategory::configuration, "unknown training regime '" + name + "'");
}

std::size_t training_size(const TrainingData& data) {
  if (const auto* d1 = std::get_if<DatasetD1>(&data)) return d1->size();
  return std::get<GridData>(data).thetas.size();
}

QuantizerLoss quantizer_loss(const FusedSupport& support, std::span<const double> thetas,
                             std::span<const double> gammas, double gamma_floor) {
  return quantizer_loss_impl(support, thetas, gammas, gamma_floor, true);
}

FcLoss fc_loss(const FusedSupport& support, std::span<const double> thetas,
               std::span<const double> gammas, const Mlp& fc_net) {
  return fc_loss_impl(support, thetas, gammas, fc_net, true);
}

double GammaSource::theta(std::size_t index) const {
  if (const auto* d1 = std::get_if<DatasetD1>(data_)) return d1->entries.at(index).theta;
  return std::get<GridData>(*data_).thetas.at(index);
}

std::vector<double> GammaSource::gammas(const QuantizerSpec& spec,
                                        std::span<const std::size_t> indices,
                                        double floor) const {
  const std::size_t dim = spec.scheme().gamma_dim();
  const bool onehot = spec.scheme().kind == SchemeKind::onehot;
  std::vector<double> out(indices.size() * dim, 0.0);
  std::vector<double> g(dim);
  if (const auto* d1 = std::get_if<DatasetD1>(data_)) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto& obs = d1->entries.at(indices[i]).observations;
      double* row = out.data() + i * dim;
      for (double x : obs) {
        spec.controller_outputs(x, g);
        for (std::size_t c = 0; c < dim; ++c) row[c] += g[c];
      }
      for (std::size_t c = 0; c < dim; ++c) {
        row[c] = clamp_gamma(row[c] / static_cast<double>(obs.size()), floor, onehot);
      }
    }
    return out;
  }
  const auto& gd = std::get<GridData>(*data_);
  const std::size_t J = gd.grid.nodes.size();
  std::vector<double> node_out(J * dim);
  for (std::size_t j = 0; j < J; ++j) {
    spec.controller_outputs(gd.grid.nodes[j], std::span<double>(node_out.data() + j * dim, dim));
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto w = grid_weights(gd.grid, gd.noise, gd.thetas.at(indices[i]));
    double* row = out.data() + i * dim;
    for (std::size_t j = 0; j < J; ++j) {
      if (w[j] == 0.0) continue;
      for (std::size_t c = 0; c < dim; ++c) row[c] += w[j] * node_out[j * dim + c];
    }
    for (std::size_t c = 0; c < dim; ++c) row[c] = clamp_gamma(row[c], floor, onehot);
  }
  return out;
}

void GammaSource::backprop(const QuantizerSpec& spec, std::span<const std::size_t> indices,
                           std::span<const double> gammas, std::span<const double> dgamma,
                           double floor, std::vector<std::vector<double>>& param_grads) const {
  const std::size_t dim = spec.scheme().gamma_dim();
  const bool onehot = spec.scheme().kind == SchemeKind::onehot;
  require(gammas.size() == indices.size() * dim && dgamma.size() == gammas.size(),
          ErrorCategory::contract, "backprop: gamma block shape mismatch");
  std::vector<double> masked(dgamma.begin(), dgamma.end());
  for (std::size_t k = 0; k < masked.size(); ++k) {
    const double g = gammas[k];
    const bool clamped = onehot ? g <= floor : on_boundary(g, floor);
    if (clamped) masked[k] = 0.0;
  }
  ForwardTrace trace;
  std::vector<double> up(dim);
  if (const auto* d1 = std::get_if<DatasetD1>(data_)) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto& obs = d1->entries.at(indices[i]).observations;
      const double scale = 1.0 / static_cast<double>(obs.size());
      bool any = false;
      for (std::size_t c = 0; c < dim; ++c) {
        up[c] = masked[i * dim + c] * scale;
        any = any || up[c] != 0.0;
      }
      if (!any) continue;
      for (double x : obs) push_back_through(spec, x, up, param_grads, trace);
    }
    return;
  }
  const auto& gd = std::get<GridData>(*data_);
  const std::size_t J = gd.grid.nodes.size();
  std::vector<double> node_up(J * dim, 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto w = grid_weights(gd.grid, gd.noise, gd.thetas.at(indices[i]));
    for (std::size_t j = 0; j < J; ++j) {
      if (w[j] == 0.0) continue;
      for (std::size_t c = 0; c < dim; ++c) node_up[j * dim + c] += w[j] * masked[i * dim + c];
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    const std::span<const double> u(node_up.data() + j * dim, dim);
    if (std::all_of(u.begin(), u.end(), [](double v) { return v == 0.0; })) continue;
    push_back_through(spec, gd.grid.nodes[j], u, param_grads, trace);
  }
}

QuantizerTraining train_quantizer(const TrainingConfig& config, const TrainingData& data,
                                  QuantizerSpec spec) {
  require_networks(spec);
  check_regime(config, data);
  const GammaSource source(data);
  const std::size_t T = source.size();
  check_loop_config(config, T);
  const FusedSupport support(spec.scheme(), config.sensors);
  const std::size_t B = config.batch_size;
  const std::size_t batches = T / B;
  const double floor = config.gamma_floor;

  auto& controllers = spec.controllers();
  std::vector<Adam> optimizers;
  std::vector<std::vector<double>> grads;
  for (auto& c : controllers) {
    optimizers.emplace_back(c.net().parameter_count(), AdamConfig{config.learning_rate});
    grads.emplace_back(c.net().parameter_count(), 0.0);
  }

  const auto everything = all_indices(T);
  const auto all_thetas = thetas_of(source, everything);
  auto full_loss = [&] {
    const auto g = source.gammas(spec, everything, floor);
    return quantizer_loss_impl(support, all_thetas, g, floor, false).loss /
           static_cast<double>(T);
  };

  TrainingTrace trace;
  trace.epoch_loss.push_back(full_loss());
  auto perm = everything;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng::Stream shuffle(config.seed, rng::Purpose::shuffle, epoch);
    std::shuffle(perm.begin(), perm.end(), shuffle);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::span<const std::size_t> idx(perm.data() + b * B, B);
      const auto th = thetas_of(source, idx);
      const auto g = source.gammas(spec, idx, floor);
      const auto ql = quantizer_loss(support, th, g, floor);
      if (!std::isfinite(ql.loss)) {
        std::string snap;
        if (!config.checkpoint_dir.empty()) {
          save_quantizer_nets(config.checkpoint_dir, spec, config.seed, "quantizer_abort");
          snap = config.checkpoint_dir;
        }
        abort_non_finite("train_quantizer", epoch, b, ql.loss, snap);
      }
      trace.dead_controller = trace.dead_controller || ql.dead;
      for (auto& gr : grads) std::fill(gr.begin(), gr.end(), 0.0);
      source.backprop(spec, idx, g, ql.grad, floor, grads);
      for (std::size_t m = 0; m < controllers.size(); ++m) {
        optimizers[m].step(controllers[m].net().parameters(), grads[m]);
      }
      trace.batches.push_back({epoch, b, ql.loss / static_cast<double>(B), seconds_since(start)});
    }
    trace.epoch_loss.push_back(full_loss());
    if (!std::isfinite(trace.epoch_loss.back())) {
      abort_non_finite("train_quantizer", epoch, batches, trace.epoch_loss.back(), "");
    }
    if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() &&
        epoch % config.checkpoint_every == 0) {
      save_quantizer_nets(config.checkpoint_dir, spec, config.seed,
                          "quantizer_epoch" + std::to_string(epoch));
    }
  }
  if (!config.trace_csv.empty()) write_trace_csv(config.trace_csv, trace);
  return {std::move(spec), std::move(trace)};
}

FcTraining train_fc(const TrainingConfig& config, const TrainingData& data,
                    const QuantizerSpec& frozen_spec, Mlp fc_net) {
  check_regime(config, data);
  const GammaSource source(data);
  const std::size_t T = source.size();
  check_loop_config(config, T);
  const FusedSupport support(frozen_spec.scheme(), config.sensors);
  require(fc_net.input_dim() == support.dim(), ErrorCategory::configuration,
          "FC input width " + std::to_string(fc_net.input_dim()) + " does not match scheme " +
              frozen_spec.scheme().name());
  const std::size_t B = config.batch_size;
  const std::size_t batches = T / B;
  const std::size_t dim = support.dim();

  // The quantizer is frozen, so gamma is computed once.
  const auto everything = all_indices(T);
  const auto all_thetas = thetas_of(source, everything);
  const auto all_gammas = source.gammas(frozen_spec, everything, config.gamma_floor);

  Adam adam(fc_net.parameter_count(), AdamConfig{config.learning_rate});
  auto full_loss = [&] {
    return fc_loss_impl(support, all_thetas, all_gammas, fc_net, false).loss /
           static_cast<double>(T);
  };

  TrainingTrace trace;
  trace.epoch_loss.push_back(full_loss());
  auto perm = everything;
  std::vector<double> th(B), g(B * dim);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng::Stream shuffle(config.seed, rng::Purpose::shuffle, epoch);
    std::shuffle(perm.begin(), perm.end(), shuffle);
    for (std::size_t b = 0; b < batches; ++b) {
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t t = perm[b * B + i];
        th[i] = all_thetas[t];
        std::copy_n(all_gammas.begin() + static_cast<std::ptrdiff_t>(t * dim), dim,
                    g.begin() + static_cast<std::ptrdiff_t>(i * dim));
      }
      const auto fl = fc_loss(support, th, g, fc_net);
      if (!std::isfinite(fl.loss)) {
        std::string snap;
        if (!config.checkpoint_dir.empty()) {
          std::filesystem::create_directories(config.checkpoint_dir);
          snap = checkpoint_path(config.checkpoint_dir, "fc_abort", epoch);
          save_json(snap, mlp_to_json(fc_net, config.seed));
        }
        abort_non_finite("train_fc", epoch, b, fl.loss, snap);
      }
      adam.step(fc_net.parameters(), fl.grad);
      trace.batches.push_back({epoch, b, fl.loss / static_cast<double>(B), seconds_since(start)});
    }
    trace.epoch_loss.push_back(full_loss());
    if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() &&
        epoch % config.checkpoint_every == 0) {
      std::filesystem::create_directories(config.checkpoint_dir);
      save_json(checkpoint_path(config.checkpoint_dir, "fc", epoch),
                mlp_to_json(fc_net, config.seed));
    }
  }
  if (!config.trace_csv.empty()) write_trace_csv(config.trace_csv, trace);
  return {std::move(fc_net), std::move(trace)};
}

Mlp make_fc_network(const Scheme& scheme, const std::vector<std::size_t>& hidden,
                    std::uint64_t seed) {
  return make_mlp(scheme.gamma_dim(), hidden, 1, Activation::tanh, seed);
}

void write_trace_csv(const std::string& path, const TrainingTrace& trace) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::io, "cannot write loss trace to " + path);
  out << "epoch,batch,loss,wall_time\n";
  out.precision(17);
  for (const auto& r : trace.batches) {
    out << r.epoch << ',' << r.batch << ',' << r.loss << ',' << r.wall_time << '\n';
  }
  if (!out) throw Error(ErrorCategory::io, "failed while writing " + path);
}

nlohmann::json quantizer_to_json(const QuantizerSpec& spec, std::uint64_t seed) {
  require_networks(spec);
  nlohmann::json doc;
  doc["format"] = "distq-quantizer";
  doc["version"] = 1;
  doc["scheme"] = spec.scheme().name();
  doc["controllers"] = nlohmann::json::array();
  for (const auto& c : spec.controllers()) doc["controllers"].push_back(mlp_to_json(c.net(), seed));
  return doc;
}

QuantizerSpec quantizer_from_json(const nlohmann::json& doc) {
  try {
    require(doc.at("format") == "distq-quantizer" && doc.at("version") == 1,
            ErrorCategory::configuration, "not a version-1 distq-quantizer checkpoint");
    const auto scheme = Scheme::from_name(doc.at("scheme").get<std::string>());
    std::vector<Controller> controllers;
    for (const auto& c : doc.at("controllers")) controllers.emplace_back(mlp_from_json(c));
    return QuantizerSpec(scheme, std::move(controllers));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::configuration, std::string("malformed quantizer checkpoint: ") +
                                                  e.what());
  }
}

nlohmann::json estimator_to_json(const Mlp& fc_net, const Scheme& scheme, std::uint64_t seed) {
  nlohmann::json doc;
  doc["format"] = "distq-estimator";
  doc["version"] = 1;
  doc["scheme"] = scheme.name();
  doc["network"] = mlp_to_json(fc_net, seed);
  return doc;
}

Mlp estimator_from_json(const nlohmann::json& doc, Scheme* scheme) {
  try {
    require(doc.at("format") == "distq-estimator" && doc.at("version") == 1,
            ErrorCategory::configuration, "not a version-1 distq-estimator checkpoint");
    const auto s = Scheme::from_name(doc.at("scheme").get<std::string>());
    auto net = mlp_from_json(doc.at("network"));
    require(net.input_dim() == s.gamma_dim(), ErrorCategory::configuration,
            "estimator checkpoint input width does not match its scheme");
    if (scheme) *scheme = s;
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::configuration, std::string("malformed estimator checkpoint: ") +
                                                  e.what());
  }
}

}  // namespace distq
