#include "distq/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "distq/error.hpp"

namespace distq {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  require(obj.is_object(), ErrorCategory::configuration, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    require(allowed.count(key) > 0, ErrorCategory::configuration,
            "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

double snr_from_json(const json& v) {
  if (v.is_string()) return parse_snr(v.get<std::string>());
  require(v.is_number(), ErrorCategory::configuration, "snr_db entries must be numbers or \"inf\"");
  return v.get<double>();
}

json snr_to_json(double snr) {
  if (std::isinf(snr)) return "inf";
  return snr;
}

void read_stage(const json& obj, const std::string& where, TrainingConfig& stage) {
  check_keys(obj, where,
             {"sensors", "batch_size", "epochs", "learning_rate", "regime", "gamma_floor",
              "checkpoint_every"});
  read(obj, "sensors", stage.sensors);
  read(obj, "batch_size", stage.batch_size);
  read(obj, "epochs", stage.epochs);
  read(obj, "learning_rate", stage.learning_rate);
  read(obj, "gamma_floor", stage.gamma_floor);
  read(obj, "checkpoint_every", stage.checkpoint_every);
  if (obj.contains("regime")) stage.regime = regime_from_name(obj.at("regime").get<std::string>());
}

json stage_to_json(const TrainingConfig& s) {
  return {{"sensors", s.sensors},         {"batch_size", s.batch_size},
          {"epochs", s.epochs},           {"learning_rate", s.learning_rate},
          {"regime", regime_name(s.regime)}, {"gamma_floor", s.gamma_floor},
          {"checkpoint_every", s.checkpoint_every}};
}

void validate(const ExperimentConfig& c) {
  static const std::set<std::string> known_methods{"proposed", "sqmlf", "pcrlb", "exact-bound",
                                                   "loss"};
  require(c.prior_high >= c.prior_low, ErrorCategory::configuration, "prior high < low");
  require(c.observation_bound > 0.0, ErrorCategory::configuration,
          "observation_bound must be positive");
  require(!c.k_eval.empty() && !c.k_s.empty() && !c.snr_db.empty() && !c.methods.empty(),
          ErrorCategory::configuration, "sweep axes and methods must be nonempty");
  for (auto k : c.k_eval) require(k >= 1, ErrorCategory::configuration, "K_eval must be >= 1");
  for (auto k : c.k_s) require(k >= 1, ErrorCategory::configuration, "K_S must be >= 1");
  for (double s : c.snr_db) {
    require(!std::isnan(s) && s != -std::numeric_limits<double>::infinity(),
            ErrorCategory::configuration, "snr_db must be a number or +inf");
  }
  for (const auto& m : c.methods) {
    require(known_methods.count(m) > 0, ErrorCategory::configuration, "unknown method '" + m + "'");
  }
  require(c.samples >= 2 && c.observations_per_sample >= 1 && c.grid_half_count >= 1,
          ErrorCategory::configuration, "dataset sizes must be positive (samples >= 2)");
  require(c.n_test_trials >= 2, ErrorCategory::configuration, "n_test_trials must be >= 2");
  require(c.workers >= 1, ErrorCategory::configuration, "workers must be >= 1");
  require(c.quantizer_training.regime == c.fc_training.regime, ErrorCategory::configuration,
          "both training stages must use the same regime");
  for (const auto* path : {&c.quantizer_checkpoint, &c.fc_checkpoint}) {
    if (!path->empty()) {
      require(std::filesystem::exists(*path), ErrorCategory::configuration,
              "checkpoint '" + *path + "' does not exist");
    }
  }
}

}  // namespace

PriorModel ExperimentConfig::prior() const {
  return PriorModel::from_name(prior_kind, prior_low, prior_high);
}

NoiseModel ExperimentConfig::noise(double snr) const {
  const double sigma = snr_to_sigma(snr, prior());
  if (sigma == 0.0) return NoiseModel::noiseless(observation_bound);
  return NoiseModel::gaussian(sigma, observation_bound);
}

std::string format_snr(double snr_db) {
  if (std::isinf(snr_db)) return snr_db > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", snr_db);
  return buf;
}

double parse_snr(const std::string& text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    require(used == text.size(), ErrorCategory::configuration, "bad SNR value '" + text + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCategory::configuration, "bad SNR value '" + text + "'");
  }
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  try {
    check_keys(doc, "config",
               {"version", "scenario", "scheme", "quantizer_hidden", "fc_hidden", "dataset",
                "quantizer_training", "fc_training", "sweep", "methods", "n_test_trials", "seed",
                "output_dir", "workers", "quantizer_checkpoint", "fc_checkpoint"});
    require(doc.contains("version") && doc.at("version") == kConfigVersion,
            ErrorCategory::configuration,
            "config must declare \"version\": " + std::to_string(kConfigVersion));
    if (doc.contains("scenario")) {
      const auto& s = doc.at("scenario");
      check_keys(s, "scenario", {"prior", "observation_bound"});
      if (s.contains("prior")) {
        const auto& p = s.at("prior");
        check_keys(p, "scenario.prior", {"kind", "low", "high"});
        read(p, "kind", c.prior_kind);
        read(p, "low", c.prior_low);
        read(p, "high", c.prior_high);
      }
      read(s, "observation_bound", c.observation_bound);
    }
    if (doc.contains("scheme")) c.scheme = Scheme::from_name(doc.at("scheme").get<std::string>());
    read(doc, "quantizer_hidden", c.quantizer_hidden);
    read(doc, "fc_hidden", c.fc_hidden);
    if (doc.contains("dataset")) {
      const auto& d = doc.at("dataset");
      check_keys(d, "dataset", {"samples", "observations_per_sample", "grid_half_count"});
      read(d, "samples", c.samples);
      read(d, "observations_per_sample", c.observations_per_sample);
      read(d, "grid_half_count", c.grid_half_count);
    }
    if (doc.contains("quantizer_training")) {
      read_stage(doc.at("quantizer_training"), "quantizer_training", c.quantizer_training);
    }
    if (doc.contains("fc_training")) read_stage(doc.at("fc_training"), "fc_training", c.fc_training);
    if (doc.contains("sweep")) {
      const auto& s = doc.at("sweep");
      check_keys(s, "sweep", {"K_eval", "K_S", "snr_db"});
      read(s, "K_eval", c.k_eval);
      read(s, "K_S", c.k_s);
      if (s.contains("snr_db")) {
        c.snr_db.clear();
        for (const auto& v : s.at("snr_db")) c.snr_db.push_back(snr_from_json(v));
      }
    }
    read(doc, "methods", c.methods);
    read(doc, "n_test_trials", c.n_test_trials);
    read(doc, "seed", c.seed);
    read(doc, "output_dir", c.output_dir);
    read(doc, "workers", c.workers);
    read(doc, "quantizer_checkpoint", c.quantizer_checkpoint);
    read(doc, "fc_checkpoint", c.fc_checkpoint);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::configuration, std::string("invalid config: ") + e.what());
  }
  c.quantizer_training.seed = c.seed;
  c.fc_training.seed = c.seed;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::configuration, "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& c) {
  json snr = json::array();
  for (double s : c.snr_db) snr.push_back(snr_to_json(s));
  json doc = {
      {"version", kConfigVersion},
      {"scenario",
       {{"prior", {{"kind", c.prior_kind}, {"low", c.prior_low}, {"high", c.prior_high}}},
        {"observation_bound", c.observation_bound}}},
      {"scheme", c.scheme.name()},
      {"quantizer_hidden", c.quantizer_hidden},
      {"fc_hidden", c.fc_hidden},
      {"dataset",
       {{"samples", c.samples},
        {"observations_per_sample", c.observations_per_sample},
        {"grid_half_count", c.grid_half_count}}},
      {"quantizer_training", stage_to_json(c.quantizer_training)},
      {"fc_training", stage_to_json(c.fc_training)},
      {"sweep", {{"K_eval", c.k_eval}, {"K_S", c.k_s}, {"snr_db", snr}}},
      {"methods", c.methods},
      {"n_test_trials", c.n_test_trials},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
  };
  if (!c.quantizer_checkpoint.empty()) doc["quantizer_checkpoint"] = c.quantizer_checkpoint;
  if (!c.fc_checkpoint.empty()) doc["fc_checkpoint"] = c.fc_checkpoint;
  return doc;
}

std::string config_hash(const ExperimentConfig& config) {
  // Output location and worker count do not change results.
  auto doc = config_to_json(config);
  doc.erase("output_dir");
  doc.erase("workers");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace distq
