#include "distq/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "distq/baseline.hpp"
#include "distq/bounds.hpp"
#include "distq/error.hpp"
#include "distq/monte_carlo.hpp"

namespace distq {

namespace {

bool wants(const ExperimentConfig& c, const std::string& method) {
  return std::find(c.methods.begin(), c.methods.end(), method) != c.methods.end();
}

struct Unit {
  std::string name;
  std::vector<std::string> keys;
  std::function<std::vector<ResultRow>()> run;
};

ResultRow make_row(std::string scheme, std::size_t k_s, std::size_t k_f, std::size_t k_eval,
                   double snr, std::string metric, double value, std::size_t n, std::uint64_t seed) {
  return {std::move(scheme), k_s, k_f, k_eval, snr, std::move(metric), value, n, seed};
}

std::vector<Unit> plan_units(const ExperimentConfig& c) {
  std::vector<Unit> units;
  const std::string scheme = c.scheme.name();
  const std::size_t k_f = c.fc_training.sensors;
  const bool proposed = wants(c, "proposed");
  const bool bound = wants(c, "exact-bound");
  const bool loss = wants(c, "loss");
  for (double snr : c.snr_db) {
    if (proposed || bound || loss) {
      for (std::size_t k_s : c.k_s) {
        Unit u;
        u.name = "train " + scheme + " snr=" + format_snr(snr) + " K_S=" + std::to_string(k_s);
        for (std::size_t k : c.k_eval) {
          if (proposed) u.keys.push_back(make_row(scheme, k_s, k_f, k, snr, "empirical-mse", 0, 0, 0).key());
          if (bound) u.keys.push_back(make_row(scheme, k_s, 0, k, snr, "exact-bound", 0, 0, 0).key());
        }
        if (loss) u.keys.push_back(make_row(scheme, k_s, 0, 0, snr, "loss", 0, 0, 0).key());
        u.run = [&c, snr, k_s, scheme, k_f, proposed, bound, loss] {
          const std::uint64_t seed = cell_seed(c.seed, snr, k_s);
          const auto noise = c.noise(snr);
          const auto prior = c.prior();
          std::vector<ResultRow> rows;
          std::optional<QuantizerSpec> spec;
          std::optional<Mlp> fc;
          if (proposed) {
            auto sys = train_system(c, snr, k_s, seed);
            if (loss) {
              rows.push_back(make_row(scheme, k_s, 0, 0, snr, "loss",
                                      sys.quantizer_trace.epoch_loss.back(), 0, seed));
            }
            spec.emplace(std::move(sys.quantizer));
            fc.emplace(std::move(sys.fc));
          } else {
            TrainingConfig stage1 = c.quantizer_training;
            stage1.sensors = k_s;
            stage1.seed = seed;
            const auto data = make_training_data(c, noise, seed);
            auto q = train_quantizer(stage1, data,
                                     make_network_quantizer(c.scheme, c.quantizer_hidden, seed));
            if (loss) {
              rows.push_back(
                  make_row(scheme, k_s, 0, 0, snr, "loss", q.trace.epoch_loss.back(), 0, seed));
            }
            spec.emplace(std::move(q.spec));
          }
          Scenario scenario{prior, noise};
          for (std::size_t k : c.k_eval) {
            if (proposed) {
              const std::uint64_t mc_seed = rng::Stream(seed, rng::Purpose::trial, k)();
              const auto mc = run_monte_carlo(scenario, *spec, network_estimator(*fc), k,
                                              c.n_test_trials, mc_seed);
              rows.push_back(make_row(scheme, k_s, k_f, k, snr, "empirical-mse", mc.mse,
                                      mc.n_trials, mc_seed));
            }
            if (bound) {
              const double b = mse_lower_bound(law_for(*spec, noise, k), prior);
              rows.push_back(make_row(scheme, k_s, 0, k, snr, "exact-bound", b, 0, seed));
            }
          }
          return rows;
        };
        units.push_back(std::move(u));
      }
    }
    if (wants(c, "sqmlf")) {
      Unit u;
      u.name = "sqmlf snr=" + format_snr(snr);
      for (std::size_t k : c.k_eval) {
        u.keys.push_back(make_row("binary", 0, 0, k, snr, "sqmlf-mse", 0, 0, 0).key());
      }
      u.run = [&c, snr] {
        std::vector<ResultRow> rows;
        const std::uint64_t seed = cell_seed(c.seed, snr, 0);
        Scenario scenario{c.prior(), c.noise(snr)};
        for (std::size_t k : c.k_eval) {
          const std::uint64_t mc_seed = rng::Stream(seed, rng::Purpose::trial, k)();
          const auto mc = run_monte_carlo(scenario, sine_quantizer(), sqmlf_estimator(), k,
                                          c.n_test_trials, mc_seed);
          rows.push_back(
              make_row("binary", 0, 0, k, snr, "sqmlf-mse", mc.mse, mc.n_trials, mc_seed));
        }
        return rows;
      };
      units.push_back(std::move(u));
    }
    if (wants(c, "pcrlb")) {
      Unit u;
      u.name = "pcrlb snr=" + format_snr(snr);
      for (std::size_t k : c.k_eval) {
        u.keys.push_back(make_row("binary", 0, 0, k, snr, "pcrlb", 0, 0, 0).key());
      }
      u.run = [&c, snr] {
        std::vector<ResultRow> rows;
        for (std::size_t k : c.k_eval) {
          rows.push_back(make_row("binary", 0, 0, k, snr, "pcrlb", pcrlb_binary(k), 0, 0));
        }
        return rows;
      };
      units.push_back(std::move(u));
    }
  }
  return units;
}

std::vector<ResultRow> read_journal(const std::filesystem::path& path) {
  std::vector<ResultRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line) || line != kResultHeader) {
    throw Error(ErrorCategory::io, "journal " + path.string() + " has an unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      rows.push_back(ResultRow::from_csv(line));
    } catch (const Error&) {
      // A torn final line from an interrupted append.
    }
  }
  return rows;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    if (c != '\n') out += c;
  }
  return out + '"';
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t run_seed, double snr_db, std::size_t k_s) {
  const double snr = std::isinf(snr_db) ? 1e308 : snr_db;
  return rng::Stream(run_seed, rng::Purpose::trial, std::bit_cast<std::uint64_t>(snr), k_s,
                     0x5eed)();
}

TrainingData make_training_data(const ExperimentConfig& config, const NoiseModel& noise,
                                std::uint64_t seed) {
  const auto prior = config.prior();
  if (config.quantizer_training.regime == Regime::d2_grid) {
    return GridData{sample_prior(prior, config.samples, seed),
                    build_obs_grid(noise.observation_bound, config.grid_half_count), noise};
  }
  const std::size_t m_obs = noise.kind == NoiseKind::noiseless ? 1 : config.observations_per_sample;
  return build_dataset_d1(prior, noise, config.samples, m_obs, seed);
}

TrainedSystem train_system(const ExperimentConfig& config, double snr_db, std::size_t k_s,
                           std::uint64_t seed, const std::string& trace_dir) {
  const auto noise = config.noise(snr_db);
  const auto data = make_training_data(config, noise, seed);
  TrainingConfig stage1 = config.quantizer_training;
  stage1.sensors = k_s;
  stage1.seed = seed;
  TrainingConfig stage2 = config.fc_training;
  stage2.seed = seed;
  if (!trace_dir.empty()) {
    const std::filesystem::path dir(trace_dir);
    stage1.trace_csv = (dir / "quantizer_trace.csv").string();
    stage2.trace_csv = (dir / "fc_trace.csv").string();
    if (stage1.checkpoint_every > 0) stage1.checkpoint_dir = (dir / "checkpoints").string();
    if (stage2.checkpoint_every > 0) stage2.checkpoint_dir = (dir / "checkpoints").string();
  }
  auto q = train_quantizer(stage1, data,
                           make_network_quantizer(config.scheme, config.quantizer_hidden, seed));
  auto f = train_fc(stage2, data, q.spec,
                    make_fc_network(config.scheme, config.fc_hidden,
                                    rng::Stream(seed, rng::Purpose::init, 0xfc)()));
  return {std::move(q.spec), std::move(f.fc), std::move(q.trace), std::move(f.trace)};
}

SweepOutcome sweep(const ExperimentConfig& config) {
  const std::string tag = config_hash(config);
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + dir.string() + ": " + ec.message());
  const auto journal_path = dir / ("journal_" + tag + ".csv");
  const auto failure_path = dir / ("failures_" + tag + ".csv");

  const auto units = plan_units(config);
  std::set<std::string> expected;
  for (const auto& u : units) expected.insert(u.keys.begin(), u.keys.end());

  std::map<std::string, ResultRow> done;
  for (auto& r : read_journal(journal_path)) {
    if (expected.count(r.key())) done.emplace(r.key(), r);
  }

  const bool fresh = !std::filesystem::exists(journal_path);
  std::ofstream journal(journal_path, std::ios::app);
  if (!journal) throw Error(ErrorCategory::io, "cannot open journal " + journal_path.string());
  if (fresh) journal << kResultHeader << '\n' << std::flush;

  SweepOutcome outcome;
  std::vector<const Unit*> todo;
  for (const auto& u : units) {
    const bool complete = std::all_of(u.keys.begin(), u.keys.end(),
                                      [&](const std::string& k) { return done.count(k) > 0; });
    if (complete) {
      ++outcome.units_skipped;
    } else {
      todo.push_back(&u);
    }
  }

  std::mutex writer;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const Unit& u = *todo[i];
      try {
        auto rows = u.run();
        for (const auto& r : rows) {
          require(std::isfinite(r.value), ErrorCategory::numerical_integrity,
                  "non-finite value for " + r.key());
        }
        std::lock_guard lock(writer);
        std::string block;
        for (auto& r : rows) {
          if (done.count(r.key())) continue;
          block += r.to_csv() + '\n';
          done.emplace(r.key(), r);
        }
        journal << block << std::flush;
        ++outcome.units_run;
      } catch (const Error& e) {
        std::lock_guard lock(writer);
        outcome.failures.push_back({u.name, std::string(category_name(e.category())), e.what()});
      } catch (const std::exception& e) {
        std::lock_guard lock(writer);
        outcome.failures.push_back({u.name, "internal", e.what()});
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(config.workers, 1, std::max<std::size_t>(todo.size(), 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  if (!outcome.failures.empty()) {
    std::ofstream out(failure_path, std::ios::app);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + failure_path.string());
    for (const auto& f : outcome.failures) {
      out << csv_quote(f.unit) << ',' << f.category << ',' << csv_quote(f.message) << '\n';
    }
  }

  for (auto& [_, r] : done) outcome.rows.push_back(r);
  sort_rows(outcome.rows);
  if (!outcome.rows.empty()) outcome.artifacts = emit_artifacts(outcome.rows, config.output_dir, tag);
  return outcome;
}

}  // namespace distq
