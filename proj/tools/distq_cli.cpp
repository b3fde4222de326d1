#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distq/artifacts.hpp"
#include "distq/baseline.hpp"
#include "distq/bounds.hpp"
#include "distq/config.hpp"
#include "distq/error.hpp"
#include "distq/monte_carlo.hpp"
#include "distq/sweep.hpp"
#include "distq/training.hpp"

namespace fs = std::filesystem;
using namespace distq;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
  auto* c = cmd->add_option("-c,--config", opts.config_path, "experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("-o,--out", opts.out, "output directory (overrides the config)");
  cmd->add_option("-s,--seed", opts.seed, "run seed (overrides the config)");
  cmd->add_option("-w,--workers", opts.workers, "worker threads (overrides the config)");
}

ExperimentConfig resolve(const CommonOptions& opts) {
  auto doc = config_to_json(load_config(opts.config_path));
  if (!opts.out.empty()) doc["output_dir"] = opts.out;
  if (opts.seed) doc["seed"] = *opts.seed;
  if (opts.workers) doc["workers"] = *opts.workers;
  return parse_config(doc);
}

QuantizerSpec load_quantizer(const std::string& source) {
  if (source == "sine") return sine_quantizer();
  return quantizer_from_json(load_json(source));
}

void print_rows(const std::vector<ResultRow>& rows) {
  std::cout << kResultHeader << '\n';
  for (const auto& r : rows) std::cout << r.to_csv() << '\n';
}

int cmd_train(const CommonOptions& opts, const std::string& stage,
              std::optional<double> snr_override, std::optional<std::size_t> ks_override,
              std::string quantizer_path) {
  const auto config = resolve(opts);
  const double snr = snr_override.value_or(config.snr_db.front());
  const std::size_t k_s = ks_override.value_or(config.k_s.front());
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const std::uint64_t seed = cell_seed(config.seed, snr, k_s);
  const auto noise = config.noise(snr);

  if (stage == "both") {
    const auto sys = train_system(config, snr, k_s, seed, dir.string());
    save_json((dir / "quantizer.json").string(), quantizer_to_json(sys.quantizer, seed));
    save_json((dir / "fc.json").string(), estimator_to_json(sys.fc, config.scheme, seed));
    std::cout << "quantizer loss " << sys.quantizer_trace.epoch_loss.front() << " -> "
              << sys.quantizer_trace.epoch_loss.back() << "\nfc loss "
              << sys.fc_trace.epoch_loss.front() << " -> " << sys.fc_trace.epoch_loss.back()
              << "\nwrote " << (dir / "quantizer.json").string() << " and "
              << (dir / "fc.json").string() << '\n';
    if (sys.quantizer_trace.dead_controller) {
      std::cerr << "warning: a batch saw every quantization probability on its clamp\n";
    }
    return 0;
  }
  const auto data = make_training_data(config, noise, seed);
  if (stage == "quantizer") {
    TrainingConfig stage1 = config.quantizer_training;
    stage1.sensors = k_s;
    stage1.seed = seed;
    stage1.trace_csv = (dir / "quantizer_trace.csv").string();
    auto q = train_quantizer(stage1, data,
                             make_network_quantizer(config.scheme, config.quantizer_hidden, seed));
    save_json((dir / "quantizer.json").string(), quantizer_to_json(q.spec, seed));
    std::cout << "quantizer loss " << q.trace.epoch_loss.front() << " -> "
              << q.trace.epoch_loss.back() << '\n';
    return 0;
  }
  if (quantizer_path.empty()) quantizer_path = config.quantizer_checkpoint;
  require(!quantizer_path.empty(), ErrorCategory::configuration,
          "stage fc needs a frozen quantizer (--quantizer or quantizer_checkpoint)");
  const auto spec = load_quantizer(quantizer_path);
  require(spec.scheme() == config.scheme, ErrorCategory::configuration,
          "checkpoint scheme " + spec.scheme().name() + " differs from config scheme " +
              config.scheme.name());
  TrainingConfig stage2 = config.fc_training;
  stage2.seed = seed;
  stage2.trace_csv = (dir / "fc_trace.csv").string();
  auto f = train_fc(stage2, data, spec,
                    make_fc_network(config.scheme, config.fc_hidden,
                                    rng::Stream(seed, rng::Purpose::init, 0xfc)()));
  save_json((dir / "fc.json").string(), estimator_to_json(f.fc, config.scheme, seed));
  std::cout << "fc loss " << f.trace.epoch_loss.front() << " -> " << f.trace.epoch_loss.back()
            << '\n';
  return 0;
}

int cmd_bound(const CommonOptions& opts, std::string quantizer_path, bool emit) {
  const auto config = resolve(opts);
  if (quantizer_path.empty()) quantizer_path = config.quantizer_checkpoint;
  require(!quantizer_path.empty(), ErrorCategory::configuration,
          "bound needs --quantizer <checkpoint|sine> or quantizer_checkpoint");
  const auto spec = load_quantizer(quantizer_path);
  const auto prior = config.prior();
  std::vector<ResultRow> rows;
  for (double snr : config.snr_db) {
    const auto noise = config.noise(snr);
    for (std::size_t k : config.k_eval) {
      const double b = mse_lower_bound(law_for(spec, noise, k), prior);
      rows.push_back({spec.scheme().name(), 0, 0, k, snr, "exact-bound", b, 0, config.seed});
    }
  }
  print_rows(rows);
  if (emit) emit_artifacts(rows, config.output_dir, config_hash(config) + "_bound");
  return 0;
}

int cmd_simulate(const CommonOptions& opts, std::string quantizer_path, std::string fc_path,
                 const std::string& estimator_kind, bool emit) {
  const auto config = resolve(opts);
  if (quantizer_path.empty()) quantizer_path = config.quantizer_checkpoint;
  if (fc_path.empty()) fc_path = config.fc_checkpoint;
  require(!quantizer_path.empty(), ErrorCategory::configuration,
          "simulate needs --quantizer <checkpoint|sine> or quantizer_checkpoint");
  const auto spec = load_quantizer(quantizer_path);
  const auto prior = config.prior();
  std::optional<Mlp> fc;
  if (estimator_kind == "network") {
    require(!fc_path.empty(), ErrorCategory::configuration,
            "estimator 'network' needs --fc or fc_checkpoint");
    Scheme scheme;
    fc = estimator_from_json(load_json(fc_path), &scheme);
    require(scheme == spec.scheme(), ErrorCategory::configuration,
            "estimator scheme " + scheme.name() + " differs from quantizer scheme " +
                spec.scheme().name());
  }
  std::vector<ResultRow> rows;
  for (double snr : config.snr_db) {
    const auto noise = config.noise(snr);
    Scenario scenario{prior, noise};
    for (std::size_t k : config.k_eval) {
      Estimator est;
      if (estimator_kind == "network") {
        est = network_estimator(*fc);
      } else if (estimator_kind == "sqmlf") {
        require(spec.scheme().kind == SchemeKind::binary, ErrorCategory::configuration,
                "sqmlf fusion needs a binary quantizer");
        est = sqmlf_estimator();
      } else {
        est = table_estimator(posterior_mean(law_for(spec, noise, k), prior));
      }
      const std::uint64_t mc_seed = rng::Stream(config.seed, rng::Purpose::trial, k)();
      const auto mc = run_monte_carlo(scenario, spec, est, k, config.n_test_trials, mc_seed,
                                      config.workers);
      rows.push_back({spec.scheme().name(), 0, fc ? config.fc_training.sensors : 0, k, snr,
                      estimator_kind == "sqmlf" ? "sqmlf-mse" : "empirical-mse", mc.mse,
                      mc.n_trials, mc_seed});
      std::cerr << "K=" << k << " snr=" << format_snr(snr) << " mse=" << mc.mse
                << " se=" << mc.standard_error << '\n';
    }
  }
  print_rows(rows);
  if (emit) emit_artifacts(rows, config.output_dir, config_hash(config) + "_simulate");
  return 0;
}

int cmd_sweep(const CommonOptions& opts) {
  const auto config = resolve(opts);
  const auto outcome = sweep(config);
  std::cout << "units run " << outcome.units_run << ", skipped " << outcome.units_skipped
            << ", failed " << outcome.failures.size() << '\n';
  if (!outcome.artifacts.csv.empty()) std::cout << "wrote " << outcome.artifacts.csv << '\n';
  for (const auto& p : outcome.artifacts.plots) std::cout << "wrote " << p << '\n';
  for (const auto& f : outcome.failures) {
    std::cerr << "failed " << f.unit << ": error[" << f.category << "]: " << f.message << '\n';
  }
  return outcome.failures.empty() ? 0 : 1;
}

int cmd_plot(const std::string& input, const std::string& out,
             const std::optional<std::vector<std::string>>& metrics) {
  auto rows = read_rows_csv(input);
  const std::string stem = fs::path(input).stem().string();
  const auto paths = emit_artifacts(std::move(rows), out, stem + "_plot", metrics);
  for (const auto& p : paths.plots) std::cout << "wrote " << p << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distq: distributed estimation with probabilistic quantizers"};
  app.require_subcommand(1);

  CommonOptions train_opts, bound_opts, sim_opts, sweep_opts;
  std::string stage = "both", train_quantizer_path;
  std::optional<double> train_snr;
  std::optional<std::size_t> train_ks;
  auto* train = app.add_subcommand("train", "train the quantizer, the FC estimator, or both");
  add_common(train, train_opts);
  train->add_option("--stage", stage, "quantizer, fc or both")
      ->check(CLI::IsMember({"quantizer", "fc", "both"}));
  train->add_option("--snr", train_snr, "training SNR in dB (default: first sweep value)");
  train->add_option("--ks", train_ks, "K_S for stage 1 (default: first sweep value)");
  train->add_option("--quantizer", train_quantizer_path, "frozen quantizer for --stage fc");

  std::string bound_quantizer;
  bool bound_emit = false;
  auto* bound = app.add_subcommand("bound", "exact MSE lower bound of a quantizer");
  add_common(bound, bound_opts);
  bound->add_option("--quantizer", bound_quantizer, "quantizer checkpoint, or 'sine'");
  bound->add_flag("--emit", bound_emit, "also write CSV and plots to the output directory");

  std::string sim_quantizer, sim_fc, sim_estimator = "network";
  bool sim_emit = false;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo evaluation over K_eval and SNR");
  add_common(simulate, sim_opts);
  simulate->add_option("--quantizer", sim_quantizer, "quantizer checkpoint, or 'sine'");
  simulate->add_option("--fc", sim_fc, "estimator checkpoint");
  simulate->add_option("--estimator", sim_estimator, "network, sqmlf or posterior")
      ->check(CLI::IsMember({"network", "sqmlf", "posterior"}));
  simulate->add_flag("--emit", sim_emit, "also write CSV and plots to the output directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "run the configured sweep (resumable)");
  add_common(sweep_cmd, sweep_opts);

  std::string plot_input, plot_out = ".";
  std::optional<std::vector<std::string>> plot_metrics;
  auto* plot = app.add_subcommand("plot", "render MSE-vs-K plots from a results CSV");
  plot->add_option("-i,--input", plot_input, "results CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--out", plot_out, "output directory");
  plot->add_option("--metrics", plot_metrics, "metrics to keep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[configuration]: " << e.what() << '\n';
    return exit_code(ErrorCategory::configuration);
  }

  try {
    if (*train) return cmd_train(train_opts, stage, train_snr, train_ks, train_quantizer_path);
    if (*bound) return cmd_bound(bound_opts, bound_quantizer, bound_emit);
    if (*simulate) return cmd_simulate(sim_opts, sim_quantizer, sim_fc, sim_estimator, sim_emit);
    if (*sweep_cmd) return cmd_sweep(sweep_opts);
    if (*plot) return cmd_plot(plot_input, plot_out, plot_metrics);
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error[io]: " << e.what() << '\n';
    return exit_code(ErrorCategory::io);
  }
  return 0;
}
