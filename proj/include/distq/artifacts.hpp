#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace distq {

inline constexpr const char* kResultHeader =
    "scheme,K_S,K_F,K_eval,snr_db,metric,value,n_trials,seed";

// Metric tags: empirical-mse, exact-bound, pcrlb, sqmlf-mse, loss.
bool is_metric(const std::string& tag);

struct ResultRow {
  std::string scheme;
  std::size_t k_s = 0;
  std::size_t k_f = 0;
  std::size_t k_eval = 0;
  double snr_db = 0.0;
  std::string metric;
  double value = 0.0;
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;

  // Row identity: everything except value, n_trials and seed.
  std::string key() const;
  std::string to_csv() const;
  static ResultRow from_csv(const std::string& line);

  bool operator==(const ResultRow&) const = default;
};

std::vector<ResultRow> read_rows_csv(const std::string& path);
void sort_rows(std::vector<ResultRow>& rows);
std::string rows_to_csv(const std::vector<ResultRow>& rows);

struct ArtifactPaths {
  std::string csv;
  std::vector<std::string> plots;
};

// results_<tag>.csv with rows in canonical order, plus one log-log MSE-vs-K
// SVG per SNR with the PCRLB reference line. A metric selection, when given,
// must be nonempty and match at least one row.
ArtifactPaths emit_artifacts(std::vector<ResultRow> rows, const std::string& output_dir,
                             const std::string& tag,
                             const std::optional<std::vector<std::string>>& metrics = std::nullopt);

// SVG text for rows at one SNR.
std::string render_mse_plot(const std::vector<ResultRow>& rows, const std::string& title);

}  // namespace distq
