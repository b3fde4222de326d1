#include "distq/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "distq/bounds.hpp"
#include "distq/config.hpp"
#include "distq/error.hpp"

namespace distq {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::size_t to_count(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return static_cast<std::size_t>(v);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCategory::io, "failed while writing " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot move " + tmp + " into place: " + ec.message());
}

auto sort_key(const ResultRow& r) {
  return std::tie(r.metric, r.scheme, r.k_s, r.k_f, r.snr_db, r.k_eval);
}

}  // namespace

bool is_metric(const std::string& tag) {
  static const std::set<std::string> tags{"empirical-mse", "exact-bound", "pcrlb", "sqmlf-mse",
                                          "loss"};
  return tags.count(tag) > 0;
}

std::string ResultRow::key() const {
  return scheme + '|' + std::to_string(k_s) + '|' + std::to_string(k_f) + '|' +
         std::to_string(k_eval) + '|' + format_snr(snr_db) + '|' + metric;
}

std::string ResultRow::to_csv() const {
  return scheme + ',' + std::to_string(k_s) + ',' + std::to_string(k_f) + ',' +
         std::to_string(k_eval) + ',' + format_snr(snr_db) + ',' + metric + ',' + fmt(value) +
         ',' + std::to_string(n_trials) + ',' + std::to_string(seed);
}

ResultRow ResultRow::from_csv(const std::string& line) {
  const auto f = split_csv(line);
  require(f.size() == 9, ErrorCategory::io, "result row needs 9 fields: '" + line + "'");
  try {
    ResultRow r;
    r.scheme = f[0];
    r.k_s = to_count(f[1]);
    r.k_f = to_count(f[2]);
    r.k_eval = to_count(f[3]);
    r.snr_db = parse_snr(f[4]);
    r.metric = f[5];
    r.value = std::stod(f[6]);
    r.n_trials = to_count(f[7]);
    r.seed = std::stoull(f[8]);
    require(is_metric(r.metric), ErrorCategory::io, "unknown metric '" + r.metric + "'");
    return r;
  } catch (const std::logic_error&) {
    throw Error(ErrorCategory::io, "malformed result row: '" + line + "'");
  }
}

std::vector<ResultRow> read_rows_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kResultHeader, ErrorCategory::io,
          path + " does not start with the result header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(ResultRow::from_csv(line));
  }
  return rows;
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ResultRow& a, const ResultRow& b) { return sort_key(a) < sort_key(b); });
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kResultHeader) + '\n';
  for (const auto& r : rows) out += r.to_csv() + '\n';
  return out;
}

std::string render_mse_plot(const std::vector<ResultRow>& rows, const std::string& title) {
  constexpr double W = 720, H = 480, left = 80, right = 220, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double kmin = std::numeric_limits<double>::infinity(), kmax = 0.0;
  double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
  for (const auto& r : rows) {
    if (r.metric == "loss" || r.metric == "pcrlb" || r.k_eval == 0 || !(r.value > 0.0)) continue;
    std::string name = r.metric == "sqmlf-mse" ? "SQMLF" : r.scheme + " " + r.metric;
    if (r.metric != "sqmlf-mse") name += " K_S=" + std::to_string(r.k_s);
    const double k = static_cast<double>(r.k_eval);
    series[name].emplace_back(k, r.value);
    kmin = std::min(kmin, k);
    kmax = std::max(kmax, k);
    vmin = std::min(vmin, r.value);
    vmax = std::max(vmax, r.value);
  }
  for (const auto& r : rows) {
    if (r.k_eval > 0) {
      kmin = std::min(kmin, static_cast<double>(r.k_eval));
      kmax = std::max(kmax, static_cast<double>(r.k_eval));
    }
  }
  if (!(kmax > 0.0)) {
    kmin = 1.0;
    kmax = 10.0;
  }
  if (kmax <= kmin) kmax = kmin * 10.0;
  vmin = std::min(vmin, pcrlb_binary(static_cast<std::size_t>(kmax)));
  vmax = std::max(vmax, pcrlb_binary(static_cast<std::size_t>(kmin)));

  const double lx0 = std::floor(std::log10(kmin)), lx1 = std::ceil(std::log10(kmax));
  const double ly0 = std::floor(std::log10(vmin)), ly1 = std::max(std::ceil(std::log10(vmax)), ly0 + 1);
  auto px = [&](double k) { return left + (std::log10(k) - lx0) / std::max(lx1 - lx0, 1.0) * pw; };
  auto py = [&](double v) { return top + (ly1 - std::log10(v)) / (ly1 - ly0) * ph; };

  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n"
      << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = lx0; e <= std::max(lx1, lx0 + 1); e += 1.0) {
    const double x = px(std::pow(10.0, e));
    svg << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << top + ph
        << "\" stroke=\"#ddd\"/>\n<text x=\"" << x << "\" y=\"" << top + ph + 18
        << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
  }
  for (double e = ly0; e <= ly1; e += 1.0) {
    const double y = py(std::pow(10.0, e));
    svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + pw << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n<text x=\"" << left - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 16
      << "\" text-anchor=\"middle\">number of sensors K</text>\n"
      << "<text transform=\"translate(20," << top + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">MSE</text>\n";

  // PCRLB reference 4 / (pi^2 K).
  svg << "<polyline fill=\"none\" stroke=\"black\" stroke-dasharray=\"6,4\" points=\"";
  for (int i = 0; i <= 64; ++i) {
    const double k = std::pow(10.0, std::log10(kmin) + (std::log10(kmax) - std::log10(kmin)) * i / 64.0);
    svg << px(k) << ',' << py(4.0 / (std::numbers::pi * std::numbers::pi * k)) << ' ';
  }
  svg << "\"/>\n";
  double legend_y = top + 10;
  svg << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << legend_y << "\" x2=\"" << left + pw + 36
      << "\" y2=\"" << legend_y << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>"
      << "<text x=\"" << left + pw + 42 << "\" y=\"" << legend_y + 4 << "\">PCRLB</text>\n";

  std::size_t ci = 0;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* colour = colours[ci++ % std::size(colours)];
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [k, v] : pts) svg << px(k) << ',' << py(v) << ' ';
    svg << "\"/>\n";
    for (const auto& [k, v] : pts) {
      svg << "<circle cx=\"" << px(k) << "\" cy=\"" << py(v) << "\" r=\"3\" fill=\"" << colour
          << "\"/>\n";
    }
    legend_y += 18;
    svg << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << legend_y << "\" x2=\"" << left + pw + 36
        << "\" y2=\"" << legend_y << "\" stroke=\"" << colour << "\" stroke-width=\"1.5\"/>"
        << "<text x=\"" << left + pw + 42 << "\" y=\"" << legend_y + 4 << "\">" << name
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

ArtifactPaths emit_artifacts(std::vector<ResultRow> rows, const std::string& output_dir,
                             const std::string& tag,
                             const std::optional<std::vector<std::string>>& metrics) {
  if (metrics) {
    require(!metrics->empty(), ErrorCategory::configuration, "empty metric selection");
    for (const auto& m : *metrics) {
      require(is_metric(m), ErrorCategory::configuration, "unknown metric '" + m + "'");
    }
    std::erase_if(rows, [&](const ResultRow& r) {
      return std::find(metrics->begin(), metrics->end(), r.metric) == metrics->end();
    });
    require(!rows.empty(), ErrorCategory::configuration,
            "metric selection matches no result rows");
  }
  require(!rows.empty(), ErrorCategory::contract, "no result rows to emit");
  for (const auto& r : rows) {
    require(std::isfinite(r.value), ErrorCategory::numerical_integrity,
            "non-finite value in row " + r.key());
  }
  sort_rows(rows);

  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + output_dir + ": " + ec.message());
  const std::filesystem::path dir(output_dir);
  ArtifactPaths paths;
  paths.csv = (dir / ("results_" + tag + ".csv")).string();
  write_file(paths.csv, rows_to_csv(rows));

  std::map<double, std::vector<ResultRow>> by_snr;
  for (const auto& r : rows) by_snr[r.snr_db].push_back(r);
  for (const auto& [snr, group] : by_snr) {
    const std::string label = std::isinf(snr) ? "noiseless" : "SNR " + format_snr(snr) + " dB";
    const auto path = dir / ("mse_vs_K_" + tag + "_snr" + format_snr(snr) + ".svg");
    write_file(path, render_mse_plot(group, "Estimation MSE vs. K (" + label + ")"));
    paths.plots.push_back(path.string());
  }
  return paths;
}

}  // namespace distq
