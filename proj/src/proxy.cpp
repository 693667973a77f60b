#include "fairbound/proxy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "fairbound/csv.hpp"
#include "fairbound/dataset.hpp"
#include "fairbound/error.hpp"

namespace fairbound {

std::string LikelihoodTable::normalize_key(std::string_view key) {
  std::string out(trim(key));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void LikelihoodTable::insert(std::string_view key, LikelihoodPair value) {
  for (double p : {value.given_positive, value.given_negative}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorKind::kValidation, fmt::format("likelihood {} for key '{}' outside [0,1]", p, key));
    }
  }
  entries_[normalize_key(key)] = value;
}

std::optional<LikelihoodPair> LikelihoodTable::find(std::string_view key) const {
  auto it = entries_.find(normalize_key(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

LikelihoodTable load_likelihood_table(const std::filesystem::path& path) {
  const CsvTable csv = read_csv_table(path);
  const auto key = csv.column("key");
  const auto p1 = csv.column("p_given_B1");
  const auto p0 = csv.column("p_given_B0");
  if (!key || !p1 || !p0) {
    throw Error(ErrorKind::kMissingColumn,
                fmt::format("{}: proxy table needs columns key, p_given_B1, p_given_B0", path.string()));
  }
  LikelihoodTable table;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const auto v1 = parse_double(row[*p1]);
    const auto v0 = parse_double(row[*p0]);
    if (!v1 || !v0) {
      throw Error(ErrorKind::kValidation, fmt::format("{}: row {}: non-numeric likelihood", path.string(), r + 1));
    }
    try {
      table.insert(row[*key], {*v1, *v0});
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("{}: row {}: {}", path.string(), r + 1, e.what()));
    }
  }
  return table;
}

std::string_view to_string(ProxyMethod m) {
  switch (m) {
    case ProxyMethod::kBifsg: return "bifsg";
    case ProxyMethod::kBisg: return "bisg";
    case ProxyMethod::kBifg: return "bifg";
    case ProxyMethod::kGeographyOnly: return "geo";
  }
  return "geo";
}

Posterior posterior(std::optional<std::string_view> first, std::optional<std::string_view> surname,
                    std::optional<std::string_view> geo, const ProxyTables& tables) {
  if (!(tables.prior > 0.0 && tables.prior < 1.0)) {
    throw Error(ErrorKind::kValidation, fmt::format("prior {} must lie strictly between 0 and 1", tables.prior));
  }
  auto lookup = [](const std::optional<std::string_view>& key, const LikelihoodTable& table) {
    std::optional<LikelihoodPair> out;
    if (key && !trim(*key).empty()) out = table.find(*key);
    return out;
  };
  const auto g = lookup(geo, tables.geography);
  if (!g) {
    throw Error(ErrorKind::kUnresolvableRecord,
                fmt::format("geography '{}' not found", geo ? std::string(*geo) : std::string()));
  }
  const auto f = lookup(first, tables.first_name);
  const auto s = lookup(surname, tables.surname);

  double num = tables.prior * g->given_positive;
  double alt = (1.0 - tables.prior) * g->given_negative;
  if (f) {
    num *= f->given_positive;
    alt *= f->given_negative;
  }
  if (s) {
    num *= s->given_positive;
    alt *= s->given_negative;
  }
  if (!(num + alt > 0.0)) {
    throw Error(ErrorKind::kUnresolvableRecord, "all class likelihoods are zero for this record");
  }
  Posterior out;
  out.probability = num / (num + alt);
  out.method = f && s ? ProxyMethod::kBifsg
               : s    ? ProxyMethod::kBisg
               : f    ? ProxyMethod::kBifg
                      : ProxyMethod::kGeographyOnly;
  return out;
}

namespace {

double rank_auc(const std::vector<double>& score, const std::vector<int>& label) {
  const std::size_t n = score.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return score[a] < score[c]; });
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && score[order[hi + 1]] == score[order[lo]]) ++hi;
    const double avg_rank = 0.5 * static_cast<double>(lo + hi) + 1.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      if (label[order[k]] == 1) {
        positive_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    lo = hi + 1;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorKind::kValidation, "AUC needs both groups among the labeled rows");
  }
  const double np = static_cast<double>(n_pos);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace

CalibrationReport calibration_report(std::span<const double> b, std::span<const std::int8_t> group, int n_bins) {
  if (b.size() != group.size()) throw Error(ErrorKind::kValidation, "proxy and group lengths differ");
  if (n_bins < 1) throw Error(ErrorKind::kValidation, "bin count must be at least 1");
  std::vector<double> score;
  std::vector<int> label;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (group[i] == kUnlabeled) continue;
    score.push_back(b[i]);
    label.push_back(group[i]);
  }
  if (score.empty()) throw Error(ErrorKind::kInsufficientLabels, "calibration report: no labeled rows");
  if (score.size() < static_cast<std::size_t>(n_bins)) {
    throw Error(ErrorKind::kInsufficientLabels,
                fmt::format("calibration report: {} labeled rows for {} bins", score.size(), n_bins));
  }

  CalibrationReport r;
  const auto k = static_cast<std::size_t>(n_bins);
  r.bin_edges.resize(k + 1);
  for (std::size_t j = 0; j <= k; ++j) r.bin_edges[j] = static_cast<double>(j) / static_cast<double>(k);
  r.counts.assign(k, 0);
  std::vector<double> sum_b(k, 0.0), sum_B(k, 0.0);
  std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    const auto j = std::min(k - 1, static_cast<std::size_t>(score[i] * static_cast<double>(k)));
    ++r.counts[j];
    sum_b[j] += score[i];
    sum_B[j] += label[i];
    const bool predicted = score[i] >= 0.5;
    const bool actual = label[i] == 1;
    if (predicted == actual) ++correct;
    if (predicted && actual) ++tp;
    if (predicted && !actual) ++fp;
    if (!predicted && actual) ++fn;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t j = 0; j < k; ++j) {
    const auto c = static_cast<double>(r.counts[j]);
    r.predicted_mean.push_back(r.counts[j] ? sum_b[j] / c : nan);
    r.empirical_mean.push_back(r.counts[j] ? sum_B[j] / c : nan);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(score.size());
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.auc = rank_auc(score, label);
  return r;
}

nlohmann::json to_json(const CalibrationReport& r) {
  auto nullable = [](const std::vector<double>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (double x : v) out.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
    return out;
  };
  return {{"bin_edges", r.bin_edges},
          {"counts", r.counts},
          {"predicted_mean", nullable(r.predicted_mean)},
          {"empirical_mean", nullable(r.empirical_mean)},
          {"auc", r.auc},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall}};
}

Recalibration recalibrate(std::span<const double> b, std::span<const std::int8_t> group) {
  if (b.size() != group.size()) throw Error(ErrorKind::kValidation, "proxy and group lengths differ");
  double sb = 0.0, sB = 0.0;
  std::size_t n = 0;
  double bmin = std::numeric_limits<double>::infinity(), bmax = -bmin;
  bool has0 = false, has1 = false;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (group[i] == kUnlabeled) continue;
    ++n;
    sb += b[i];
    sB += group[i];
    bmin = std::min(bmin, b[i]);
    bmax = std::max(bmax, b[i]);
    (group[i] == 1 ? has1 : has0) = true;
  }
  if (n < 2) throw Error(ErrorKind::kInsufficientLabels, "recalibration needs at least 2 labeled rows");
  if (bmin == bmax) throw Error(ErrorKind::kDegenerateVariance, "recalibration: proxy is constant on labeled rows");
  const double bbar = sb / static_cast<double>(n), Bbar = sB / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (group[i] == kUnlabeled) continue;
    sxy += (b[i] - bbar) * (group[i] - Bbar);
    sxx += (b[i] - bbar) * (b[i] - bbar);
  }
  Recalibration out;
  out.slope = sxy / sxx;
  out.intercept = Bbar - out.slope * bbar;
  out.degenerate = !(has0 && has1);
  out.values.resize(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) {
    out.values[static_cast<Eigen::Index>(i)] = std::clamp(out.intercept + out.slope * b[i], 0.0, 1.0);
  }
  return out;
}

}  // namespace fairbound
