#include "fairbound/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/core.h>

#include "fairbound/error.hpp"
#include "fairbound/random.hpp"

namespace fairbound {
namespace {

struct Row {
  std::vector<double> z;
  double b = 0.0;
  int group = 0;
};

Row draw_primitives(const DgpConfig& c, Engine& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Row r;
  r.z.resize(static_cast<std::size_t>(c.m));
  double mean = 0.0;
  for (auto& v : r.z) {
    v = unif(rng);
    mean += v;
  }
  mean /= c.m;
  std::normal_distribution<double> noise(mean <= c.proxy_threshold() ? c.proxy_mean_lo : c.proxy_mean_hi,
                                         c.proxy_sd);
  r.b = std::clamp(noise(rng), 0.0, 1.0);
  r.group = unif(rng) < r.b ? 1 : 0;
  return r;
}

double feature(const GroundTruth& g, std::size_t i, const Row& r) {
  double base = 0.0;
  for (std::size_t j = 0; j < r.z.size(); ++j) base += g.mix[i][j] * r.z[j];
  double x = 0.0, power = 1.0;
  for (double c : g.poly[i]) {
    power *= base;
    x += c * power;
  }
  return x + g.gamma[i] * r.group;
}

double raw_score(const GroundTruth& g, const std::vector<double>& x, int group) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += g.d[i] * x[i] + g.d_B[i] * group;
  return s;
}

GroundTruth draw_coefficients(const DgpConfig& c) {
  Engine rng = make_engine(c.seed, "coefficients");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> degree(0, c.degree_max);
  std::exponential_distribution<double> expo(1.0);
  GroundTruth g;
  for (int i = 0; i < c.p; ++i) {
    const int h = degree(rng);
    g.degree.push_back(h);
    std::vector<double> poly(static_cast<std::size_t>(h));
    for (auto& v : poly) v = unif(rng);
    g.poly.push_back(std::move(poly));
    // Normalized exponentials are uniform on the simplex.
    std::vector<double> w(static_cast<std::size_t>(c.m));
    double total = 0.0;
    for (auto& v : w) total += (v = expo(rng));
    for (auto& v : w) v /= total;
    g.mix.push_back(std::move(w));
    g.gamma.push_back(c.u_B * unif(rng));
    g.d.push_back(unif(rng));
    g.d_B.push_back(c.u_B * unif(rng));
  }
  return g;
}

}  // namespace

DgpConfig DgpConfig::preset(int p, std::size_t n, std::uint64_t seed) {
  DgpConfig c;
  c.p = p;
  c.n = n;
  c.seed = seed;
  switch (p) {
    case 10: c.m = 4, c.tau = 0.4, c.u_B = 0.05; break;
    case 20: c.m = 5, c.tau = 0.4, c.u_B = 0.1; break;
    case 50: c.m = 10, c.tau = 0.425, c.u_B = 0.2; break;
    default:
      throw Error(ErrorKind::kUnsupported, fmt::format("no simulator preset for p={}; presets exist for 10, 20, 50", p));
  }
  return c;
}

double DgpConfig::proxy_threshold() const {
  return tau_b ? *tau_b : 0.5 + 1.2 * std::sqrt(1.0 / (12.0 * m));
}

void DgpConfig::validate() const {
  if (p < 1 || m < 1) throw Error(ErrorKind::kValidation, "simulator: p and m must be positive");
  if (n < 1) throw Error(ErrorKind::kValidation, "simulator: n must be positive");
  if (reference_rows < 2) throw Error(ErrorKind::kValidation, "simulator: reference sample needs 2+ rows");
  if (degree_max < 0) throw Error(ErrorKind::kValidation, "simulator: degree_max must be >= 0");
  if (!(u_B >= 0.0)) throw Error(ErrorKind::kValidation, "simulator: u_B must be >= 0");
  if (!(proxy_sd >= 0.0)) throw Error(ErrorKind::kValidation, "simulator: proxy_sd must be >= 0");
  for (double v : {noise_lo, noise_hi, tau}) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::kValidation, "simulator: rates and tau must lie in [0,1]");
  }
}

Simulation generate(const DgpConfig& config) {
  config.validate();
  GroundTruth g = draw_coefficients(config);
  const auto p = static_cast<std::size_t>(config.p);

  std::vector<double> x(p);
  auto compute_features = [&](const Row& r) {
    for (std::size_t i = 0; i < p; ++i) x[i] = feature(g, i, r);
  };

  g.score_min = std::numeric_limits<double>::infinity();
  g.score_max = -g.score_min;
  for (std::size_t r = 0; r < config.reference_rows; ++r) {
    Engine rng = make_engine(config.seed, "reference", r);
    const Row row = draw_primitives(config, rng);
    compute_features(row);
    const double s = raw_score(g, x, row.group);
    g.score_min = std::min(g.score_min, s);
    g.score_max = std::max(g.score_max, s);
  }
  const double range = g.score_max - g.score_min;

  const auto n = static_cast<Eigen::Index>(config.n);
  Eigen::MatrixXd X(n, config.p);
  Eigen::VectorXd y(n), b(n);
  std::vector<std::int8_t> group(config.n);
  std::vector<std::int64_t> ids(config.n);
  double y1 = 0.0, y0 = 0.0, n1 = 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index r = 0; r < n; ++r) {
    Engine rng = make_engine(config.seed, "row", static_cast<std::uint64_t>(r));
    const Row row = draw_primitives(config, rng);
    compute_features(row);
    const double s = raw_score(g, x, row.group);
    const double prob = range > 0.0 ? std::clamp((s - g.score_min) / range, 0.0, 1.0) : 0.0;
    const double rate = prob <= config.tau ? config.noise_lo : config.noise_hi;
    const double outcome = unif(rng) < rate ? 1.0 : 0.0;
    for (std::size_t i = 0; i < p; ++i) X(r, static_cast<Eigen::Index>(i)) = x[i];
    y[r] = outcome;
    b[r] = row.b;
    group[static_cast<std::size_t>(r)] = static_cast<std::int8_t>(row.group);
    ids[static_cast<std::size_t>(r)] = r;
    if (row.group == 1) {
      y1 += outcome;
      n1 += 1.0;
    } else {
      y0 += outcome;
    }
  }
  const double nn = static_cast<double>(n);
  g.base_rate_y = (y1 + y0) / nn;
  g.base_rate_B = n1 / nn;
  g.realized_dd = (n1 > 0 && n1 < nn) ? y1 / n1 - y0 / (nn - n1) : 0.0;

  std::vector<std::string> names;
  for (int i = 1; i <= config.p; ++i) names.push_back(fmt::format("x{}", i));
  return {Dataset(std::move(X), std::move(y), std::move(b), std::move(group), std::move(ids), std::move(names)),
          std::move(g)};
}

nlohmann::json to_json(const DgpConfig& c) {
  return {{"p", c.p},
          {"m", c.m},
          {"tau", c.tau},
          {"u_B", c.u_B},
          {"tau_b", c.proxy_threshold()},
          {"proxy_mean_lo", c.proxy_mean_lo},
          {"proxy_mean_hi", c.proxy_mean_hi},
          {"proxy_sd", c.proxy_sd},
          {"noise_lo", c.noise_lo},
          {"noise_hi", c.noise_hi},
          {"degree_max", c.degree_max},
          {"n", c.n},
          {"seed", c.seed},
          {"reference_rows", c.reference_rows}};
}

nlohmann::json to_json(const GroundTruth& g) {
  return {{"degree", g.degree},
          {"poly", g.poly},
          {"mix", g.mix},
          {"gamma", g.gamma},
          {"d", g.d},
          {"d_B", g.d_B},
          {"score_min", g.score_min},
          {"score_max", g.score_max},
          {"realized_dd", g.realized_dd},
          {"base_rate_y", g.base_rate_y},
          {"base_rate_B", g.base_rate_B}};
}

}  // namespace fairbound
