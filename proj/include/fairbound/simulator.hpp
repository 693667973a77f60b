#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairbound/dataset.hpp"

namespace fairbound {

/// Parameters of the synthetic population.
///
/// Per row: primitives Z_1..Z_m ~ U[0,1]; proxy b = clip(N(mu, sd)) with
/// mu = proxy_mean_lo when mean(Z) <= tau_b and proxy_mean_hi otherwise;
/// group B ~ Bernoulli(b); features X_i = sum_{k<=h_i} c_ik (w_i'Z)^k + gamma_i B;
/// score P~ = sum_i (d_i X_i + d_iB B), min-max normalized; outcome
/// Y ~ Bernoulli(noise_lo) when P <= tau, else Bernoulli(noise_hi).
struct DgpConfig {
  int p = 10;
  int m = 4;
  double tau = 0.4;
  double u_B = 0.05;
  /// Threshold on mean(Z); defaults to 1/2 + 1.2 sqrt(1/(12 m)), i.e. 1.2 standard
  /// deviations of the Irwin-Hall mean above its centre.
  std::optional<double> tau_b;
  double proxy_mean_lo = 0.1;
  double proxy_mean_hi = 0.9;
  double proxy_sd = 0.2;
  double noise_lo = 0.1;
  double noise_hi = 0.9;
  int degree_max = 3;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  /// Rows of the separate reference sample whose P~ range fixes the normalization.
  std::size_t reference_rows = 50000;

  /// Presets for p in {10, 20, 50}; throws kUnsupported otherwise.
  static DgpConfig preset(int p, std::size_t n = 10000, std::uint64_t seed = 0);
  double proxy_threshold() const;
  void validate() const;
};

/// Population-level coefficients, drawn once per config from (seed, "coefficients").
struct GroundTruth {
  std::vector<int> degree;                      // h_i
  std::vector<std::vector<double>> poly;        // c_i1..c_ih_i
  std::vector<std::vector<double>> mix;         // w_i on the simplex over Z
  std::vector<double> gamma;                    // direct B effect on X_i
  std::vector<double> d;                        // weight of X_i in P~
  std::vector<double> d_B;                      // weight of B in P~
  double score_min = 0.0;                       // reference range of P~
  double score_max = 0.0;
  double realized_dd = 0.0;                     // mean Y | B=1 minus mean Y | B=0
  double base_rate_y = 0.0;
  double base_rate_B = 0.0;
};

struct Simulation {
  Dataset data;   // every row labeled; b is the exact Pr[B=1 | Z]
  GroundTruth truth;
};

/// Rows are independent draws from per-row streams (seed, "row", index), so a
/// larger n extends a smaller one without changing its rows.
Simulation generate(const DgpConfig& config);

nlohmann::json to_json(const DgpConfig& c);
nlohmann::json to_json(const GroundTruth& g);

}  // namespace fairbound
