#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fairbound {

/// A discrete value of the proxy features Z, described by how many population
/// members with that value belong to each group. b(Z) = positives / count exactly.
struct ZCell {
  std::int64_t count = 0;
  std::int64_t positives = 0;
};

inline constexpr std::size_t kMaxPopulationCells = 12;

/// Value of the statistic f for every member of (cell, group); f may be any real.
using PredictionRule = std::function<double(std::size_t cell, int group)>;

/// One (cell, group) stratum with its population weight.
struct PopulationAtom {
  std::size_t cell = 0;
  int group = 0;
  double b = 0.0;
  double f = 0.0;
  double weight = 0.0;
};

/// Strata of a finite population with weights summing to 1. Empty strata are
/// omitted. Throws kValidation for more than kMaxPopulationCells cells, an empty
/// population, or counts that do not satisfy 0 <= positives <= count.
std::vector<PopulationAtom> enumerate_population(std::span<const ZCell> cells, const PredictionRule& f);

/// Expectations of the population, computed directly from the weighted strata
/// (conditioning on b groups strata by their exact b value).
struct PopulationMoments {
  double d_true = 0.0;            // E[f | B=1] - E[f | B=0]
  double d_prob = 0.0;            // E[b f]/E[b] - E[(1-b) f]/E[1-b]
  double d_lin = 0.0;             // Cov(f, b) / Var(b)
  double var_B = 0.0;
  double var_b = 0.0;
  double e_cov_f_B_given_b = 0.0;
  double e_cov_f_b_given_B = 0.0;
};

PopulationMoments population_moments(std::span<const PopulationAtom> atoms);

/// The population as individual rows (each stratum repeated `count` times), so
/// sample estimators with the divide-by-n convention reproduce population values.
struct ExpandedPopulation {
  std::vector<double> f;
  std::vector<double> b;
  std::vector<std::int8_t> group;
  std::vector<std::size_t> cell;
};

ExpandedPopulation expand_population(std::span<const ZCell> cells, const PredictionRule& f);

}  // namespace fairbound
