#include "fairbound/population.hpp"

#include <map>

#include <fmt/core.h>

#include "fairbound/error.hpp"

namespace fairbound {
namespace {

void validate_cells(std::span<const ZCell> cells) {
  if (cells.empty()) throw Error(ErrorKind::kValidation, "population has no cells");
  if (cells.size() > kMaxPopulationCells) {
    throw Error(ErrorKind::kValidation,
                fmt::format("population has {} cells; at most {} are supported", cells.size(), kMaxPopulationCells));
  }
  std::int64_t total = 0;
  for (const auto& c : cells) {
    if (c.count < 0 || c.positives < 0 || c.positives > c.count) {
      throw Error(ErrorKind::kValidation, "population cell needs 0 <= positives <= count");
    }
    total += c.count;
  }
  if (total == 0) throw Error(ErrorKind::kValidation, "population is empty");
}

}  // namespace

std::vector<PopulationAtom> enumerate_population(std::span<const ZCell> cells, const PredictionRule& f) {
  validate_cells(cells);
  double total = 0.0;
  for (const auto& c : cells) total += static_cast<double>(c.count);
  std::vector<PopulationAtom> atoms;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    if (c.count == 0) continue;
    const double b = static_cast<double>(c.positives) / static_cast<double>(c.count);
    const std::int64_t by_group[2] = {c.count - c.positives, c.positives};
    for (int g = 0; g < 2; ++g) {
      if (by_group[g] == 0) continue;
      atoms.push_back({k, g, b, f(k, g), static_cast<double>(by_group[g]) / total});
    }
  }
  return atoms;
}

PopulationMoments population_moments(std::span<const PopulationAtom> atoms) {
  double w1 = 0, w0 = 0, f1 = 0, f0 = 0, eb = 0, ebf = 0, ef = 0, eB = 0, ebb = 0;
  for (const auto& a : atoms) {
    (a.group ? w1 : w0) += a.weight;
    (a.group ? f1 : f0) += a.weight * a.f;
    eb += a.weight * a.b;
    ebf += a.weight * a.b * a.f;
    ef += a.weight * a.f;
    eB += a.weight * a.group;
    ebb += a.weight * a.b * a.b;
  }
  PopulationMoments m;
  if (w1 <= 0.0 || w0 <= 0.0) throw Error(ErrorKind::kEmptyGroup, "population lacks one of the groups");
  m.d_true = f1 / w1 - f0 / w0;
  m.d_prob = ebf / eb - (ef - ebf) / (1.0 - eb);
  m.var_b = ebb - eb * eb;
  m.var_B = eB - eB * eB;
  if (!(m.var_b > 0.0)) throw Error(ErrorKind::kDegenerateVariance, "population proxy is constant");
  m.d_lin = (ebf - eb * ef) / m.var_b;

  // E[Cov(f, B | b)]: strata grouped by exact b value.
  struct Acc {
    double w = 0, f = 0, B = 0, fB = 0, b = 0, fb = 0;
  };
  std::map<double, Acc> by_b;
  Acc by_group[2];
  for (const auto& a : atoms) {
    auto& s = by_b[a.b];
    s.w += a.weight;
    s.f += a.weight * a.f;
    s.B += a.weight * a.group;
    s.fB += a.weight * a.f * a.group;
    auto& t = by_group[a.group];
    t.w += a.weight;
    t.f += a.weight * a.f;
    t.b += a.weight * a.b;
    t.fb += a.weight * a.f * a.b;
  }
  for (const auto& [b, s] : by_b) {
    m.e_cov_f_B_given_b += s.fB - s.f * s.B / s.w;
  }
  for (const auto& t : by_group) {
    m.e_cov_f_b_given_B += t.fb - t.f * t.b / t.w;
  }
  return m;
}

ExpandedPopulation expand_population(std::span<const ZCell> cells, const PredictionRule& f) {
  validate_cells(cells);
  ExpandedPopulation out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    if (c.count == 0) continue;
    const double b = static_cast<double>(c.positives) / static_cast<double>(c.count);
    for (std::int64_t i = 0; i < c.count; ++i) {
      const int g = i < c.positives ? 1 : 0;
      out.f.push_back(f(k, g));
      out.b.push_back(b);
      out.group.push_back(static_cast<std::int8_t>(g));
      out.cell.push_back(k);
    }
  }
  return out;
}

}  // namespace fairbound
