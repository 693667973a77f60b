#include "fairbound/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <fmt/core.h>

#include "fairbound/csv.hpp"
#include "fairbound/error.hpp"
#include "fairbound/random.hpp"

namespace fairbound {

Dataset::Dataset(Eigen::MatrixXd features, Eigen::VectorXd outcome, Eigen::VectorXd proxy,
                 std::vector<std::int8_t> group, std::vector<std::int64_t> row_ids,
                 std::vector<std::string> feature_names)
    : features_(std::move(features)),
      outcome_(std::move(outcome)),
      proxy_(std::move(proxy)),
      group_(std::move(group)),
      row_ids_(std::move(row_ids)),
      feature_names_(std::move(feature_names)) {
  const auto n = static_cast<Eigen::Index>(row_ids_.size());
  if (features_.rows() != n || outcome_.size() != n || proxy_.size() != n ||
      static_cast<Eigen::Index>(group_.size()) != n) {
    throw Error(ErrorKind::kValidation, "dataset columns have mismatched lengths");
  }
  if (static_cast<Eigen::Index>(feature_names_.size()) != features_.cols()) {
    throw Error(ErrorKind::kValidation, "feature name count does not match feature columns");
  }
  if (!features_.allFinite()) throw Error(ErrorKind::kValidation, "non-finite feature value");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (outcome_[i] != 0.0 && outcome_[i] != 1.0) {
      throw Error(ErrorKind::kValidation, fmt::format("row {}: outcome must be 0 or 1", i + 1));
    }
    if (!(proxy_[i] >= 0.0 && proxy_[i] <= 1.0)) {
      throw Error(ErrorKind::kValidation, fmt::format("row {}: proxy {} outside [0,1]", i + 1, proxy_[i]));
    }
    const auto g = group_[static_cast<std::size_t>(i)];
    if (g != 0 && g != 1 && g != kUnlabeled) {
      throw Error(ErrorKind::kValidation, fmt::format("row {}: group must be 0, 1 or unlabeled", i + 1));
    }
  }
}

std::size_t Dataset::num_labeled() const {
  return static_cast<std::size_t>(std::count_if(group_.begin(), group_.end(),
                                                [](std::int8_t g) { return g != kUnlabeled; }));
}

std::vector<std::size_t> Dataset::labeled_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < group_.size(); ++i) {
    if (group_[i] != kUnlabeled) out.push_back(i);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
  const auto m = static_cast<Eigen::Index>(positions.size());
  Eigen::MatrixXd x(m, features_.cols());
  Eigen::VectorXd y(m), b(m);
  std::vector<std::int8_t> g(positions.size());
  std::vector<std::int64_t> ids(positions.size());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto p = positions[static_cast<std::size_t>(r)];
    if (p >= size()) throw Error(ErrorKind::kValidation, "subset position out of range");
    x.row(r) = features_.row(static_cast<Eigen::Index>(p));
    y[r] = outcome_[static_cast<Eigen::Index>(p)];
    b[r] = proxy_[static_cast<Eigen::Index>(p)];
    g[static_cast<std::size_t>(r)] = group_[p];
    ids[static_cast<std::size_t>(r)] = row_ids_[p];
  }
  return Dataset(std::move(x), std::move(y), std::move(b), std::move(g), std::move(ids), feature_names_);
}

Dataset Dataset::subset_by_ids(std::span<const std::int64_t> ids) const {
  std::unordered_map<std::int64_t, std::size_t> where;
  where.reserve(row_ids_.size());
  for (std::size_t i = 0; i < row_ids_.size(); ++i) where.emplace(row_ids_[i], i);
  std::vector<std::size_t> positions;
  positions.reserve(ids.size());
  for (auto id : ids) {
    auto it = where.find(id);
    if (it == where.end()) throw Error(ErrorKind::kValidation, fmt::format("unknown row id {}", id));
    positions.push_back(it->second);
  }
  return subset(positions);
}

Dataset Dataset::keep_labels_for(std::span<const std::int64_t> ids) const {
  std::vector<std::int64_t> keep(ids.begin(), ids.end());
  std::sort(keep.begin(), keep.end());
  std::vector<std::int8_t> g(group_.size(), kUnlabeled);
  for (std::size_t i = 0; i < group_.size(); ++i) {
    if (std::binary_search(keep.begin(), keep.end(), row_ids_[i])) g[i] = group_[i];
  }
  return Dataset(features_, outcome_, proxy_, std::move(g), row_ids_, feature_names_);
}

Dataset Dataset::with_proxy(Eigen::VectorXd proxy) const {
  return Dataset(features_, outcome_, std::move(proxy), group_, row_ids_, feature_names_);
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  const CsvTable table = read_csv_table(path);

  auto require = [&](const std::string& name) {
    auto idx = table.column(name);
    if (!idx) {
      throw Error(ErrorKind::kMissingColumn,
                  fmt::format("'{}': missing column '{}'", path.string(), name));
    }
    return *idx;
  };
  const std::size_t y_col = require(schema.outcome);
  const std::size_t b_col = require(schema.proxy);
  std::optional<std::size_t> g_col;
  if (!schema.protected_attr.empty()) g_col = table.column(schema.protected_attr);

  std::vector<std::size_t> x_cols;
  std::vector<std::string> names;
  if (schema.features.empty()) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == y_col || c == b_col || (g_col && c == *g_col)) continue;
      x_cols.push_back(c);
      names.push_back(table.header[c]);
    }
  } else {
    for (const auto& f : schema.features) {
      x_cols.push_back(require(f));
      names.push_back(f);
    }
  }

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(x_cols.size()));
  Eigen::VectorXd y(n), b(n);
  std::vector<std::int8_t> g(table.rows.size(), kUnlabeled);
  std::vector<std::int64_t> ids(table.rows.size());

  auto number = [&](std::size_t row, std::size_t col) {
    auto v = parse_double(table.rows[row][col]);
    if (!v) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("'{}' row {}: column '{}' has non-numeric or missing value '{}'",
                              path.string(), row + 1, table.header[col], table.rows[row][col]));
    }
    return *v;
  };

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    ids[r] = static_cast<std::int64_t>(r);
    for (std::size_t k = 0; k < x_cols.size(); ++k) x(ri, static_cast<Eigen::Index>(k)) = number(r, x_cols[k]);
    y[ri] = number(r, y_col);
    if (y[ri] != 0.0 && y[ri] != 1.0) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("'{}' row {}: outcome '{}' is not binary", path.string(), r + 1, table.rows[r][y_col]));
    }
    b[ri] = number(r, b_col);
    if (b[ri] < 0.0 || b[ri] > 1.0) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("'{}' row {}: proxy {} outside [0,1]", path.string(), r + 1, table.rows[r][b_col]));
    }
    if (g_col && !trim(table.rows[r][*g_col]).empty()) {
      const double v = number(r, *g_col);
      if (v != 0.0 && v != 1.0) {
        throw Error(ErrorKind::kValidation,
                    fmt::format("'{}' row {}: protected attribute '{}' is not binary", path.string(), r + 1,
                                table.rows[r][*g_col]));
      }
      g[r] = static_cast<std::int8_t>(v);
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(b), std::move(g), std::move(ids), std::move(names));
}

void write_csv(const Dataset& ds, const std::filesystem::path& path, const Schema& schema) {
  CsvTable table;
  table.header = ds.feature_names();
  table.header.push_back(schema.outcome);
  table.header.push_back(schema.proxy);
  const bool with_group = !schema.protected_attr.empty();
  if (with_group) table.header.push_back(schema.protected_attr);

  table.rows.reserve(ds.size());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    std::vector<std::string> row;
    row.reserve(table.header.size());
    for (Eigen::Index c = 0; c < ds.num_features(); ++c) row.push_back(format_double(ds.features()(ri, c)));
    row.push_back(format_double(ds.outcome()[ri]));
    row.push_back(format_double(ds.proxy()[ri]));
    if (with_group) row.push_back(ds.is_labeled(r) ? std::to_string(ds.group()[r]) : std::string());
    table.rows.push_back(std::move(row));
  }
  write_csv_table(table, path);
}

Split make_split(const Dataset& ds, double train_frac, double labeled_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw Error(ErrorKind::kValidation, "train fraction must lie in (0,1)");
  }
  if (!(labeled_frac > 0.0 && labeled_frac <= train_frac)) {
    throw Error(ErrorKind::kValidation, "labeled fraction must lie in (0, train fraction]");
  }
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  const auto n_labeled =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(labeled_frac * static_cast<double>(n))));
  if (n_train == 0 || n_train >= n) {
    throw Error(ErrorKind::kValidation, fmt::format("a {} train fraction of {} rows leaves an empty side", train_frac, n));
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Engine split_rng = make_engine(seed, "split");
  std::shuffle(order.begin(), order.end(), split_rng);

  Split split;
  split.seed = seed;
  std::vector<std::int64_t> candidates;
  for (std::size_t k = 0; k < n; ++k) {
    const auto pos = order[k];
    const auto id = ds.row_ids()[pos];
    if (k < n_train) {
      split.train_ids.push_back(id);
      if (ds.is_labeled(pos)) candidates.push_back(id);
    } else {
      split.test_ids.push_back(id);
    }
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  std::sort(candidates.begin(), candidates.end());

  if (candidates.size() < n_labeled) {
    throw Error(ErrorKind::kInsufficientLabels,
                fmt::format("labeled subset needs {} rows but only {} training rows carry a protected label",
                            n_labeled, candidates.size()));
  }
  Engine label_rng = make_engine(seed, "labeled");
  std::shuffle(candidates.begin(), candidates.end(), label_rng);
  split.labeled_ids.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_labeled));
  std::sort(split.labeled_ids.begin(), split.labeled_ids.end());
  return split;
}

}  // namespace fairbound
