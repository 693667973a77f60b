#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace fairbound {

/// Group value of a row whose protected attribute was not observed.
inline constexpr std::int8_t kUnlabeled = -1;

/// Column-name map used to read a dataset from CSV.
struct Schema {
  /// Feature columns; empty means "every column not claimed below", in file order.
  std::vector<std::string> features;
  std::string outcome = "y";
  std::string proxy = "b";
  /// Protected-attribute column; empty means the file carries none.
  std::string protected_attr = "B";
};

/// Rows of (features X, binary outcome Y, proxy probability b, optional group B).
///
/// Immutable after construction; the constructor enforces the invariants
/// (finite values, binary outcome, proxy in [0,1], group in {0,1,unlabeled}).
class Dataset {
 public:
  Dataset() = default;
  Dataset(Eigen::MatrixXd features, Eigen::VectorXd outcome, Eigen::VectorXd proxy,
          std::vector<std::int8_t> group, std::vector<std::int64_t> row_ids,
          std::vector<std::string> feature_names);

  std::size_t size() const { return row_ids_.size(); }
  Eigen::Index num_features() const { return features_.cols(); }

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& outcome() const { return outcome_; }
  const Eigen::VectorXd& proxy() const { return proxy_; }
  std::span<const std::int8_t> group() const { return group_; }
  std::span<const std::int64_t> row_ids() const { return row_ids_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  bool is_labeled(std::size_t i) const { return group_[i] != kUnlabeled; }
  std::size_t num_labeled() const;
  std::vector<std::size_t> labeled_positions() const;

  /// Rows at the given positions, in the given order, ids preserved.
  Dataset subset(std::span<const std::size_t> positions) const;
  /// Rows with the given ids, in the given order.
  Dataset subset_by_ids(std::span<const std::int64_t> ids) const;
  /// Copy in which only rows whose id is listed keep their group label.
  Dataset keep_labels_for(std::span<const std::int64_t> ids) const;
  /// Copy with a replaced proxy column (values validated).
  Dataset with_proxy(Eigen::VectorXd proxy) const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd outcome_;
  Eigen::VectorXd proxy_;
  std::vector<std::int8_t> group_;
  std::vector<std::int64_t> row_ids_;
  std::vector<std::string> feature_names_;
};

/// Loads a dataset. Row ids are 0-based load order. An empty protected cell marks
/// the row unlabeled. Validation errors name the 1-based data row.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema = {});

/// Writes features, outcome, proxy and (when `schema.protected_attr` is non-empty)
/// the group column. Values use shortest round-trip formatting.
void write_csv(const Dataset& ds, const std::filesystem::path& path, const Schema& schema = {});

/// Disjoint train/test ids plus the labeled subset drawn from train.
struct Split {
  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> test_ids;
  std::vector<std::int64_t> labeled_ids;
  std::uint64_t seed = 0;

  bool operator==(const Split&) const = default;
};

/// Deterministic split. `labeled_frac` is a fraction of the total row count;
/// labeled rows are drawn uniformly without replacement from train rows that
/// carry a group label.
Split make_split(const Dataset& ds, double train_frac, double labeled_frac, std::uint64_t seed);

}  // namespace fairbound
