#include "fairbound/closed_form.hpp"

#include <Eigen/QR>

#include "fairbound/error.hpp"
#include "fairbound/estimators.hpp"

namespace fairbound {

Model closed_form_linear(const Dataset& train, const DualState& duals, int n_bins) {
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const Eigen::Index p = train.num_features();
  if (n == 0) throw Error(ErrorKind::kValidation, "closed form: empty training set");
  Eigen::MatrixXd X(n, p + 1);
  X << train.features(), Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd& b = train.proxy();

  // Every right-hand-side term has the form X'v, so beta = (1/2) argmin |X beta - v| and the
  // system is solved by QR on X instead of forming the Gram matrix.
  Eigen::VectorXd v = 2.0 * train.outcome();

  if (duals.mu_L != 0.0) {
    const Eigen::VectorXd centred = b.array() - b.mean();
    const double sbb = centred.squaredNorm();
    if (!(sbb > 0.0)) throw Error(ErrorKind::kDegenerateVariance, "closed form: proxy is constant");
    v -= duals.mu_L * centred / sbb;
  }

  if (duals.mu_b_given_B != 0.0 || duals.mu_B_given_b != 0.0) {
    const auto labeled = train.labeled_positions();
    if (labeled.size() < 2) throw Error(ErrorKind::kInsufficientLabels, "closed form: fewer than 2 labeled rows");
    const auto nl = static_cast<double>(labeled.size());
    std::vector<double> bl, Bl;
    std::vector<std::int64_t> keys;
    double sum_b[2] = {0, 0}, cnt[2] = {0, 0};
    for (auto i : labeled) {
      const auto g = train.group()[i];
      bl.push_back(b[static_cast<Eigen::Index>(i)]);
      Bl.push_back(g);
      keys.push_back(train.row_ids()[i]);
      sum_b[g] += b[static_cast<Eigen::Index>(i)];
      cnt[g] += 1.0;
    }
    const auto bins = quantile_bins(bl, n_bins, keys);
    std::vector<double> bin_B(static_cast<std::size_t>(n_bins), 0.0), bin_n(bin_B.size(), 0.0);
    for (std::size_t k = 0; k < bl.size(); ++k) {
      bin_B[static_cast<std::size_t>(bins[k])] += Bl[k];
      bin_n[static_cast<std::size_t>(bins[k])] += 1.0;
    }
    for (std::size_t k = 0; k < labeled.size(); ++k) {
      const auto g = static_cast<std::size_t>(Bl[k]);
      const auto j = static_cast<std::size_t>(bins[k]);
      v[static_cast<Eigen::Index>(labeled[k])] += duals.mu_b_given_B * (bl[k] - sum_b[g] / cnt[g]) / nl +
                                                   duals.mu_B_given_b * (Bl[k] - bin_B[j] / bin_n[j]) / nl;
    }
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p + 1) throw Error(ErrorKind::kSingularMatrix, "closed form: X'X is singular");
  const Eigen::VectorXd beta = 0.5 * qr.solve(v);
  return Model(ModelFamily::kLinearRegression, p, beta);
}

}  // namespace fairbound
