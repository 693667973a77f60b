#pragma once

#include "fairbound/dataset.hpp"
#include "fairbound/model.hpp"
#include "fairbound/trainer.hpp"

namespace fairbound {

/// Exact minimizer, for fixed duals, of the positive-side demographic-parity
/// Lagrangian of a linear regression with summed squared error:
///
///   sum_i (y_i - x_i'beta)^2 + mu_L (D^L(X beta) - alpha)
///     - mu_bB C_{f,b|B}(X beta) - mu_Bb C_{f,B|b}(X beta)
///
/// where x carries an appended intercept. Every constraint is linear in beta, so
///   beta = 1/2 (X'X)^{-1} [2 X'y - mu_L c_L + mu_bB c_bB + mu_Bb c_Bb]
/// with c_L = X'(b - bbar) / sum (b - bbar)^2 over all rows and
/// c_bB, c_Bb the per-row covariance weights over labeled rows
/// ((b_i - bbar^{B_i}) / n_L and (B_i - Bbar^{bin(i)}) / n_L). alpha only shifts the
/// objective by a constant and therefore does not appear.
///
/// Throws kSingularMatrix when X'X is not invertible, kDegenerateVariance for
/// constant b, kInsufficientLabels when covariance duals are set without labels.
Model closed_form_linear(const Dataset& train, const DualState& duals, int n_bins = 10);

}  // namespace fairbound
