#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "hfu/hierarchy.hpp"

namespace hfu {

/// A stationary, invertible ARMA(p,q) model with process mean handling:
///   (y_t - mean) = sum_j ar[j] (y_{t-j} - mean) + e_t + sum_i ma[i] e_{t-i}
/// All AR and MA polynomial roots lie strictly outside the unit circle and
/// sigma2 > 0.
struct ArmaModel {
    int p = 0;
    int q = 0;
    std::vector<double> ar;
    std::vector<double> ma;
    double mean = 0.0;
    double sigma2 = 1.0;
    int level = 0;         // aggregation level the model was fitted on, 0 if n/a
    int train_length = 0;  // observations used for fitting, 0 if n/a

    /// Throws FitFailureError when stationarity/invertibility/sigma2 fail.
    void validate() const;
};

/// Moduli of the inverse roots of 1 - a_1 B - ... - a_n B^n. Stationarity
/// (or invertibility with a_i = -theta_i) means all moduli < 1.
std::vector<double> inverse_root_moduli(const std::vector<double>& coeffs);

bool is_stationary(const std::vector<double>& ar);
bool is_invertible(const std::vector<double>& ma);

/// Rescales any offending root of the AR polynomial to radius 1.01 and
/// returns the rebuilt coefficients. Identity for already-stationary input.
std::vector<double> project_to_stationary(const std::vector<double>& ar);

/// Conditional-sum-of-squares residuals of a centered series under the
/// model's AR/MA coefficients: e_t = 0 for t < p, afterwards the one-step
/// innovation with unavailable MA lags treated as zero.
std::vector<double> css_residuals(const ArmaModel& model, const std::vector<double>& centered);

/// Fits an ARMA(p,q) by least squares on the lagged design (q = 0) or by
/// conditional-sum-of-squares minimization initialized from a long-AR
/// approximation (q > 0). The mean is estimated by the sample mean and the
/// series centred before the recursion.
ArmaModel fit_arma(const std::vector<double>& series, int p, int q);

/// Fits all (p,q) combinations up to (max_p, max_q) and returns the minimum
/// AICc model, AICc = n log(sigma2_hat) + 2 k n / (n - k - 1) with
/// k = p + q + 2. Ties go to smaller p+q, then smaller p.
ArmaModel select_order_aicc(const std::vector<double>& series, int max_p = 3, int max_q = 3);

/// Recursive point forecasts conditioning on the given history; innovations
/// beyond the history are zero and history residuals come from CSS filtering.
std::vector<double> forecast(const ArmaModel& model, const std::vector<double>& history, int h);

/// Multi-step forecasts of periods i_begin..i_end (1-based, period_len steps
/// each), each conditioned on the series up to that period's start. Residuals
/// are filtered once, so this equals calling forecast on every prefix.
std::vector<std::vector<double>> rolling_period_forecasts(const ArmaModel& model,
                                                          const std::vector<double>& series,
                                                          int period_len, int i_begin, int i_end);

/// Algorithm step 1: per level the first floor(z/k) slots hold the new
/// observations (the tail of the supplied history) and the remaining slots
/// hold forecasts conditioned on the extended history. Histories must hold
/// exactly M_k (i-1) + floor(z/k) values per level. With refit=true the
/// model parameters are re-estimated on the extended history.
HierarchyVector update_forecasts(const std::map<int, ArmaModel>& models,
                                 const std::map<int, std::vector<double>>& histories,
                                 const AggregationScheme& scheme, int i, int z,
                                 bool refit = false);

}  // namespace hfu
