#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "hfu/hierarchy.hpp"
#include "hfu/pruning.hpp"

namespace hfu {

/// One level's relative RMSE; infinite_flag marks a zero base denominator
/// (constant-perfect base fit), which is reported rather than dropped.
struct Rrmse {
    double value = 0.0;
    bool infinite_flag = false;
};

/// Per-level and averaged relative RMSEs for one (method, z) cell.
struct ErrorReport {
    int z = 0;
    std::string method;
    std::map<int, Rrmse> per_level;
    Rrmse overall;                       // arithmetic mean of per-level values
    std::map<int, double> numerator_sq;  // raw squared-error sums
    std::map<int, double> denominator_sq;
};

/// sqrt(sum (y - fair)^2 / sum (y - base)^2) over aligned slot vectors of one
/// level; base must be the z=0 (non-updated) base forecasts.
Rrmse rrmse_level(const Eigen::VectorXd& actual, const Eigen::VectorXd& fair,
                  const Eigen::VectorXd& base);

/// Accumulates squared errors across evaluation periods, then reports.
class ErrorAccumulator {
public:
    explicit ErrorAccumulator(const AggregationScheme& scheme);

    /// All three vectors are full stacked vectors for the same period; fair
    /// is the stack_fair output, base the z=0 stacked base forecasts.
    void add_period(const HierarchyVector& actual, const HierarchyVector& fair,
                    const HierarchyVector& base);

    ErrorReport report(int z, const std::string& method) const;

private:
    AggregationScheme scheme_;
    std::map<int, double> num_;
    std::map<int, double> den_;
};

/// The fair-comparison vector: per level the first floor(z/k) slots come from
/// the z=0 reconciled forecasts (retaining their errors) and the remaining
/// slots from the current restored reconciled forecasts, so observed values
/// never enter the error computation.
HierarchyVector stack_fair(const HierarchyVector& reconciled_at_0,
                           const HierarchyVector& restored_at_z, const PrunedSystem& system);

struct TraceLevelReport {
    double trace_base = 0.0;     // tr Cov(P_z (y - yhat)) restricted to the level
    double trace_recon = 0.0;    // tr Cov(P_z (y - ytilde_z))
    double margin = 0.0;         // paired mean of base - recon squared norms
    double margin_se = 0.0;      // standard error of the paired margin
    bool satisfied = false;      // margin >= -2 se
};

struct TraceReport {
    int z = 0;
    std::map<int, TraceLevelReport> per_level;
    TraceLevelReport total;
};

/// Sample-covariance traces of pruned reconciled vs pruned base errors over
/// >= 30 periods, per level block and overall, with a paired standard error
/// for the margin.
TraceReport trace_diagnostic(const std::vector<HierarchyVector>& actuals,
                             const std::vector<HierarchyVector>& base_forecasts,
                             const std::vector<HierarchyVector>& reconciled,
                             const PrunedSystem& system);

struct Ar1Mse {
    double bottom = 0.0;
    double top = 0.0;
};

/// Closed-form bottom-up MSEs for an AR(1) bottom level after z new
/// observations: bottom sigma2/(1-phi^2) sum_{j<=m-z}(1-phi^{2j}); top
/// sigma2 a' Phi Phi' a with a = (1_{m-z}, 0_z) and Phi the lower-triangular
/// Toeplitz matrix of AR(1) moving-average weights truncated at lag m.
Ar1Mse ar1_closed_form_mse(double phi, double sigma2, int m, int z);

}  // namespace hfu
