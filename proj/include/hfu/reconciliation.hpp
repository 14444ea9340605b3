#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "hfu/hierarchy.hpp"
#include "hfu/pruning.hpp"

namespace hfu {

enum class ReconMethod { bottom_up, mint_full, mint_shrink };

std::string to_string(ReconMethod method);
ReconMethod recon_method_from_string(const std::string& name);

/// A base-forecast-error covariance estimate together with conditioning
/// diagnostics. For shrinkage estimates W = (1-lambda) W_sample +
/// lambda diag(W_sample).
struct CovarianceEstimate {
    Eigen::MatrixXd W;
    int n = 0;  // node count the estimate refers to (m_0 or m_z)
    std::string method = "sample";
    int sample_count = 0;
    std::optional<double> shrink_lambda;
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    int rank = 0;

    bool invertible(double rel_floor = 1e-10) const {
        return rank == n && min_eigenvalue > rel_floor * std::max(max_eigenvalue, 0.0);
    }
};

/// Mapping matrix G and the summing matrix it was built against. Reconciled
/// forecasts are S G x, coherent by construction; SGS = S holds within 1e-8.
struct ReconWeights {
    ReconMethod method = ReconMethod::bottom_up;
    Eigen::MatrixXd G;  // n_bottom x n
    Eigen::MatrixXd S;  // n x n_bottom
    std::optional<CovarianceEstimate> W;
};

/// Sample covariance (denominator rows-1) of stacked base-forecast errors,
/// rows = periods, cols = nodes. Eigenvalue diagnostics are populated so
/// rank deficiency (fewer rows than nodes) is visible to callers.
CovarianceEstimate estimate_base_error_covariance(const Eigen::MatrixXd& errors);

/// Applies diagonal shrinkage with the given lambda and refreshed diagnostics.
CovarianceEstimate shrink_covariance(const CovarianceEstimate& sample, double lambda);

/// W_z = P_check_z W P_check_z': under jointly covariance-stationary base
/// errors the z=0 estimate is reduced to the pruned hierarchy by keeping the
/// shortest-horizon entries of every level.
CovarianceEstimate prune_covariance(const CovarianceEstimate& w0, const PrunedSystem& system);

/// Builds the mapping matrix for the requested method. minT variants compute
/// G = (S' W^-1 S)^-1 S' W^-1 through symmetric factorization solves; a
/// singular W raises SingularCovarianceError unless allow_pseudo_inverse is
/// set, in which case an eigenvalue-truncated pseudo-inverse is used.
ReconWeights mapping_matrix(ReconMethod method, const Eigen::MatrixXd& S,
                            const std::optional<CovarianceEstimate>& W,
                            bool allow_pseudo_inverse = false);

struct ShrinkageSelection {
    double lambda = 1.0;
    bool degenerate = false;  // too few rows, lambda defaulted to 1
};

/// K-fold cross-validation over the grid lambda in {0, 0.1, ..., 1}: score is
/// the Frobenius distance between the shrunk training-fold covariance and the
/// held-out fold's sample covariance, infinite when the shrunk matrix is
/// singular. Ties prefer the larger lambda.
ShrinkageSelection select_shrinkage(const Eigen::MatrixXd& errors, int folds = 5);

/// S G base.
Eigen::VectorXd reconcile(const ReconWeights& weights, const Eigen::VectorXd& base);

/// Set-negative-to-zero heuristic: clips the bottom level at zero and pushes
/// every clipping difference up through the ancestors, keeping the output
/// coherent. Biased, but non-negative wherever the children are.
HierarchyVector set_negative_to_zero(const HierarchyVector& reconciled);

}  // namespace hfu
