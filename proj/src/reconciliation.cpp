#include "hfu/reconciliation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace hfu {

namespace {

// The invertibility check runs on the correlation-equilibrated matrix so it
// is invariant to per-node scale (top-level variances dwarf bottom ones on
// deep hierarchies). A non-positive diagonal entry is singular outright:
// shrinking cannot repair a zero-variance node.
void fill_diagnostics(CovarianceEstimate& est) {
    const auto n = static_cast<int>(est.W.rows());
    const Eigen::VectorXd diag = est.W.diagonal();
    if (n == 0) return;
    if (diag.minCoeff() <= 0.0 || !diag.allFinite()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(est.W, Eigen::EigenvaluesOnly);
        est.min_eigenvalue = 0.0;
        est.max_eigenvalue = std::max(solver.eigenvalues().maxCoeff(), 0.0);
        est.rank = 0;
        for (int j = 0; j < n; ++j) {
            if (solver.eigenvalues()[j] > 1e-10 * est.max_eigenvalue) ++est.rank;
        }
        return;
    }
    const Eigen::VectorXd inv_scale = diag.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd corr =
        inv_scale.asDiagonal() * est.W * inv_scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(corr, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& eig = solver.eigenvalues();
    est.min_eigenvalue = eig.minCoeff();
    est.max_eigenvalue = eig.maxCoeff();
    est.rank = 0;
    const double floor = 1e-10 * std::max(est.max_eigenvalue, 0.0);
    for (int j = 0; j < eig.size(); ++j) {
        if (eig[j] > floor && eig[j] > 0.0) ++est.rank;
    }
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& a) {
    return 0.5 * (a + a.transpose());
}

}  // namespace

std::string to_string(ReconMethod method) {
    switch (method) {
        case ReconMethod::bottom_up: return "bottom_up";
        case ReconMethod::mint_full: return "mint_full";
        case ReconMethod::mint_shrink: return "mint_shrink";
    }
    return "unknown";
}

ReconMethod recon_method_from_string(const std::string& name) {
    if (name == "bottom_up") return ReconMethod::bottom_up;
    if (name == "mint_full") return ReconMethod::mint_full;
    if (name == "mint_shrink") return ReconMethod::mint_shrink;
    throw Error("unknown reconciliation method '" + name +
                "' (expected bottom_up, mint_full or mint_shrink)");
}

CovarianceEstimate estimate_base_error_covariance(const Eigen::MatrixXd& errors) {
    if (errors.rows() < 2) {
        throw InsufficientDataError("covariance estimation needs at least 2 sample rows, got " +
                                    std::to_string(errors.rows()));
    }
    if (!errors.allFinite()) {
        throw FitFailureError("error sample contains non-finite entries");
    }
    const Eigen::RowVectorXd mean = errors.colwise().mean();
    const Eigen::MatrixXd centered = errors.rowwise() - mean;
    CovarianceEstimate est;
    est.W = symmetrized(centered.transpose() * centered /
                        static_cast<double>(errors.rows() - 1));
    est.n = static_cast<int>(errors.cols());
    est.sample_count = static_cast<int>(errors.rows());
    fill_diagnostics(est);
    return est;
}

CovarianceEstimate shrink_covariance(const CovarianceEstimate& sample, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw DimensionError("shrinkage lambda must be in [0,1]");
    CovarianceEstimate est = sample;
    est.W = (1.0 - lambda) * sample.W;
    est.W.diagonal() = sample.W.diagonal();
    est.method = "shrink";
    est.shrink_lambda = lambda;
    fill_diagnostics(est);
    return est;
}

CovarianceEstimate prune_covariance(const CovarianceEstimate& w0, const PrunedSystem& system) {
    if (w0.n != system.scheme().node_count()) {
        throw DimensionError("covariance has dimension " + std::to_string(w0.n) +
                             ", expected m_0=" + std::to_string(system.scheme().node_count()));
    }
    const auto& keep = system.covariance_indices();
    const auto mz = static_cast<int>(keep.size());
    CovarianceEstimate est;
    est.W.resize(mz, mz);
    for (int a = 0; a < mz; ++a) {
        for (int b = 0; b < mz; ++b) est.W(a, b) = w0.W(keep[a], keep[b]);
    }
    est.n = mz;
    est.method = w0.method + "+pruned";
    est.sample_count = w0.sample_count;
    est.shrink_lambda = w0.shrink_lambda;
    fill_diagnostics(est);
    return est;
}

ReconWeights mapping_matrix(ReconMethod method, const Eigen::MatrixXd& S,
                            const std::optional<CovarianceEstimate>& W,
                            bool allow_pseudo_inverse) {
    const auto n = static_cast<int>(S.rows());
    const auto n_bottom = static_cast<int>(S.cols());
    ReconWeights weights;
    weights.method = method;
    weights.S = S;

    if (method == ReconMethod::bottom_up) {
        weights.G = Eigen::MatrixXd::Zero(n_bottom, n);
        weights.G.rightCols(n_bottom).setIdentity();
        return weights;
    }

    if (!W.has_value()) {
        throw SingularCovarianceError("minT reconciliation requires a covariance estimate");
    }
    if (W->n != n) {
        throw DimensionError("covariance dimension " + std::to_string(W->n) +
                             " does not match summing matrix rows " + std::to_string(n));
    }

    Eigen::MatrixXd winv_s;  // W^-1 S
    if (W->invertible()) {
        // Solve in the correlation-equilibrated basis; the per-node scale
        // spread on deep hierarchies would otherwise dominate the factor.
        const Eigen::VectorXd inv_scale = W->W.diagonal().cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd corr =
            symmetrized(inv_scale.asDiagonal() * W->W * inv_scale.asDiagonal());
        const Eigen::MatrixXd scaled_s = inv_scale.asDiagonal() * S;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(corr);
        winv_s = inv_scale.asDiagonal() * ldlt.solve(scaled_s);
    } else if (allow_pseudo_inverse) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrized(W->W));
        const Eigen::VectorXd& eig = solver.eigenvalues();
        const double floor = 1e-10 * std::max(eig.maxCoeff(), 0.0);
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < n; ++j) {
            if (eig[j] > floor && eig[j] > 0.0) inv[j] = 1.0 / eig[j];
        }
        const Eigen::MatrixXd pinv =
            solver.eigenvectors() * inv.asDiagonal() * solver.eigenvectors().transpose();
        winv_s = pinv * S;
    } else {
        throw SingularCovarianceError(
            "base error covariance is numerically singular (rank " + std::to_string(W->rank) +
            " of " + std::to_string(W->n) + ", sample_count=" + std::to_string(W->sample_count) +
            "); pass allow_pseudo_inverse to force a truncated inverse");
    }

    const Eigen::MatrixXd gram = symmetrized(S.transpose() * winv_s);  // S' W^-1 S
    Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);
    if (gram_ldlt.info() != Eigen::Success || !gram.allFinite()) {
        throw SingularCovarianceError("S' W^-1 S could not be factorized");
    }
    weights.G = gram_ldlt.solve(winv_s.transpose());  // (S'W^-1S)^-1 S'W^-1
    // One step of iterative refinement keeps SGS=S tight for
    // ill-conditioned covariances near the rank boundary.
    weights.G += gram_ldlt.solve(winv_s.transpose() - gram * weights.G);
    weights.W = W;

    const double gap = (S * weights.G * S - S).cwiseAbs().maxCoeff();
    if (!(gap < 1e-8) || !weights.G.allFinite()) {
        throw SingularCovarianceError("unbiasedness constraint SGS=S violated (max gap " +
                                      std::to_string(gap) + "), covariance too ill-conditioned");
    }
    return weights;
}

ShrinkageSelection select_shrinkage(const Eigen::MatrixXd& errors, int folds) {
    if (folds < 2) throw DimensionError("cross-validation needs at least 2 folds");
    const auto rows = static_cast<int>(errors.rows());
    if (rows < 2 * folds) {
        return ShrinkageSelection{1.0, true};
    }
    const auto n = static_cast<int>(errors.cols());

    double best_lambda = 1.0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int step = 0; step <= 10; ++step) {
        const double lambda = step / 10.0;
        double score = 0.0;
        bool valid = true;
        for (int fold = 0; fold < folds && valid; ++fold) {
            const int lo = fold * rows / folds;
            const int hi = (fold + 1) * rows / folds;
            const int held = hi - lo;
            const int train = rows - held;
            if (held < 2 || train < 2) {
                valid = false;
                break;
            }
            Eigen::MatrixXd train_rows(train, n), test_rows(held, n);
            train_rows.topRows(lo) = errors.topRows(lo);
            train_rows.bottomRows(rows - hi) = errors.bottomRows(rows - hi);
            test_rows = errors.middleRows(lo, held);

            const CovarianceEstimate fit =
                shrink_covariance(estimate_base_error_covariance(train_rows), lambda);
            if (!fit.invertible()) {
                valid = false;
                break;
            }
            const CovarianceEstimate holdout = estimate_base_error_covariance(test_rows);
            score += (fit.W - holdout.W).norm();
        }
        if (!valid) continue;
        if (score < best_score - 1e-12 ||
            (std::abs(score - best_score) <= 1e-12 && lambda > best_lambda)) {
            best_score = score;
            best_lambda = lambda;
        }
    }
    if (!std::isfinite(best_score)) {
        return ShrinkageSelection{1.0, true};
    }
    return ShrinkageSelection{best_lambda, false};
}

Eigen::VectorXd reconcile(const ReconWeights& weights, const Eigen::VectorXd& base) {
    if (base.size() != weights.G.cols()) {
        throw DimensionError("base vector has length " + std::to_string(base.size()) +
                             ", expected " + std::to_string(weights.G.cols()));
    }
    return weights.S * (weights.G * base);
}

HierarchyVector set_negative_to_zero(const HierarchyVector& reconciled) {
    // Clipping the bottom and re-aggregating is exactly the recursive
    // push-up of clipping differences when the input is coherent.
    const AggregationScheme& scheme = reconciled.scheme;
    Eigen::VectorXd bottom = reconciled.bottom();
    for (int j = 0; j < bottom.size(); ++j) bottom[j] = std::max(bottom[j], 0.0);

    Eigen::VectorXd values(scheme.node_count());
    int pos = 0;
    for (int k : scheme.levels()) {
        const int mk = scheme.frequency(k);
        for (int u = 0; u < mk; ++u) {
            values[pos + u] = bottom.segment(u * k, k).sum();
        }
        pos += mk;
    }
    return HierarchyVector(scheme, std::move(values), reconciled.period_index);
}

}  // namespace hfu
