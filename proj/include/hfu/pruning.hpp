#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "hfu/hierarchy.hpp"

namespace hfu {

/// The values observed so far within the current period: z new bottom-level
/// points and the per-level aggregates they imply (floor(z/k) values at level
/// k). Observed values are carried separately from forecasts so that the
/// reduction step can never mix forecasts into the subtraction.
class PartialObservation {
public:
    /// Derives all upper-level observations by aggregating the new bottom
    /// values; z = bottom_values.size() must satisfy 0 <= z < m.
    static PartialObservation from_bottom(const AggregationScheme& scheme,
                                          const std::vector<double>& bottom_values);

    /// Builds from explicit per-level vectors; level k must supply exactly
    /// floor(z/k) values or a MissingDataError is thrown.
    PartialObservation(AggregationScheme scheme, int z,
                       std::map<int, std::vector<double>> values);

    const AggregationScheme& scheme() const { return scheme_; }
    int z() const { return z_; }

    /// Number of observed slots at level k.
    int count(int k) const { return z_ / k; }

    /// Observed value of slot u (1-based, u <= count(k)) of level k.
    double at(int k, int u) const;

private:
    AggregationScheme scheme_;
    int z_;
    std::map<int, std::vector<double>> values_;
};

/// One reduction-coefficient row: the reduced node subtracts the observed
/// bottom values in [first_bottom, last_bottom] (1-based, empty when
/// last < first). R_z rows are unit coefficients on a contiguous window, so
/// only the window is stored; dense_R materializes the full matrix.
struct ReductionRow {
    int level = 1;
    int slot = 1;          // u within the level, 1-based
    int first_bottom = 1;  // k*(u-1)+1
    int last_bottom = 0;   // min over the observed range; < first when empty
};

/// The pruning machinery for a given number z of new bottom observations:
/// the node-keeping matrices P_z and P_check_z, the reduction rows R_z, and
/// the pruned summing matrix S_z.
class PrunedSystem {
public:
    PrunedSystem(AggregationScheme scheme, int z);

    const AggregationScheme& scheme() const { return scheme_; }
    int z() const { return z_; }

    /// Number of remaining nodes m_z = sum over k of (m/k - floor(z/k)).
    int node_count() const { return m_z_; }

    /// Pruned summing matrix S_z = P_z S [0; I], size m_z x (m - z).
    const Eigen::MatrixXd& pruned_summing() const { return s_z_; }

    /// Flat indices (into the full stacked vector) of the nodes P_z keeps:
    /// the last m/k - floor(z/k) of each level.
    const std::vector<int>& kept_indices() const { return kept_; }

    /// Flat indices P_check_z keeps: the first m/k - floor(z/k) of each
    /// level. Used for covariance pruning only.
    const std::vector<int>& covariance_indices() const { return cov_kept_; }

    const std::vector<ReductionRow>& reduction_rows() const { return rows_; }

    Eigen::MatrixXd dense_P() const;
    Eigen::MatrixXd dense_P_check() const;
    Eigen::MatrixXd dense_R() const;

    /// Selects the kept entries of a full stacked vector (P_z x).
    Eigen::VectorXd apply_P(const Eigen::VectorXd& full) const;

private:
    AggregationScheme scheme_;
    int z_;
    int m_z_;
    std::vector<int> kept_;
    std::vector<int> cov_kept_;
    std::vector<ReductionRow> rows_;
    Eigen::MatrixXd s_z_;
};

PrunedSystem build_pruned_system(const AggregationScheme& scheme, int z);

/// Forward reduction (Algorithm step 2): P_z yhat - R_z y, subtracting the
/// observed bottom values from every still-unobserved ancestor forecast.
/// Uses only bottom-level observations, so it applies to any scheme.
Eigen::VectorXd reduce(const HierarchyVector& forecasts, const PartialObservation& observed,
                       const PrunedSystem& system);

/// Same reduction computed by walking the tree level by level, subtracting
/// observed child aggregates and the partially-observed remainder. Only
/// valid for schemes forming a single tree (divisor chain); exists as an
/// independent cross-check of reduce. Throws UnsupportedTreeError otherwise.
Eigen::VectorXd reduce_nested(const HierarchyVector& forecasts,
                              const PartialObservation& observed, const PrunedSystem& system);

/// Reverse reduction (Algorithm step 4): adds the subtracted observations
/// back onto the reconciled reduced vector and fills the pruned slots with
/// the observed values, yielding the full coherent updated vector.
HierarchyVector restore(const Eigen::VectorXd& reconciled_reduced,
                        const PartialObservation& observed, const PrunedSystem& system);

}  // namespace hfu
