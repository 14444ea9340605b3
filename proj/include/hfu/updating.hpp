#pragma once

#include <map>
#include <optional>
#include <vector>

#include "hfu/arma.hpp"
#include "hfu/io.hpp"
#include "hfu/pruning.hpp"
#include "hfu/reconciliation.hpp"

namespace hfu {

/// Everything one pass of the updating algorithm produced, kept for
/// diagnostics and evaluation.
struct UpdateRun {
    AggregationScheme scheme;
    int z = 0;
    ReconMethod method = ReconMethod::bottom_up;
    HierarchyVector base_updated;       // step 1 output
    Eigen::VectorXd reduced;            // step 2 output, length m_z
    Eigen::VectorXd reconciled_reduced; // step 3 output, length m_z
    HierarchyVector restored;           // step 4 output, fully coherent
    ReconWeights weights_used;
    int m_z = 0;
    double elapsed_ms = 0.0;
};

struct UpdateOptions {
    bool refit = false;
    bool allow_pseudo_inverse = false;
    // Models were fitted on transformed data; base forecasting happens on
    // that scale and forecasts are put back before reconciliation.
    Transform transform = Transform::none;
};

/// Runs the four algorithm steps: update base forecasts on the new bottom
/// observations, prune/reduce, reconcile on the pruned hierarchy with the
/// pruned z=0 covariance, and restore. Histories must end exactly at the
/// period boundary (data through period i-1); upper-level new observations
/// are always derived by aggregating new_bottom_obs. W0 is the full-hierarchy
/// base-error covariance at z=0 and may be absent for bottom_up.
UpdateRun hierarchical_forecast_update(const std::map<int, ArmaModel>& models,
                                       const std::map<int, std::vector<double>>& histories,
                                       const std::vector<double>& new_bottom_obs,
                                       const AggregationScheme& scheme, ReconMethod method,
                                       const std::optional<CovarianceEstimate>& w0,
                                       const UpdateOptions& options = {});

/// z=0 covariances per reconciliation flavor, computed once per fitted
/// hierarchy and pruned per z inside the algorithm.
struct MethodCovariances {
    std::optional<CovarianceEstimate> sample;  // used by mint_full
    std::optional<CovarianceEstimate> shrunk;  // used by mint_shrink

    const std::optional<CovarianceEstimate>& resolve(ReconMethod method) const;
};

/// Sweeps z = 0..m-1 feeding the first z values of a fully known new period,
/// for every requested method. Simulation/backtest helper.
std::vector<UpdateRun> run_z_sweep(const std::map<int, ArmaModel>& models,
                                   const std::map<int, std::vector<double>>& histories,
                                   const std::vector<double>& full_new_period,
                                   const AggregationScheme& scheme,
                                   const std::vector<ReconMethod>& methods,
                                   const MethodCovariances& w0,
                                   const UpdateOptions& options = {});

}  // namespace hfu
