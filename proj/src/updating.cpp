#include "hfu/updating.hpp"

#include <chrono>
#include <string>

namespace hfu {

namespace {

// Extends each level's history by the aggregates implied by the new bottom
// observations, enforcing the observability assumption.
std::map<int, std::vector<double>> extend_histories(
    const std::map<int, std::vector<double>>& histories, const std::vector<double>& new_bottom,
    const AggregationScheme& scheme) {
    std::map<int, std::vector<double>> extended = histories;
    const int z = static_cast<int>(new_bottom.size());
    for (int k : scheme.levels()) {
        auto it = extended.find(k);
        if (it == extended.end()) {
            throw ConsistencyError("missing history for level " + std::to_string(k));
        }
        const int n_new = z / k;
        for (int j = 0; j < n_new; ++j) {
            double sum = 0.0;
            for (int t = j * k; t < (j + 1) * k; ++t) sum += new_bottom[static_cast<std::size_t>(t)];
            it->second.push_back(sum);
        }
    }
    return extended;
}

int derive_period_index(const std::map<int, std::vector<double>>& histories,
                        const AggregationScheme& scheme) {
    const auto it = histories.find(1);
    if (it == histories.end()) throw ConsistencyError("missing bottom-level history");
    const auto len = static_cast<int>(it->second.size());
    if (len % scheme.m() != 0) {
        throw ConsistencyError("bottom history length " + std::to_string(len) +
                               " does not end at a top-level period boundary (m=" +
                               std::to_string(scheme.m()) + ")");
    }
    const int periods = len / scheme.m();
    for (int k : scheme.levels()) {
        const auto lit = histories.find(k);
        if (lit == histories.end() ||
            static_cast<int>(lit->second.size()) != periods * scheme.frequency(k)) {
            throw ConsistencyError("level " + std::to_string(k) +
                                   " history does not cover the same " + std::to_string(periods) +
                                   " periods as the bottom level");
        }
    }
    return periods + 1;
}

}  // namespace

UpdateRun hierarchical_forecast_update(const std::map<int, ArmaModel>& models,
                                       const std::map<int, std::vector<double>>& histories,
                                       const std::vector<double>& new_bottom_obs,
                                       const AggregationScheme& scheme, ReconMethod method,
                                       const std::optional<CovarianceEstimate>& w0,
                                       const UpdateOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    const int z = static_cast<int>(new_bottom_obs.size());
    if (z < 0 || z >= scheme.m()) {
        throw DimensionError("got " + std::to_string(z) +
                             " new bottom observations, expected fewer than m=" +
                             std::to_string(scheme.m()));
    }
    const int i = derive_period_index(histories, scheme);

    // Step 1: updated base forecasts.
    auto extended = extend_histories(histories, new_bottom_obs, scheme);
    if (options.transform != Transform::none) {
        for (auto& [k, series] : extended) {
            for (double& v : series) v = apply_transform(options.transform, v);
        }
    }
    HierarchyVector base_updated = [&] {
        try {
            HierarchyVector hv = update_forecasts(models, extended, scheme, i, z, options.refit);
            if (options.transform != Transform::none) {
                for (Eigen::Index j = 0; j < hv.values.size(); ++j) {
                    hv.values[j] = invert_transform(options.transform, hv.values[j]);
                }
            }
            return hv;
        } catch (const ConsistencyError& err) {
            throw ConsistencyError(std::string("step 1 (update base forecasts): ") + err.what());
        }
    }();

    // Step 2: prune and reduce.
    const PrunedSystem system = build_pruned_system(scheme, z);
    const PartialObservation observed = PartialObservation::from_bottom(scheme, new_bottom_obs);
    Eigen::VectorXd reduced = [&] {
        try {
            return reduce(base_updated, observed, system);
        } catch (const MissingDataError& err) {
            throw MissingDataError(std::string("step 2 (prune/reduce): ") + err.what());
        }
    }();

    // Step 3: reconcile on the pruned hierarchy.
    ReconWeights weights = [&] {
        try {
            std::optional<CovarianceEstimate> wz;
            if (method != ReconMethod::bottom_up) {
                if (!w0.has_value()) {
                    throw SingularCovarianceError("no z=0 covariance supplied for minT");
                }
                wz = prune_covariance(*w0, system);
            }
            return mapping_matrix(method, system.pruned_summing(), wz,
                                  options.allow_pseudo_inverse);
        } catch (const SingularCovarianceError& err) {
            throw SingularCovarianceError(std::string("step 3 (reconcile, z=") +
                                          std::to_string(z) + "): " + err.what());
        }
    }();
    Eigen::VectorXd reconciled_reduced = reconcile(weights, reduced);

    // Step 4: restore the full hierarchy.
    HierarchyVector restored = restore(reconciled_reduced, observed, system);
    restored.period_index = i;

    UpdateRun run{scheme,
                  z,
                  method,
                  std::move(base_updated),
                  std::move(reduced),
                  std::move(reconciled_reduced),
                  std::move(restored),
                  std::move(weights),
                  system.node_count(),
                  0.0};
    run.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    return run;
}

const std::optional<CovarianceEstimate>& MethodCovariances::resolve(ReconMethod method) const {
    static const std::optional<CovarianceEstimate> none;
    switch (method) {
        case ReconMethod::bottom_up: return none;
        case ReconMethod::mint_full: return sample;
        case ReconMethod::mint_shrink: return shrunk;
    }
    return none;
}

std::vector<UpdateRun> run_z_sweep(const std::map<int, ArmaModel>& models,
                                   const std::map<int, std::vector<double>>& histories,
                                   const std::vector<double>& full_new_period,
                                   const AggregationScheme& scheme,
                                   const std::vector<ReconMethod>& methods,
                                   const MethodCovariances& w0,
                                   const UpdateOptions& options) {
    if (static_cast<int>(full_new_period.size()) != scheme.m()) {
        throw DimensionError("full new period must supply exactly m=" +
                             std::to_string(scheme.m()) + " bottom observations");
    }
    std::vector<UpdateRun> runs;
    runs.reserve(static_cast<std::size_t>(scheme.m()) * methods.size());
    for (int z = 0; z < scheme.m(); ++z) {
        const std::vector<double> obs(full_new_period.begin(), full_new_period.begin() + z);
        for (ReconMethod method : methods) {
            runs.push_back(hierarchical_forecast_update(models, histories, obs, scheme, method,
                                                        w0.resolve(method), options));
        }
    }
    return runs;
}

}  // namespace hfu
