#include "hfu/pruning.hpp"

#include <algorithm>
#include <string>

namespace hfu {

namespace {

void check_z(const AggregationScheme& scheme, int z) {
    if (z < 0 || z >= scheme.m()) {
        throw DimensionError("z=" + std::to_string(z) + " out of range [0, m=" +
                             std::to_string(scheme.m()) + ")");
    }
}

}  // namespace

PartialObservation PartialObservation::from_bottom(const AggregationScheme& scheme,
                                                   const std::vector<double>& bottom_values) {
    const int z = static_cast<int>(bottom_values.size());
    check_z(scheme, z);
    std::map<int, std::vector<double>> values;
    for (int k : scheme.levels()) {
        const int n_new = z / k;
        std::vector<double> agg(static_cast<std::size_t>(n_new));
        for (int j = 0; j < n_new; ++j) {
            double sum = 0.0;
            for (int t = j * k; t < (j + 1) * k; ++t) sum += bottom_values[t];
            agg[j] = sum;
        }
        values[k] = std::move(agg);
    }
    return PartialObservation(scheme, z, std::move(values));
}

PartialObservation::PartialObservation(AggregationScheme scheme, int z,
                                       std::map<int, std::vector<double>> values)
    : scheme_(std::move(scheme)), z_(z), values_(std::move(values)) {
    check_z(scheme_, z_);
    for (int k : scheme_.levels()) {
        const auto it = values_.find(k);
        const int expected = z_ / k;
        const int got = it == values_.end() ? 0 : static_cast<int>(it->second.size());
        if (got != expected) {
            throw MissingDataError("level " + std::to_string(k) + " must supply " +
                                   std::to_string(expected) + " observed values, got " +
                                   std::to_string(got));
        }
    }
}

double PartialObservation::at(int k, int u) const {
    if (u < 1 || u > count(k)) {
        throw MissingDataError("observed slot " + std::to_string(u) + " of level " +
                               std::to_string(k) + " is not available at z=" + std::to_string(z_));
    }
    return values_.at(k)[static_cast<std::size_t>(u - 1)];
}

PrunedSystem::PrunedSystem(AggregationScheme scheme, int z) : scheme_(std::move(scheme)), z_(z) {
    check_z(scheme_, z_);
    const int m = scheme_.m();
    const auto offsets = scheme_.level_offsets();
    m_z_ = 0;
    for (int k : scheme_.levels()) {
        const int mk = scheme_.frequency(k);
        const int observed = z_ / k;
        const int start = offsets.at(k).start;
        for (int u = observed; u < mk; ++u) kept_.push_back(start + u);
        for (int u = 0; u < mk - observed; ++u) cov_kept_.push_back(start + u);
        for (int u = observed + 1; u <= mk; ++u) {
            ReductionRow row;
            row.level = k;
            row.slot = u;
            row.first_bottom = k * (u - 1) + 1;
            row.last_bottom = std::min(z_, k * u);
            rows_.push_back(row);
        }
        m_z_ += mk - observed;
    }

    // S_z = P_z S [0; I]: kept node (k, u) covers the unobserved bottom
    // positions within [k(u-1)+1, k u].
    s_z_ = Eigen::MatrixXd::Zero(m_z_, m - z_);
    int r = 0;
    for (int k : scheme_.levels()) {
        const int mk = scheme_.frequency(k);
        for (int u = z_ / k + 1; u <= mk; ++u, ++r) {
            const int first = std::max(k * (u - 1) + 1, z_ + 1);
            const int last = k * u;
            for (int t = first; t <= last; ++t) s_z_(r, t - z_ - 1) = 1.0;
        }
    }
}

Eigen::MatrixXd PrunedSystem::dense_P() const {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m_z_, scheme_.node_count());
    for (int r = 0; r < m_z_; ++r) p(r, kept_[r]) = 1.0;
    return p;
}

Eigen::MatrixXd PrunedSystem::dense_P_check() const {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m_z_, scheme_.node_count());
    for (int r = 0; r < m_z_; ++r) p(r, cov_kept_[r]) = 1.0;
    return p;
}

Eigen::MatrixXd PrunedSystem::dense_R() const {
    Eigen::MatrixXd rmat = Eigen::MatrixXd::Zero(m_z_, scheme_.node_count());
    const int bottom_start = scheme_.level_offsets().at(1).start;
    for (int r = 0; r < m_z_; ++r) {
        const ReductionRow& row = rows_[r];
        for (int t = row.first_bottom; t <= row.last_bottom; ++t) {
            rmat(r, bottom_start + t - 1) = 1.0;
        }
    }
    return rmat;
}

Eigen::VectorXd PrunedSystem::apply_P(const Eigen::VectorXd& full) const {
    if (full.size() != scheme_.node_count()) {
        throw DimensionError("expected a full stacked vector of length " +
                             std::to_string(scheme_.node_count()));
    }
    Eigen::VectorXd out(m_z_);
    for (int r = 0; r < m_z_; ++r) out[r] = full[kept_[r]];
    return out;
}

PrunedSystem build_pruned_system(const AggregationScheme& scheme, int z) {
    return PrunedSystem(scheme, z);
}

Eigen::VectorXd reduce(const HierarchyVector& forecasts, const PartialObservation& observed,
                       const PrunedSystem& system) {
    if (forecasts.scheme != system.scheme() || observed.scheme() != system.scheme()) {
        throw DimensionError("forecasts, observations and pruned system use different schemes");
    }
    if (observed.z() != system.z()) {
        throw ConsistencyError("observation has z=" + std::to_string(observed.z()) +
                               " but the pruned system was built for z=" +
                               std::to_string(system.z()));
    }
    Eigen::VectorXd out = system.apply_P(forecasts.values);
    const auto& rows = system.reduction_rows();
    for (int r = 0; r < out.size(); ++r) {
        double sum = 0.0;
        for (int t = rows[r].first_bottom; t <= rows[r].last_bottom; ++t) {
            sum += observed.at(1, t);
        }
        out[r] -= sum;
    }
    return out;
}

Eigen::VectorXd reduce_nested(const HierarchyVector& forecasts,
                              const PartialObservation& observed, const PrunedSystem& system) {
    const AggregationScheme& scheme = system.scheme();
    if (!scheme.is_nested_chain()) {
        throw UnsupportedTreeError(
            "scheme levels do not form a divisor chain; the hierarchy has no single tree "
            "representation, use reduce instead");
    }
    if (forecasts.scheme != scheme || observed.scheme() != scheme) {
        throw DimensionError("forecasts, observations and pruned system use different schemes");
    }
    if (observed.z() != system.z()) {
        throw ConsistencyError("observation z does not match the pruned system");
    }
    const int z = system.z();
    std::vector<int> ascending(scheme.levels().rbegin(), scheme.levels().rend());
    Eigen::VectorXd out = system.apply_P(forecasts.values);

    int r = 0;
    for (int k : scheme.levels()) {
        const int mk = scheme.frequency(k);
        const auto q = static_cast<int>(
            std::find(ascending.begin(), ascending.end(), k) - ascending.begin());
        for (int u = z / k + 1; u <= mk; ++u, ++r) {
            double sum = 0.0;
            // Walk the levels below k_q: at each level subtract the observed
            // nodes inside this node's subtree that were not already covered
            // by an observed node one level up. The lower bound keeps to the
            // later of the subtree start and the fully-observed front, both
            // converted to level-p steps.
            for (int p = 0; p < q; ++p) {
                const int kp = ascending[static_cast<std::size_t>(p)];
                const int kp1 = ascending[static_cast<std::size_t>(p + 1)];
                const int w_start = std::max((z / kp1) * kp1, (u - 1) * k) / kp + 1;
                const int w_end = z / kp;
                for (int w = w_start; w <= w_end; ++w) sum += observed.at(kp, w);
            }
            out[r] -= sum;
        }
    }
    return out;
}

HierarchyVector restore(const Eigen::VectorXd& reconciled_reduced,
                        const PartialObservation& observed, const PrunedSystem& system) {
    if (reconciled_reduced.size() != system.node_count()) {
        throw DimensionError("reduced vector has length " +
                             std::to_string(reconciled_reduced.size()) + ", expected m_z=" +
                             std::to_string(system.node_count()));
    }
    if (observed.scheme() != system.scheme() || observed.z() != system.z()) {
        throw ConsistencyError("observation does not match the pruned system");
    }
    const AggregationScheme& scheme = system.scheme();
    Eigen::VectorXd full(scheme.node_count());
    const auto offsets = scheme.level_offsets();
    const auto& rows = system.reduction_rows();
    int r = 0;
    for (int k : scheme.levels()) {
        const int start = offsets.at(k).start;
        const int mk = scheme.frequency(k);
        const int n_obs = observed.count(k);
        for (int u = 1; u <= n_obs; ++u) full[start + u - 1] = observed.at(k, u);
        for (int u = n_obs + 1; u <= mk; ++u, ++r) {
            double sum = 0.0;
            for (int t = rows[r].first_bottom; t <= rows[r].last_bottom; ++t) {
                sum += observed.at(1, t);
            }
            full[start + u - 1] = reconciled_reduced[r] + sum;
        }
    }
    return HierarchyVector(scheme, std::move(full), 1);
}

}  // namespace hfu
