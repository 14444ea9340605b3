#include "hfu/evaluation.hpp"

#include <cmath>
#include <limits>

namespace hfu {

Rrmse rrmse_level(const Eigen::VectorXd& actual, const Eigen::VectorXd& fair,
                  const Eigen::VectorXd& base) {
    if (actual.size() != fair.size() || actual.size() != base.size()) {
        throw DimensionError("rrmse inputs must have equal lengths");
    }
    const double num = (actual - fair).squaredNorm();
    const double den = (actual - base).squaredNorm();
    if (den == 0.0) {
        return Rrmse{std::numeric_limits<double>::infinity(), true};
    }
    return Rrmse{std::sqrt(num / den), false};
}

ErrorAccumulator::ErrorAccumulator(const AggregationScheme& scheme) : scheme_(scheme) {
    for (int k : scheme_.levels()) {
        num_[k] = 0.0;
        den_[k] = 0.0;
    }
}

void ErrorAccumulator::add_period(const HierarchyVector& actual, const HierarchyVector& fair,
                                  const HierarchyVector& base) {
    if (actual.scheme != scheme_ || fair.scheme != scheme_ || base.scheme != scheme_) {
        throw DimensionError("accumulator inputs use a different scheme");
    }
    for (int k : scheme_.levels()) {
        num_[k] += (actual.level(k) - fair.level(k)).squaredNorm();
        den_[k] += (actual.level(k) - base.level(k)).squaredNorm();
    }
}

ErrorReport ErrorAccumulator::report(int z, const std::string& method) const {
    ErrorReport report;
    report.z = z;
    report.method = method;
    report.numerator_sq = num_;
    report.denominator_sq = den_;
    double sum = 0.0;
    bool any_flag = false;
    for (int k : scheme_.levels()) {
        Rrmse r;
        if (den_.at(k) == 0.0) {
            r = Rrmse{std::numeric_limits<double>::infinity(), true};
            any_flag = true;
        } else {
            r = Rrmse{std::sqrt(num_.at(k) / den_.at(k)), false};
            sum += r.value;
        }
        report.per_level[k] = r;
    }
    if (any_flag) {
        report.overall = Rrmse{std::numeric_limits<double>::infinity(), true};
    } else {
        report.overall = Rrmse{sum / scheme_.level_count(), false};
    }
    return report;
}

HierarchyVector stack_fair(const HierarchyVector& reconciled_at_0,
                           const HierarchyVector& restored_at_z, const PrunedSystem& system) {
    const AggregationScheme& scheme = system.scheme();
    if (reconciled_at_0.scheme != scheme || restored_at_z.scheme != scheme) {
        throw DimensionError("stack_fair inputs use a different scheme");
    }
    HierarchyVector fair = restored_at_z;
    const auto offsets = scheme.level_offsets();
    for (int k : scheme.levels()) {
        const int observed = system.z() / k;
        const int start = offsets.at(k).start;
        for (int u = 0; u < observed; ++u) {
            fair.values[start + u] = reconciled_at_0.values[start + u];
        }
    }
    return fair;
}

TraceReport trace_diagnostic(const std::vector<HierarchyVector>& actuals,
                             const std::vector<HierarchyVector>& base_forecasts,
                             const std::vector<HierarchyVector>& reconciled,
                             const PrunedSystem& system) {
    const auto n = actuals.size();
    if (n < 30) {
        throw InsufficientDataError("trace diagnostic needs at least 30 sample periods, got " +
                                    std::to_string(n));
    }
    if (base_forecasts.size() != n || reconciled.size() != n) {
        throw DimensionError("trace diagnostic inputs differ in length");
    }
    const AggregationScheme& scheme = system.scheme();
    const int mz = system.node_count();
    const auto& kept = system.kept_indices();

    Eigen::MatrixXd base_err(static_cast<Eigen::Index>(n), mz);
    Eigen::MatrixXd recon_err(static_cast<Eigen::Index>(n), mz);
    for (std::size_t s = 0; s < n; ++s) {
        const Eigen::VectorXd be = actuals[s].values - base_forecasts[s].values;
        const Eigen::VectorXd re = actuals[s].values - reconciled[s].values;
        for (int c = 0; c < mz; ++c) {
            base_err(static_cast<Eigen::Index>(s), c) = be[kept[c]];
            recon_err(static_cast<Eigen::Index>(s), c) = re[kept[c]];
        }
    }

    // Which kept column belongs to which level.
    const auto offsets = scheme.level_offsets();
    std::map<int, std::pair<int, int>> kept_span;  // level -> [begin, end) in kept columns
    {
        int c = 0;
        for (int k : scheme.levels()) {
            const int count = scheme.frequency(k) - system.z() / k;
            kept_span[k] = {c, c + count};
            c += count;
        }
    }

    auto block_report = [&](int begin, int end) {
        TraceLevelReport rep;
        const int width = end - begin;
        if (width == 0) return rep;
        const auto rows = static_cast<double>(n);
        const Eigen::MatrixXd b = base_err.middleCols(begin, width);
        const Eigen::MatrixXd r = recon_err.middleCols(begin, width);
        const Eigen::RowVectorXd bm = b.colwise().mean();
        const Eigen::RowVectorXd rm = r.colwise().mean();
        Eigen::VectorXd db(static_cast<Eigen::Index>(n)), dr(static_cast<Eigen::Index>(n));
        for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(n); ++s) {
            db[s] = (b.row(s) - bm).squaredNorm();
            dr[s] = (r.row(s) - rm).squaredNorm();
        }
        rep.trace_base = db.sum() / (rows - 1.0);
        rep.trace_recon = dr.sum() / (rows - 1.0);
        const Eigen::VectorXd diff = db - dr;
        rep.margin = diff.mean();
        const double var = (diff.array() - rep.margin).square().sum() / (rows - 1.0);
        rep.margin_se = std::sqrt(var / rows);
        rep.satisfied = rep.margin >= -2.0 * rep.margin_se;
        return rep;
    };

    TraceReport report;
    report.z = system.z();
    for (int k : scheme.levels()) {
        const auto [begin, end] = kept_span.at(k);
        report.per_level[k] = block_report(begin, end);
    }
    report.total = block_report(0, mz);
    return report;
}

Ar1Mse ar1_closed_form_mse(double phi, double sigma2, int m, int z) {
    if (!(std::abs(phi) < 1.0)) throw DimensionError("|phi| must be < 1");
    if (z < 0 || z >= m) throw DimensionError("z out of range [0, m)");

    Ar1Mse out;
    if (phi == 0.0) {
        out.bottom = sigma2 * (m - z);
        out.top = sigma2 * (m - z);
        return out;
    }
    double bottom = 0.0;
    for (int j = 1; j <= m - z; ++j) bottom += 1.0 - std::pow(phi, 2 * j);
    out.bottom = sigma2 / (1.0 - phi * phi) * bottom;

    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(m, m);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c <= r; ++c) weights(r, c) = std::pow(phi, r - c);
    }
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
    a.head(m - z).setOnes();
    out.top = sigma2 * (weights.transpose() * a).squaredNorm();
    return out;
}

}  // namespace hfu
