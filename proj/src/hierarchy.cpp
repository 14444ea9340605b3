#include "hfu/hierarchy.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace hfu {

AggregationScheme::AggregationScheme(std::vector<int> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) {
        throw InvalidSchemeError("aggregation scheme must not be empty");
    }
    std::sort(levels_.begin(), levels_.end(), std::greater<int>());
    for (std::size_t j = 0; j + 1 < levels_.size(); ++j) {
        if (levels_[j] == levels_[j + 1]) {
            throw InvalidSchemeError("duplicate aggregation level " + std::to_string(levels_[j]));
        }
    }
    if (levels_.back() != 1) {
        throw InvalidSchemeError("aggregation scheme must contain level 1");
    }
    const int top = levels_.front();
    for (int k : levels_) {
        if (k <= 0) {
            throw InvalidSchemeError("aggregation levels must be positive");
        }
        if (top % k != 0) {
            std::ostringstream msg;
            msg << "level " << k << " does not divide m=" << top;
            throw InvalidSchemeError(msg.str());
        }
    }
}

bool AggregationScheme::contains(int k) const {
    return std::find(levels_.begin(), levels_.end(), k) != levels_.end();
}

int AggregationScheme::frequency(int k) const {
    if (!contains(k)) {
        throw InvalidLevelError("level " + std::to_string(k) + " is not part of the scheme");
    }
    return m() / k;
}

int AggregationScheme::node_count() const {
    int n = 0;
    for (int k : levels_) n += m() / k;
    return n;
}

std::map<int, LevelSpan> AggregationScheme::level_offsets() const {
    std::map<int, LevelSpan> offsets;
    int start = 0;
    for (int k : levels_) {
        const int len = m() / k;
        offsets[k] = LevelSpan{start, len};
        start += len;
    }
    return offsets;
}

int AggregationScheme::index_of(int k, int u) const {
    const int mk = frequency(k);
    if (u < 1 || u > mk) {
        throw DimensionError("slot " + std::to_string(u) + " out of range for level " +
                             std::to_string(k));
    }
    int start = 0;
    for (int level : levels_) {
        if (level == k) break;
        start += m() / level;
    }
    return start + (u - 1);
}

bool AggregationScheme::is_nested_chain() const {
    for (std::size_t j = 0; j + 1 < levels_.size(); ++j) {
        if (levels_[j] % levels_[j + 1] != 0) return false;
    }
    return true;
}

HierarchyVector::HierarchyVector(AggregationScheme s, Eigen::VectorXd v, int i)
    : scheme(std::move(s)), values(std::move(v)), period_index(i) {
    if (values.size() != scheme.node_count()) {
        throw DimensionError("hierarchy vector has length " + std::to_string(values.size()) +
                             ", expected m_0=" + std::to_string(scheme.node_count()));
    }
}

Eigen::VectorBlock<const Eigen::VectorXd> HierarchyVector::level(int k) const {
    const LevelSpan span = scheme.level_offsets().at(k);
    return values.segment(span.start, span.length);
}

Eigen::VectorBlock<Eigen::VectorXd> HierarchyVector::level(int k) {
    const LevelSpan span = scheme.level_offsets().at(k);
    return values.segment(span.start, span.length);
}

std::vector<double> aggregate_series(const std::vector<double>& bottom,
                                     const AggregationScheme& scheme, int k) {
    if (!scheme.contains(k)) {
        throw InvalidLevelError("level " + std::to_string(k) + " is not part of the scheme");
    }
    const int m = scheme.m();
    const auto T = static_cast<int>(bottom.size());
    if (T < m) {
        throw InsufficientDataError("series of length " + std::to_string(T) +
                                    " holds no complete top-level period (m=" + std::to_string(m) +
                                    ")");
    }
    const int start = T - (T / m) * m;  // 0-based t*-1
    const int n_agg = (T / m) * (m / k);
    std::vector<double> out(static_cast<std::size_t>(n_agg));
    for (int j = 0; j < n_agg; ++j) {
        double sum = 0.0;
        for (int t = start + j * k; t < start + (j + 1) * k; ++t) sum += bottom[t];
        out[j] = sum;
    }
    return out;
}

SummingMatrix build_summing_matrix(const AggregationScheme& scheme) {
    const int m0 = scheme.node_count();
    const int m = scheme.m();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m0, m);
    int row = 0;
    for (int k : scheme.levels()) {
        const int mk = m / k;
        for (int u = 0; u < mk; ++u) {
            s.row(row + u).segment(u * k, k).setOnes();
        }
        row += mk;
    }
    return SummingMatrix{scheme, std::move(s)};
}

HierarchyVector stack_period(const std::map<int, std::vector<double>>& series_per_level,
                             const AggregationScheme& scheme, int i) {
    if (i < 1) {
        throw IncompletePeriodError("period index must be >= 1");
    }
    Eigen::VectorXd values(scheme.node_count());
    int pos = 0;
    for (int k : scheme.levels()) {
        const int mk = scheme.frequency(k);
        const auto it = series_per_level.find(k);
        if (it == series_per_level.end() ||
            static_cast<int>(it->second.size()) < mk * i) {
            throw IncompletePeriodError("level " + std::to_string(k) + " has no complete period " +
                                        std::to_string(i));
        }
        for (int u = 0; u < mk; ++u) {
            values[pos + u] = it->second[static_cast<std::size_t>(mk) * (i - 1) + u];
        }
        pos += mk;
    }
    return HierarchyVector(scheme, std::move(values), i);
}

}  // namespace hfu
