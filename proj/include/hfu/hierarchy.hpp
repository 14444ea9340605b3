#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "hfu/errors.hpp"

namespace hfu {

/// Start offset and length of one level's slice inside a stacked vector.
struct LevelSpan {
    int start = 0;
    int length = 0;
};

/// A temporal aggregation scheme: the ordered factor set K = {m, ..., 1}.
///
/// Levels are stored in decreasing order, starting with the number of bottom
/// observations per top-level period m and ending with 1. Every level must
/// divide m. The frequency of level k is M_k = m/k, the number of level-k
/// values per top-level period.
class AggregationScheme {
public:
    /// Builds a scheme from a list of aggregation factors. The list is sorted
    /// into decreasing order; it must contain 1, its largest element is m, and
    /// every element must divide m. Throws InvalidSchemeError otherwise.
    explicit AggregationScheme(std::vector<int> levels);

    int m() const { return levels_.front(); }
    const std::vector<int>& levels() const { return levels_; }
    int level_count() const { return static_cast<int>(levels_.size()); }

    bool contains(int k) const;

    /// Frequency M_k = m/k of level k. Throws InvalidLevelError.
    int frequency(int k) const;

    /// Total number of nodes m_0 = sum over k of m/k.
    int node_count() const;

    /// Slicing table for stacked vectors: level -> (start, length), with
    /// levels stacked top first and length M_k each.
    std::map<int, LevelSpan> level_offsets() const;

    /// Flat index of slot u (1-based within the period) of level k.
    int index_of(int k, int u) const;

    /// True when the levels form a divisor chain (each level divides the next
    /// coarser one), i.e. the hierarchy is representable as a single tree.
    bool is_nested_chain() const;

    bool operator==(const AggregationScheme& other) const {
        return levels_ == other.levels_;
    }
    bool operator!=(const AggregationScheme& other) const {
        return !(*this == other);
    }

private:
    std::vector<int> levels_;  // decreasing, levels_[0] = m, back() = 1
};

/// One top-level period of a temporal hierarchy, stacked top level first and
/// within each level in temporal order. Length is always m_0.
struct HierarchyVector {
    AggregationScheme scheme;
    Eigen::VectorXd values;
    int period_index = 1;

    HierarchyVector(AggregationScheme s, Eigen::VectorXd v, int i = 1);

    /// Slice of one level (length M_k).
    Eigen::VectorBlock<const Eigen::VectorXd> level(int k) const;
    Eigen::VectorBlock<Eigen::VectorXd> level(int k);

    /// Value of slot u (1-based) of level k.
    double at(int k, int u) const { return values[scheme.index_of(k, u)]; }
    double& at(int k, int u) { return values[scheme.index_of(k, u)]; }

    /// Bottom-level slice (length m).
    Eigen::VectorBlock<const Eigen::VectorXd> bottom() const { return level(1); }
};

/// The summing matrix S mapping bottom-level values to the stacked hierarchy,
/// one Kronecker block I_{M_k} (x) 1_k' per level, top level first.
struct SummingMatrix {
    AggregationScheme scheme;
    Eigen::MatrixXd entries;  // m_0 x m, binary
};

/// Non-overlapping k-aggregates of a bottom-level series. Aggregation starts
/// at t* = T - floor(T/m)*m + 1 (1-based), so a leading remainder that does
/// not fill a complete top-level period is discarded. Returns floor(T/m)*m/k
/// sums. Throws InvalidLevelError when k is not in the scheme and
/// InsufficientDataError when no complete top-level period exists.
std::vector<double> aggregate_series(const std::vector<double>& bottom,
                                     const AggregationScheme& scheme, int k);

SummingMatrix build_summing_matrix(const AggregationScheme& scheme);

/// Stacks period i (1-based) from per-level series into a HierarchyVector.
/// Each level's series must hold at least M_k * i entries.
HierarchyVector stack_period(const std::map<int, std::vector<double>>& series_per_level,
                             const AggregationScheme& scheme, int i);

}  // namespace hfu
