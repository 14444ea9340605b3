#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hfu/arma.hpp"
#include "hfu/updating.hpp"

namespace hfu {

enum class FitMode { aicc, correct_orders };
enum class TrainEval { last_period, all_periods };

std::string to_string(FitMode mode);
FitMode fit_mode_from_string(const std::string& name);

struct SimConfig {
    int p_bot = 1;
    int q_bot = 0;
    std::vector<int> scheme_levels{4, 1};
    int n_top = 100;
    double sigma2 = 1.0;
    int reps = 50;
    FitMode fit_mode = FitMode::aicc;
    std::vector<ReconMethod> methods{ReconMethod::bottom_up, ReconMethod::mint_full,
                                     ReconMethod::mint_shrink};
    std::uint64_t seed = 1;
    int burn_in = 100;
    int threads = 1;
    TrainEval train_eval = TrainEval::last_period;
    int cov_window = 0;  // most recent periods used for W0; 0 = full span
    bool allow_large = false;
    bool allow_pseudo_inverse = false;
    std::vector<int> z_list;  // empty = all z in [0, m)

    void validate() const;
};

/// One result cell; level 0 encodes the across-levels average.
struct SimRow {
    int rep = 0;
    std::string method;
    int z = 0;
    int level = 0;
    double train_rrmse = 0.0;
    bool train_flag = false;
    double test_rrmse = 0.0;
    bool test_flag = false;
};

struct SimFailure {
    int rep = 0;
    std::string method;
    int z = -1;  // -1 when the whole repetition failed
    std::string stage;
    std::string message;
};

struct RepMeta {
    int rep = 0;
    std::uint64_t seed = 0;
    std::string dgp;
    std::map<int, std::pair<int, int>> fitted_orders;
    double shrink_lambda = 1.0;
    bool fair_ref_base = false;  // a z=0 reconciliation failed, base used as reference
};

struct SimResult {
    std::vector<SimRow> rows;
    std::vector<SimFailure> failures;
    std::vector<RepMeta> rep_meta;
};

/// Random stationary/invertible ARMA draw: partial autocorrelations uniform
/// on (-0.95, 0.95) mapped through the Durbin-Levinson recursion; mean 0,
/// unit innovation variance.
ArmaModel draw_stationary_arma(int p, int q, std::mt19937_64& rng);

/// Simulates n observations after discarding burn_in start-up values.
std::vector<double> simulate_arma(const ArmaModel& model, int n, int burn_in,
                                  std::mt19937_64& rng);

/// Simulates n_top complete periods at the bottom level and aggregates them
/// onto every level of the scheme.
std::map<int, std::vector<double>> simulate_hierarchy(const ArmaModel& model,
                                                      const AggregationScheme& scheme, int n_top,
                                                      int burn_in, std::mt19937_64& rng);

/// Correctly specified fitted orders per level under aggregation closure:
/// level k gets (p, floor((p(k-1)+(k-1)+q)/k)).
std::map<int, std::pair<int, int>> correct_orders(const AggregationScheme& scheme, int p_bot,
                                                  int q_bot);

/// Everything derived from one fitted hierarchy: per-level models, rolling
/// stacked base forecasts, the in-sample error sample and the z=0
/// covariances. Shared by the simulation study and the data workflow.
struct FittedHierarchy {
    AggregationScheme scheme;
    std::map<int, ArmaModel> models;
    int n_periods = 0;  // complete periods in the supplied data
    int i_min = 1;      // first period with enough history for forecasts
    Eigen::MatrixXd error_rows;
    std::vector<HierarchyVector> base_by_period;  // periods i_min .. n_periods+1
    MethodCovariances covariances;
    double shrink_lambda = 1.0;
    bool shrink_degenerate = false;

    const HierarchyVector& base_forecast(int i) const;
};

/// Fits per-level models (AICc selection, or the supplied fixed orders when
/// present), computes rolling one-period-ahead stacked base forecasts and
/// their in-sample errors, and estimates the z=0 covariances. With a
/// transform, models are fitted on the transformed series while forecasts,
/// errors and covariances live on the original scale.
FittedHierarchy fit_hierarchy(
    const std::map<int, std::vector<double>>& levels, const AggregationScheme& scheme,
    const std::optional<std::map<int, std::pair<int, int>>>& fixed_orders = std::nullopt,
    int cov_window = 0, int max_p = 3, int max_q = 3, bool compute_shrink = true,
    Transform transform = Transform::none);

SimResult run_simulation(const SimConfig& config);

}  // namespace hfu
