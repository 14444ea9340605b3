#include "hfu/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "hfu/evaluation.hpp"
#include "hfu/rng.hpp"

namespace hfu {

namespace {

std::vector<double> pacf_to_ar(const std::vector<double>& pacf) {
    std::vector<double> coeffs;
    for (std::size_t j = 0; j < pacf.size(); ++j) {
        std::vector<double> next(j + 1);
        next[j] = pacf[j];
        for (std::size_t i = 0; i < j; ++i) {
            next[i] = coeffs[i] - pacf[j] * coeffs[j - 1 - i];
        }
        coeffs = std::move(next);
    }
    return coeffs;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n) break;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

std::string describe_dgp(const ArmaModel& model) {
    std::ostringstream out;
    out << "ARMA(" << model.p << "," << model.q << ") ar=[";
    for (int j = 0; j < model.p; ++j) out << (j ? "," : "") << model.ar[static_cast<std::size_t>(j)];
    out << "] ma=[";
    for (int j = 0; j < model.q; ++j) out << (j ? "," : "") << model.ma[static_cast<std::size_t>(j)];
    out << "] sigma2=" << model.sigma2;
    return out.str();
}

struct RepOutcome {
    std::vector<SimRow> rows;
    std::vector<SimFailure> failures;
    RepMeta meta;
};

}  // namespace

std::string to_string(FitMode mode) {
    return mode == FitMode::aicc ? "aicc" : "correct_orders";
}

FitMode fit_mode_from_string(const std::string& name) {
    if (name == "aicc") return FitMode::aicc;
    if (name == "correct_orders" || name == "correct") return FitMode::correct_orders;
    throw Error("unknown fit mode '" + name + "' (expected aicc or correct_orders)");
}

void SimConfig::validate() const {
    const AggregationScheme scheme(scheme_levels);  // throws on invalid schemes
    if (reps < 1) throw UsageError("reps must be >= 1");
    if (n_top < 20) throw UsageError("n_top must be >= 20");
    if (p_bot < 0 || p_bot > 2 || q_bot < 0 || q_bot > 2) {
        throw UsageError("p and q must lie in {0,1,2}");
    }
    if (!(sigma2 > 0.0)) throw UsageError("sigma2 must be positive");
    if (burn_in < 0) throw UsageError("burn_in must be non-negative");
    if (methods.empty()) throw UsageError("at least one reconciliation method is required");
    if (scheme.m() > 24 && !allow_large) {
        throw UsageError("scheme with m=" + std::to_string(scheme.m()) +
                    " is a large run; pass allow_large (--allow-large) to proceed");
    }
    for (int z : z_list) {
        if (z < 0 || z >= scheme.m()) {
            throw UsageError("z=" + std::to_string(z) + " outside [0, m)");
        }
    }
}

ArmaModel draw_stationary_arma(int p, int q, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(-0.95, 0.95);
    ArmaModel model;
    model.p = p;
    model.q = q;
    std::vector<double> pacf(static_cast<std::size_t>(p));
    for (double& v : pacf) v = unif(rng);
    model.ar = pacf_to_ar(pacf);
    std::vector<double> ma_pacf(static_cast<std::size_t>(q));
    for (double& v : ma_pacf) v = unif(rng);
    model.ma = pacf_to_ar(ma_pacf);
    for (double& v : model.ma) v = -v;
    model.mean = 0.0;
    model.sigma2 = 1.0;
    model.validate();
    return model;
}

std::vector<double> simulate_arma(const ArmaModel& model, int n, int burn_in,
                                  std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(model.sigma2));
    const int total = n + burn_in;
    std::vector<double> x(static_cast<std::size_t>(total), 0.0);
    std::vector<double> e(static_cast<std::size_t>(total), 0.0);
    for (int t = 0; t < total; ++t) {
        double value = gauss(rng);
        e[static_cast<std::size_t>(t)] = value;
        for (int j = 1; j <= model.p && t - j >= 0; ++j) {
            value += model.ar[static_cast<std::size_t>(j - 1)] * x[static_cast<std::size_t>(t - j)];
        }
        for (int i = 1; i <= model.q && t - i >= 0; ++i) {
            value += model.ma[static_cast<std::size_t>(i - 1)] * e[static_cast<std::size_t>(t - i)];
        }
        x[static_cast<std::size_t>(t)] = value;
    }
    std::vector<double> out(x.begin() + burn_in, x.end());
    for (double& v : out) v += model.mean;
    return out;
}

std::map<int, std::vector<double>> simulate_hierarchy(const ArmaModel& model,
                                                      const AggregationScheme& scheme, int n_top,
                                                      int burn_in, std::mt19937_64& rng) {
    const std::vector<double> bottom = simulate_arma(model, n_top * scheme.m(), burn_in, rng);
    std::map<int, std::vector<double>> levels;
    for (int k : scheme.levels()) {
        levels[k] = k == 1 ? bottom : aggregate_series(bottom, scheme, k);
    }
    return levels;
}

std::map<int, std::pair<int, int>> correct_orders(const AggregationScheme& scheme, int p_bot,
                                                  int q_bot) {
    std::map<int, std::pair<int, int>> orders;
    for (int k : scheme.levels()) {
        if (k == 1) {
            orders[k] = {p_bot, q_bot};
        } else {
            const int r = (p_bot * (k - 1) + (k - 1) + q_bot) / k;
            orders[k] = {p_bot, r};
        }
    }
    return orders;
}

const HierarchyVector& FittedHierarchy::base_forecast(int i) const {
    if (i < i_min || i > n_periods + 1) {
        throw DimensionError("no base forecast available for period " + std::to_string(i));
    }
    return base_by_period[static_cast<std::size_t>(i - i_min)];
}

FittedHierarchy fit_hierarchy(const std::map<int, std::vector<double>>& levels,
                              const AggregationScheme& scheme,
                              const std::optional<std::map<int, std::pair<int, int>>>& fixed_orders,
                              int cov_window, int max_p, int max_q, bool compute_shrink,
                              Transform transform) {
    const auto bottom_it = levels.find(1);
    if (bottom_it == levels.end()) throw ConsistencyError("missing bottom-level series");
    const auto bottom_len = static_cast<int>(bottom_it->second.size());
    if (bottom_len % scheme.m() != 0) {
        throw ConsistencyError("bottom series length must be a multiple of m");
    }
    FittedHierarchy fh{scheme, {}, bottom_len / scheme.m(), 1, {}, {}, {}, 1.0, false};

    std::map<int, std::vector<double>> modeling;  // transformed when requested
    for (int k : scheme.levels()) {
        const auto it = levels.find(k);
        if (it == levels.end() ||
            static_cast<int>(it->second.size()) != fh.n_periods * scheme.frequency(k)) {
            throw ConsistencyError("level " + std::to_string(k) +
                                   " series does not cover the same periods as the bottom");
        }
        std::vector<double> series = it->second;
        if (transform != Transform::none) {
            for (double& v : series) v = apply_transform(transform, v);
        }
        ArmaModel model;
        if (fixed_orders.has_value()) {
            const auto [p, q] = fixed_orders->at(k);
            model = fit_arma(series, p, q);
        } else {
            model = select_order_aicc(series, max_p, max_q);
        }
        model.level = k;
        fh.models[k] = std::move(model);
        modeling[k] = std::move(series);
    }

    for (int k : scheme.levels()) {
        const int need = std::max(fh.models[k].p, fh.models[k].q);
        const int mk = scheme.frequency(k);
        const int i_min_k = need == 0 ? 1 : 1 + (need + mk - 1) / mk;
        fh.i_min = std::max(fh.i_min, i_min_k);
    }
    if (fh.i_min > fh.n_periods) {
        throw InsufficientDataError("not enough periods to produce any in-sample base forecast");
    }

    // Rolling one-period-ahead stacked base forecasts for i_min .. n_periods+1.
    std::map<int, std::vector<std::vector<double>>> rolling;
    for (int k : scheme.levels()) {
        rolling[k] = rolling_period_forecasts(fh.models[k], modeling.at(k), scheme.frequency(k),
                                              fh.i_min, fh.n_periods + 1);
    }
    for (int i = fh.i_min; i <= fh.n_periods + 1; ++i) {
        Eigen::VectorXd stacked(scheme.node_count());
        int pos = 0;
        for (int k : scheme.levels()) {
            const auto& fc = rolling[k][static_cast<std::size_t>(i - fh.i_min)];
            for (std::size_t u = 0; u < fc.size(); ++u) {
                stacked[pos + static_cast<int>(u)] = invert_transform(transform, fc[u]);
            }
            pos += scheme.frequency(k);
        }
        fh.base_by_period.emplace_back(scheme, std::move(stacked), i);
    }

    const int all_rows = fh.n_periods - fh.i_min + 1;
    const int first_row = (cov_window > 0 && all_rows > cov_window) ? all_rows - cov_window : 0;
    const int rows = all_rows - first_row;
    fh.error_rows.resize(rows, scheme.node_count());
    for (int r = 0; r < rows; ++r) {
        const int i = fh.i_min + first_row + r;
        const HierarchyVector actual = stack_period(levels, scheme, i);
        fh.error_rows.row(r) = (actual.values - fh.base_forecast(i).values).transpose();
    }

    if (rows >= 2) {
        fh.covariances.sample = estimate_base_error_covariance(fh.error_rows);
        if (compute_shrink) {
            const ShrinkageSelection sel = select_shrinkage(fh.error_rows, 5);
            fh.shrink_lambda = sel.lambda;
            fh.shrink_degenerate = sel.degenerate;
            fh.covariances.shrunk = shrink_covariance(*fh.covariances.sample, sel.lambda);
        }
    }
    return fh;
}

namespace {

// Evaluates the z-sweep over the given periods, accumulating fair-compared
// errors per (method, z). A method's failed run is logged and skipped.
struct SweepEvaluator {
    const SimConfig& config;
    const AggregationScheme& scheme;
    const std::map<int, std::vector<double>>& data;
    const FittedHierarchy& fh;
    const std::vector<int>& z_values;
    const std::vector<PrunedSystem>& systems;  // indexed by z
    int rep;

    std::map<std::pair<std::string, int>, ErrorAccumulator> accumulators;
    std::vector<SimFailure>* failures;
    bool* fair_ref_base;

    void eval_periods(const std::vector<int>& periods) {
        const UpdateOptions options{false, config.allow_pseudo_inverse};
        for (int i : periods) {
            const HierarchyVector actual = stack_period(data, scheme, i);
            const HierarchyVector& base = fh.base_forecast(i);
            std::map<int, std::vector<double>> histories;
            for (int k : scheme.levels()) {
                const auto& series = data.at(k);
                const int len = scheme.frequency(k) * (i - 1);
                histories[k] = std::vector<double>(series.begin(), series.begin() + len);
            }
            const auto& bottom = data.at(1);
            for (ReconMethod method : config.methods) {
                const std::string name = to_string(method);
                HierarchyVector ref0 = base;
                std::optional<UpdateRun> run0;
                try {
                    run0 = hierarchical_forecast_update(fh.models, histories, {}, scheme, method,
                                                        fh.covariances.resolve(method), options);
                    ref0 = run0->restored;
                } catch (const Error& err) {
                    failures->push_back(SimFailure{rep, name, 0, "z=0 reference", err.what()});
                    *fair_ref_base = true;
                }
                for (int z : z_values) {
                    std::optional<UpdateRun> run;
                    try {
                        if (z == 0 && run0.has_value()) {
                            run = run0;
                        } else {
                            const std::vector<double> obs(
                                bottom.begin() + static_cast<std::ptrdiff_t>(scheme.m()) * (i - 1),
                                bottom.begin() + static_cast<std::ptrdiff_t>(scheme.m()) * (i - 1) +
                                    z);
                            run = hierarchical_forecast_update(fh.models, histories, obs, scheme,
                                                               method,
                                                               fh.covariances.resolve(method),
                                                               options);
                        }
                    } catch (const Error& err) {
                        failures->push_back(SimFailure{rep, name, z, "update", err.what()});
                        continue;
                    }
                    const HierarchyVector fair =
                        stack_fair(ref0, run->restored, systems[static_cast<std::size_t>(z)]);
                    auto [it, inserted] = accumulators.try_emplace(std::make_pair(name, z), scheme);
                    it->second.add_period(actual, fair, base);
                }
            }
        }
    }
};

RepOutcome run_one_rep(const SimConfig& config, const AggregationScheme& scheme,
                       const std::vector<int>& z_values, int rep) {
    RepOutcome outcome;
    outcome.meta.rep = rep;
    outcome.meta.seed = derive_seed(config.seed, static_cast<std::uint64_t>(rep));
    try {
        auto rng = make_rng(config.seed, static_cast<std::uint64_t>(rep));
        ArmaModel dgp = draw_stationary_arma(config.p_bot, config.q_bot, rng);
        dgp.sigma2 = config.sigma2;
        outcome.meta.dgp = describe_dgp(dgp);

        const auto data = simulate_hierarchy(dgp, scheme, config.n_top, config.burn_in, rng);
        std::map<int, std::vector<double>> train;
        for (int k : scheme.levels()) {
            const auto& series = data.at(k);
            const int len = scheme.frequency(k) * (config.n_top - 1);
            train[k] = std::vector<double>(series.begin(), series.begin() + len);
        }

        std::optional<std::map<int, std::pair<int, int>>> orders;
        if (config.fit_mode == FitMode::correct_orders) {
            orders = correct_orders(scheme, config.p_bot, config.q_bot);
        }
        const bool need_shrink =
            std::find(config.methods.begin(), config.methods.end(), ReconMethod::mint_shrink) !=
            config.methods.end();
        FittedHierarchy fh =
            fit_hierarchy(train, scheme, orders, config.cov_window, 3, 3, need_shrink);
        for (const auto& [k, model] : fh.models) {
            outcome.meta.fitted_orders[k] = {model.p, model.q};
        }
        outcome.meta.shrink_lambda = fh.shrink_lambda;

        std::vector<PrunedSystem> systems;
        systems.reserve(static_cast<std::size_t>(scheme.m()));
        for (int z = 0; z < scheme.m(); ++z) systems.emplace_back(scheme, z);

        if (fh.i_min > config.n_top - 1) {
            throw InsufficientDataError("training span too short for in-sample evaluation");
        }
        std::vector<int> train_periods;
        if (config.train_eval == TrainEval::last_period) {
            train_periods.push_back(config.n_top - 1);
        } else {
            for (int i = fh.i_min; i <= config.n_top - 1; ++i) train_periods.push_back(i);
        }

        SweepEvaluator train_eval{config,   scheme, data, fh, z_values, systems, rep,
                                  {},       &outcome.failures, &outcome.meta.fair_ref_base};
        train_eval.eval_periods(train_periods);
        SweepEvaluator test_eval{config,   scheme, data, fh, z_values, systems, rep,
                                 {},       &outcome.failures, &outcome.meta.fair_ref_base};
        test_eval.eval_periods({config.n_top});

        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (ReconMethod method : config.methods) {
            const std::string name = to_string(method);
            for (int z : z_values) {
                const auto key = std::make_pair(name, z);
                const auto train_it = train_eval.accumulators.find(key);
                const auto test_it = test_eval.accumulators.find(key);
                if (train_it == train_eval.accumulators.end() &&
                    test_it == test_eval.accumulators.end()) {
                    continue;  // failed on both sides, recorded in failures
                }
                std::optional<ErrorReport> train_report, test_report;
                if (train_it != train_eval.accumulators.end()) {
                    train_report = train_it->second.report(z, name);
                }
                if (test_it != test_eval.accumulators.end()) {
                    test_report = test_it->second.report(z, name);
                }
                auto make_row = [&](int level) {
                    SimRow row;
                    row.rep = rep;
                    row.method = name;
                    row.z = z;
                    row.level = level;
                    auto pick = [&](const std::optional<ErrorReport>& report, double& value,
                                    bool& flag) {
                        if (!report.has_value()) {
                            value = nan;
                            flag = false;
                            return;
                        }
                        const Rrmse& r =
                            level == 0 ? report->overall : report->per_level.at(level);
                        value = r.value;
                        flag = r.infinite_flag;
                    };
                    pick(train_report, row.train_rrmse, row.train_flag);
                    pick(test_report, row.test_rrmse, row.test_flag);
                    return row;
                };
                for (int k : scheme.levels()) outcome.rows.push_back(make_row(k));
                outcome.rows.push_back(make_row(0));
            }
        }
    } catch (const std::exception& err) {
        outcome.rows.clear();
        outcome.failures.push_back(SimFailure{rep, "", -1, "repetition", err.what()});
    }
    return outcome;
}

}  // namespace

SimResult run_simulation(const SimConfig& config) {
    config.validate();
    const AggregationScheme scheme(config.scheme_levels);
    std::vector<int> z_values = config.z_list;
    if (z_values.empty()) {
        for (int z = 0; z < scheme.m(); ++z) z_values.push_back(z);
    } else {
        std::sort(z_values.begin(), z_values.end());
        z_values.erase(std::unique(z_values.begin(), z_values.end()), z_values.end());
        if (std::find(z_values.begin(), z_values.end(), 0) == z_values.end()) {
            z_values.insert(z_values.begin(), 0);  // z=0 anchors the fair comparison
        }
    }

    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(config.reps));
    parallel_for(config.reps, config.threads, [&](int rep) {
        outcomes[static_cast<std::size_t>(rep)] = run_one_rep(config, scheme, z_values, rep);
    });

    SimResult result;
    for (auto& outcome : outcomes) {
        result.rows.insert(result.rows.end(), outcome.rows.begin(), outcome.rows.end());
        result.failures.insert(result.failures.end(), outcome.failures.begin(),
                               outcome.failures.end());
        result.rep_meta.push_back(std::move(outcome.meta));
    }
    return result;
}

}  // namespace hfu
