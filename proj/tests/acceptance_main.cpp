// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Exit status is the number of failed criteria.
//
// Usage: acceptance [--large-only | --all]
//   default      criteria 1-7, 9, 10
//   --large-only only the gated large-hierarchy criterion 8
//   --all        everything

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hfu/commands.hpp"
#include "hfu/evaluation.hpp"
#include "hfu/rng.hpp"
#include "hfu/simulation.hpp"
#include "hfu/updating.hpp"
#include "test_util.hpp"

namespace {

using hfu::AggregationScheme;
using hfu::ArmaModel;
using hfu::ReconMethod;

struct Criterion {
    int id;
    std::string name;
    std::function<void(std::string&)> run;  // throws or appends detail on failure
};

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void require(bool condition, const std::string& message) {
    if (!condition) throw std::runtime_error(message);
}

// ---------------------------------------------------------------------------
// 1. Summing-matrix golden test for K={12,3,1}.
void criterion_summing_golden(std::string&) {
    const auto s = hfu::build_summing_matrix(AggregationScheme({12, 3, 1}));
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(17, 12);
    expected.row(0).setOnes();
    for (int quarter = 0; quarter < 4; ++quarter) {
        expected.row(1 + quarter).segment(3 * quarter, 3).setOnes();
    }
    expected.block(5, 0, 12, 12).setIdentity();
    require(s.entries == expected, "17x12 summing matrix differs from the printed one");
}

// ---------------------------------------------------------------------------
// 2. Appendix golden test: K={12,3,1}, z=7 reductions, exact on integers.
void criterion_appendix_reduction(std::string&) {
    const AggregationScheme scheme({12, 3, 1});
    const hfu::PrunedSystem system(scheme, 7);
    const std::vector<double> bottom_obs{11, 12, 13, 14, 15, 16, 17};
    const auto observed = hfu::PartialObservation::from_bottom(scheme, bottom_obs);

    std::map<int, std::vector<double>> fc_levels;
    fc_levels[12] = {500};
    fc_levels[3] = {71, 72, 73, 74};
    fc_levels[1] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const auto fc = hfu::stack_period(fc_levels, scheme, 1);

    const Eigen::VectorXd direct = hfu::reduce(fc, observed, system);
    const Eigen::VectorXd nested = hfu::reduce_nested(fc, observed, system);

    double observed_sum = 0.0;
    for (double v : bottom_obs) observed_sum += v;
    require(direct[0] == 500 - observed_sum, "annual row must subtract sum_{w=1..7} y^[1]_w");
    require(direct[1] == 73 - 17, "quarter u=3 row must subtract y^[1]_7");
    require(direct == nested, "reduce and reduce_nested disagree on the worked example");
}

// ---------------------------------------------------------------------------
// 3. S_z identity across schemes and z.
void criterion_sz_identity(std::string&) {
    for (const auto& levels :
         {std::vector<int>{4, 1}, {12, 1}, {12, 3, 1}, {4, 2, 1}}) {
        const AggregationScheme scheme(levels);
        const Eigen::MatrixXd s = hfu::build_summing_matrix(scheme).entries;
        for (int z = 0; z < scheme.m(); ++z) {
            const hfu::PrunedSystem system(scheme, z);
            require(system.pruned_summing() == testutil::direct_pruned_summing(scheme, z),
                    "S_z differs from the directly built pruned summing matrix");
            Eigen::MatrixXd selector = Eigen::MatrixXd::Zero(scheme.m(), scheme.m() - z);
            selector.bottomRows(scheme.m() - z).setIdentity();
            require(system.pruned_summing() == system.dense_P() * s * selector,
                    "S_z differs from P_z S [0;I]");
        }
    }
}

// ---------------------------------------------------------------------------
// 4. minT contract suite.
void criterion_mint_contract(std::string&) {
    const AggregationScheme scheme({2, 1});
    const Eigen::MatrixXd s = hfu::build_summing_matrix(scheme).entries;

    // Hand-computed mapping matrix at W = I.
    Eigen::MatrixXd w_identity = Eigen::MatrixXd::Identity(3, 3);
    const auto est_identity = hfu::estimate_base_error_covariance([] {
        // Build an exactly-identity covariance through the API by synthetic rows.
        Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(4, 3);
        rows(0, 0) = rows(1, 1) = rows(2, 2) = std::sqrt(3.0 / 2.0);
        rows.row(3) = -rows.row(0) - rows.row(1) - rows.row(2);
        return rows;
    }());
    hfu::CovarianceEstimate identity_est = est_identity;
    identity_est.W = w_identity;
    identity_est.rank = 3;
    identity_est.min_eigenvalue = identity_est.max_eigenvalue = 1.0;
    const auto weights = hfu::mapping_matrix(ReconMethod::mint_full, s, identity_est);
    Eigen::MatrixXd expected_g(2, 3);
    expected_g << 1.0 / 3, 2.0 / 3, -1.0 / 3, 1.0 / 3, -1.0 / 3, 2.0 / 3;
    require((weights.G - expected_g).cwiseAbs().maxCoeff() < 1e-12,
            "K={2,1}, W=I mapping matrix mismatch");

    auto rng = hfu::make_rng(400, 0);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd a(3, 3);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) a(r, c) = gauss(rng);
        }
        hfu::CovarianceEstimate est;
        est.W = a * a.transpose() + 0.05 * Eigen::MatrixXd::Identity(3, 3);
        est.n = 3;
        est.sample_count = 100;
        est.rank = 3;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(est.W, Eigen::EigenvaluesOnly);
        est.min_eigenvalue = solver.eigenvalues().minCoeff();
        est.max_eigenvalue = solver.eigenvalues().maxCoeff();

        const auto mint = hfu::mapping_matrix(ReconMethod::mint_full, s, est);
        require((s * mint.G * s - s).cwiseAbs().maxCoeff() < 1e-8, "SGS=S violated");

        // Idempotence and the coherent fixed point.
        Eigen::VectorXd base(3);
        base << gauss(rng), gauss(rng), gauss(rng);
        const Eigen::VectorXd once = hfu::reconcile(mint, base);
        require((hfu::reconcile(mint, once) - once).cwiseAbs().maxCoeff() < 1e-10,
                "reconcile is not idempotent");
        Eigen::VectorXd bvec(2);
        bvec << gauss(rng), gauss(rng);
        const Eigen::VectorXd coherent = s * bvec;
        require((hfu::reconcile(mint, coherent) - coherent).cwiseAbs().maxCoeff() < 1e-10,
                "coherent input is not a fixed point");

        // Brute-force trace optimality against bottom-up and 1000 feasible G.
        const auto trace_of = [&](const Eigen::MatrixXd& g) {
            return (s * g * est.W * g.transpose() * s.transpose()).trace();
        };
        const double mint_trace = trace_of(mint.G);
        Eigen::MatrixXd bu(2, 3);
        bu << 0, 1, 0, 0, 0, 1;
        require(mint_trace <= trace_of(bu) + 1e-10, "minT trace exceeds bottom-up");
        const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(3, 3) - s * mint.G;
        for (int random_g = 0; random_g < 1000; ++random_g) {
            Eigen::MatrixXd noise(2, 3);
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 3; ++c) noise(r, c) = gauss(rng);
            }
            const Eigen::MatrixXd candidate = mint.G + noise * proj;
            require(mint_trace <= trace_of(candidate) + 1e-10,
                    "a random feasible G beat the minT trace");
        }
    }
}

// ---------------------------------------------------------------------------
// 5. Theorem 1 statistical check: AR(1), K={4,1}, true models, true-W minT.
void criterion_theorem1(std::string& detail) {
    const double phi = 0.5;
    const int m = 4;
    const AggregationScheme scheme({4, 1});
    ArmaModel bottom_model;
    bottom_model.p = 1;
    bottom_model.ar = {phi};
    bottom_model.validate();
    const ArmaModel top_model = testutil::ar1_aggregate_model(phi, 1.0, m);
    std::map<int, ArmaModel> models{{1, bottom_model}, {4, top_model}};

    hfu::CovarianceEstimate w0;
    w0.W = testutil::ar1_true_w(phi, 1.0, m, top_model.sigma2);
    w0.n = m + 1;
    w0.sample_count = 1 << 20;
    w0.rank = m + 1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w0.W, Eigen::EigenvaluesOnly);
    w0.min_eigenvalue = solver.eigenvalues().minCoeff();
    w0.max_eigenvalue = solver.eigenvalues().maxCoeff();

    const int periods = 5000;
    const int window = 50;  // AR(1)/ARMA(1,1) conditioning is exact far below this
    auto rng = hfu::make_rng(401, 0);
    const auto data = hfu::simulate_hierarchy(bottom_model, scheme, periods + window + 1, 200,
                                              rng);

    std::vector<hfu::HierarchyVector> actuals, base;
    std::map<int, std::vector<hfu::HierarchyVector>> recon;  // per z
    for (int s = 0; s < periods; ++s) {
        const int i = window + 1 + s;
        std::map<int, std::vector<double>> histories;
        for (int k : scheme.levels()) {
            const auto& series = data.at(k);
            const int mk = scheme.frequency(k);
            histories[k] = std::vector<double>(series.begin() + mk * (i - 1 - window),
                                               series.begin() + mk * (i - 1));
        }
        const auto actual = hfu::stack_period(data, scheme, i);
        actuals.push_back(actual);
        base.push_back(hfu::update_forecasts(models, histories, scheme, window + 1, 0));
        const auto& bottom = data.at(1);
        for (int z = 0; z < m; ++z) {
            const std::vector<double> obs(bottom.begin() + m * (i - 1),
                                          bottom.begin() + m * (i - 1) + z);
            const auto run = hfu::hierarchical_forecast_update(models, histories, obs, scheme,
                                                               ReconMethod::mint_full, w0);
            auto restored = run.restored;
            recon[z].push_back(std::move(restored));
        }
    }
    // Align period indices so the trace diagnostic sees matching vectors.
    for (auto& hv : actuals) hv.period_index = 1;

    std::ostringstream summary;
    for (int z = 0; z < m; ++z) {
        const hfu::PrunedSystem system(scheme, z);
        const auto report = hfu::trace_diagnostic(actuals, base, recon[z], system);
        summary << "z=" << z << " base=" << report.total.trace_base
                << " recon=" << report.total.trace_recon << " margin=" << report.total.margin
                << "+-" << report.total.margin_se << "; ";
        require(report.total.satisfied,
                "tr Cov(P_z(y - ytilde)) exceeded tr Cov(P_z(y - yhat)) beyond 2 SE at z=" +
                    std::to_string(z));
    }

    // Corollary 1: the reconciled trace does not increase with z, compared on
    // the slots still unobserved at the larger z.
    for (int z = 0; z + 1 < m; ++z) {
        const hfu::PrunedSystem next(scheme, z + 1);
        const auto& kept = next.kept_indices();
        std::vector<double> diffs;
        diffs.reserve(actuals.size());
        Eigen::VectorXd mean_lo = Eigen::VectorXd::Zero(static_cast<int>(kept.size()));
        Eigen::VectorXd mean_hi = mean_lo;
        for (std::size_t s = 0; s < actuals.size(); ++s) {
            for (std::size_t c = 0; c < kept.size(); ++c) {
                mean_lo[static_cast<int>(c)] +=
                    actuals[s].values[kept[c]] - recon[z][s].values[kept[c]];
                mean_hi[static_cast<int>(c)] +=
                    actuals[s].values[kept[c]] - recon[z + 1][s].values[kept[c]];
            }
        }
        mean_lo /= static_cast<double>(actuals.size());
        mean_hi /= static_cast<double>(actuals.size());
        for (std::size_t s = 0; s < actuals.size(); ++s) {
            double lo = 0.0, hi = 0.0;
            for (std::size_t c = 0; c < kept.size(); ++c) {
                const double e_lo = actuals[s].values[kept[c]] - recon[z][s].values[kept[c]] -
                                    mean_lo[static_cast<int>(c)];
                const double e_hi = actuals[s].values[kept[c]] -
                                    recon[z + 1][s].values[kept[c]] -
                                    mean_hi[static_cast<int>(c)];
                lo += e_lo * e_lo;
                hi += e_hi * e_hi;
            }
            diffs.push_back(lo - hi);
        }
        double mean = 0.0;
        for (double d : diffs) mean += d;
        mean /= static_cast<double>(diffs.size());
        double var = 0.0;
        for (double d : diffs) var += (d - mean) * (d - mean);
        var /= static_cast<double>(diffs.size() - 1);
        const double se = std::sqrt(var / static_cast<double>(diffs.size()));
        require(mean >= -2.0 * se, "reconciled trace increased from z=" + std::to_string(z) +
                                       " to z=" + std::to_string(z + 1));
    }
    detail = summary.str();
}

// ---------------------------------------------------------------------------
// 6. Theorem 2 closed-form oracle and Monte Carlo chain.
void criterion_theorem2(std::string& detail) {
    const double phi = 0.5;
    const int m = 4;
    const AggregationScheme scheme({4, 1});

    // Closed form is non-increasing in z.
    double prev_bottom = std::numeric_limits<double>::infinity();
    double prev_top = prev_bottom;
    for (int z = 0; z < m; ++z) {
        const auto mse = hfu::ar1_closed_form_mse(phi, 1.0, m, z);
        require(mse.bottom <= prev_bottom + 1e-12 && mse.top <= prev_top + 1e-12,
                "closed-form MSEs must be non-increasing in z");
        prev_bottom = mse.bottom;
        prev_top = mse.top;
    }

    ArmaModel bottom_model;
    bottom_model.p = 1;
    bottom_model.ar = {phi};
    bottom_model.validate();
    const ArmaModel top_model = testutil::ar1_aggregate_model(phi, 1.0, m);
    std::map<int, ArmaModel> models{{1, bottom_model}, {4, top_model}};

    const int periods = 100000;
    const int window = 60;
    auto rng = hfu::make_rng(402, 0);
    const auto data = hfu::simulate_hierarchy(bottom_model, scheme, periods + window + 1, 200,
                                              rng);

    std::vector<double> bottom_mse(m, 0.0), top_mse(m, 0.0);
    std::vector<std::vector<double>> chain_recon(m);  // per z: per-period summed sq errors
    std::vector<double> chain_base;
    for (auto& v : chain_recon) v.reserve(periods);
    chain_base.reserve(periods);

    for (int s = 0; s < periods; ++s) {
        const int i = window + 1 + s;
        std::map<int, std::vector<double>> histories;
        for (int k : scheme.levels()) {
            const auto& series = data.at(k);
            const int mk = scheme.frequency(k);
            histories[k] = std::vector<double>(series.begin() + mk * (i - 1 - window),
                                               series.begin() + mk * (i - 1));
        }
        const auto actual = hfu::stack_period(data, scheme, i);
        const auto base = hfu::update_forecasts(models, histories, scheme, window + 1, 0);
        chain_base.push_back((actual.values - base.values).squaredNorm());
        const auto& bottom = data.at(1);
        for (int z = 0; z < m; ++z) {
            const std::vector<double> obs(bottom.begin() + m * (i - 1),
                                          bottom.begin() + m * (i - 1) + z);
            const auto run = hfu::hierarchical_forecast_update(
                models, histories, obs, scheme, ReconMethod::bottom_up, std::nullopt);
            double bot = 0.0;
            for (int u = z + 1; u <= m; ++u) {
                const double e = actual.at(1, u) - run.restored.at(1, u);
                bot += e * e;
            }
            bottom_mse[static_cast<std::size_t>(z)] += bot;
            const double te = actual.at(4, 1) - run.restored.at(4, 1);
            top_mse[static_cast<std::size_t>(z)] += te * te;
            chain_recon[static_cast<std::size_t>(z)].push_back(
                (actual.values - run.restored.values).squaredNorm());
        }
    }

    std::ostringstream summary;
    for (int z = 0; z < m; ++z) {
        const auto closed = hfu::ar1_closed_form_mse(phi, 1.0, m, z);
        const double mc_bottom = bottom_mse[static_cast<std::size_t>(z)] / periods;
        const double mc_top = top_mse[static_cast<std::size_t>(z)] / periods;
        summary << "z=" << z << " bottom " << mc_bottom << "/" << closed.bottom << " top "
                << mc_top << "/" << closed.top << "; ";
        require(std::abs(mc_bottom - closed.bottom) <= 0.02 * closed.bottom,
                "bottom-level Monte Carlo MSE off the closed form by more than 2% at z=" +
                    std::to_string(z));
        require(std::abs(mc_top - closed.top) <= 0.02 * closed.top,
                "top-level Monte Carlo MSE off the closed form by more than 2% at z=" +
                    std::to_string(z));
    }

    const auto paired_ok = [&](const std::vector<double>& larger,
                               const std::vector<double>& smaller) {
        double mean = 0.0;
        for (std::size_t s = 0; s < larger.size(); ++s) mean += larger[s] - smaller[s];
        mean /= static_cast<double>(larger.size());
        double var = 0.0;
        for (std::size_t s = 0; s < larger.size(); ++s) {
            const double d = larger[s] - smaller[s] - mean;
            var += d * d;
        }
        var /= static_cast<double>(larger.size() - 1);
        return mean >= -2.0 * std::sqrt(var / static_cast<double>(larger.size()));
    };
    for (int z = 1; z < m; ++z) {
        require(paired_ok(chain_recon[0], chain_recon[static_cast<std::size_t>(z)]),
                "sum_k MSE(ytilde_z) exceeded sum_k MSE(ytilde_0) at z=" + std::to_string(z));
    }
    require(paired_ok(chain_base, chain_recon[0]),
            "sum_k MSE(ytilde_0) exceeded sum_k MSE(yhat_0)");
    detail = summary.str();
}

// ---------------------------------------------------------------------------
// 7. Simulation-study qualitative reproduction for K={4,1}.
void criterion_simulation_shapes(std::string& detail) {
    // dgp tag -> method -> z -> level -> rep -> training rRMSE. Training
    // errors pool every in-sample period, matching the summation over i in
    // the rRMSE definition.
    std::map<std::string,
             std::map<std::string, std::map<int, std::map<int, std::map<int, double>>>>>
        cells;

    const std::vector<std::pair<int, int>> dgps{{0, 0}, {1, 0}, {1, 1}};
    for (const auto& [p, q] : dgps) {
        hfu::SimConfig config;
        config.scheme_levels = {4, 1};
        config.p_bot = p;
        config.q_bot = q;
        config.reps = 50;
        config.n_top = 100;
        config.seed = 403;
        config.fit_mode = hfu::FitMode::aicc;
        config.train_eval = hfu::TrainEval::all_periods;
        config.threads = 0;
        const auto result = hfu::run_simulation(config);
        // Exactly coherent mean-only fits make W structurally singular at
        // z=0; those refusals are the documented failure mode. Anything else
        // fails the criterion.
        for (const auto& failure : result.failures) {
            require(failure.z == 0 && failure.message.find("singular") != std::string::npos,
                    "unexpected failure: " + failure.message);
        }
        const std::string tag = std::to_string(p) + std::to_string(q);
        for (const auto& row : result.rows) {
            if (std::isnan(row.train_rrmse)) continue;
            cells[tag][row.method][row.z][row.level][row.rep] = row.train_rrmse;
        }
    }

    const auto median_of = [](const std::map<int, double>& by_rep) {
        std::vector<double> values;
        values.reserve(by_rep.size());
        for (const auto& [rep, v] : by_rep) values.push_back(v);
        return median(values);
    };

    std::ostringstream summary;

    // (a) median training top-level rRMSE < 1 (z >= 1) and non-increasing.
    for (const auto& [tag, by_method] : cells) {
        for (const auto& [method, by_z] : by_method) {
            double prev = std::numeric_limits<double>::infinity();
            for (int z = 0; z < 4; ++z) {
                require(by_z.at(z).at(4).size() >= 25,
                        "dgp " + tag + " " + method + ": too few surviving reps at z=" +
                            std::to_string(z));
                const double med = median_of(by_z.at(z).at(4));
                if (z == 0) {
                    require(med <= 1.0 + 1e-9, "dgp " + tag + " " + method +
                                                   ": z=0 training top median above 1");
                } else {
                    require(med < 1.0, "dgp " + tag + " " + method + ": z=" +
                                           std::to_string(z) +
                                           " training top median not below 1");
                }
                require(med <= prev + 1e-9, "dgp " + tag + " " + method +
                                                ": training top median increased at z=" +
                                                std::to_string(z));
                prev = med;
            }
            summary << tag << "/" << method << " top medians:";
            for (int z = 0; z < 4; ++z) summary << " " << median_of(by_z.at(z).at(4));
            summary << "; ";
        }
    }

    // (b) covariance methods leave the updated base forecasts alone at the
    // bottom for p+q >= 1: bottom errors within 2% of bottom-up's (whose
    // bottom equals the updated base forecasts exactly), paired per rep.
    for (const std::string tag : {"10", "11"}) {
        for (const std::string method : {"mint_full", "mint_shrink"}) {
            for (int z = 0; z < 4; ++z) {
                std::vector<double> ratios;
                const auto& ours = cells[tag][method][z][1];
                const auto& bu = cells[tag]["bottom_up"][z][1];
                for (const auto& [rep, value] : ours) {
                    const auto it = bu.find(rep);
                    if (it != bu.end()) ratios.push_back(value / it->second);
                }
                require(ratios.size() >= 25, "too few paired reps for the bottom ratio");
                const double med = median(ratios);
                require(std::abs(med - 1.0) <= 0.02,
                        "dgp " + tag + " " + method + " z=" + std::to_string(z) +
                            ": bottom errors deviate from the updated base forecasts by " +
                            std::to_string(med - 1.0));
            }
        }
    }

    // (c) white noise: the full covariance beats shrinkage at the bottom
    // (per-rep average over the z > 0 sweep, median across reps).
    {
        std::vector<double> full_avg, shrink_avg;
        for (int rep = 0; rep < 50; ++rep) {
            double f = 0.0, s = 0.0;
            int have = 0;
            for (int z = 1; z < 4; ++z) {
                const auto& full_cell = cells["00"]["mint_full"][z][1];
                const auto& shrink_cell = cells["00"]["mint_shrink"][z][1];
                const auto fit = full_cell.find(rep);
                const auto sit = shrink_cell.find(rep);
                if (fit != full_cell.end() && sit != shrink_cell.end()) {
                    f += fit->second;
                    s += sit->second;
                    ++have;
                }
            }
            if (have == 3) {
                full_avg.push_back(f / 3.0);
                shrink_avg.push_back(s / 3.0);
            }
        }
        require(full_avg.size() >= 25, "too few paired reps for the p=q=0 comparison");
        const double med_full = median(full_avg);
        const double med_shrink = median(shrink_avg);
        summary << "p=q=0 bottom medians: full=" << med_full << " shrink=" << med_shrink;
        require(med_full < med_shrink,
                "full-covariance bottom median (" + std::to_string(med_full) +
                    ") is not below shrinkage's (" + std::to_string(med_shrink) + ")");
    }
    detail = summary.str();
}

// ---------------------------------------------------------------------------
// 8. Singularity behavior on K={360,12,1} (gated large run).
void criterion_singularity_large(std::string& detail) {
    hfu::SimConfig config;
    config.scheme_levels = {360, 12, 1};
    config.p_bot = 1;
    config.q_bot = 0;
    config.reps = 3;
    config.n_top = 100;
    config.seed = 404;
    config.fit_mode = hfu::FitMode::correct_orders;
    config.methods = {ReconMethod::mint_full};
    config.allow_large = true;
    config.threads = 0;
    // 46 error rows put the sample-rank boundary exactly at the reported
    // z=320 pattern: m_z <= 45 first holds at z=320.
    config.cov_window = 46;

    const auto result = hfu::run_simulation(config);

    std::map<int, std::set<int>> failed_z;  // rep -> z values that raised
    for (const auto& failure : result.failures) {
        require(failure.z >= 0, "whole repetition failed: " + failure.message);
        require(failure.message.find("singular") != std::string::npos,
                "non-singularity failure: " + failure.message);
        failed_z[failure.rep].insert(failure.z);
    }
    std::map<int, std::set<int>> succeeded_z;
    for (const auto& row : result.rows) {
        if (row.level == 0 && !std::isnan(row.train_rrmse)) {
            succeeded_z[row.rep].insert(row.z);
        }
    }
    int checked = 0;
    for (int rep = 0; rep < config.reps; ++rep) {
        for (int z = 0; z < 360; ++z) {
            const bool failed = failed_z[rep].count(z) > 0;
            const bool succeeded = succeeded_z[rep].count(z) > 0;
            require(failed != succeeded, "z=" + std::to_string(z) +
                                             " neither failed nor succeeded cleanly");
            if (z < 320) {
                require(failed, "mint_full did not raise a singular-covariance error at z=" +
                                    std::to_string(z));
            }
            if (z > 320) {
                require(succeeded, "mint_full failed past the rank boundary at z=" +
                                       std::to_string(z));
            }
            ++checked;
        }
    }
    std::ostringstream summary;
    summary << checked << " (rep,z) cells checked; failures below z=320, successes above";
    detail = summary.str();
}

// ---------------------------------------------------------------------------
// 9. set_negative_to_zero contract.
void criterion_nonneg(std::string&) {
    const AggregationScheme small({2, 1});
    Eigen::VectorXd values(3);
    values << 1, -1, 2;
    const auto clipped = hfu::set_negative_to_zero(hfu::HierarchyVector(small, values));
    require(clipped.values[0] == 2.0 && clipped.values[1] == 0.0 && clipped.values[2] == 2.0,
            "hand case (1,-1,2) -> (2,0,2) failed");

    const AggregationScheme scheme({4, 2, 1});
    const Eigen::MatrixXd s = hfu::build_summing_matrix(scheme).entries;
    auto rng = hfu::make_rng(405, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto hv = testutil::random_coherent(scheme, rng, 2.0);
        const auto out = hfu::set_negative_to_zero(hv);
        require(out.bottom().minCoeff() >= 0.0, "bottom level went negative");
        const Eigen::VectorXd direct = s * out.bottom();
        const double scale = std::max(1.0, direct.cwiseAbs().maxCoeff());
        require((out.values - direct).cwiseAbs().maxCoeff() < 1e-10 * scale,
                "output lost coherence");
    }
}

// ---------------------------------------------------------------------------
// 10. Determinism of cmd_simulate across runs and thread counts.
void criterion_determinism(std::string&) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hfu_acceptance_determinism";
    fs::remove_all(dir);

    const auto read_bytes = [](const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };

    hfu::SimulateCommand command;
    command.sim.scheme_levels = {4, 1};
    command.sim.p_bot = 1;
    command.sim.q_bot = 0;
    command.sim.reps = 5;
    command.sim.n_top = 100;
    command.sim.seed = 7;
    command.sim.fit_mode = hfu::FitMode::aicc;
    command.sim.threads = 1;

    command.out_dir = dir / "a";
    hfu::cmd_simulate(command);
    command.out_dir = dir / "b";
    hfu::cmd_simulate(command);
    command.sim.threads = 4;
    command.out_dir = dir / "c";
    hfu::cmd_simulate(command);

    const std::string a = read_bytes(dir / "a/results.csv");
    require(!a.empty(), "results.csv is empty");
    require(a == read_bytes(dir / "b/results.csv"), "two identical runs differ");
    require(a == read_bytes(dir / "c/results.csv"), "thread count changed the output");
}

}  // namespace

int main(int argc, char** argv) {
    bool large_only = false;
    bool include_large = false;
    for (int a = 1; a < argc; ++a) {
        const std::string arg = argv[a];
        if (arg == "--large-only") {
            large_only = true;
        } else if (arg == "--all") {
            include_large = true;
        } else {
            std::fprintf(stderr, "unknown argument %s\n", arg.c_str());
            return 64;
        }
    }

    std::vector<Criterion> criteria{
        {1, "summing-matrix golden test K={12,3,1}", criterion_summing_golden},
        {2, "reduction golden test K={12,3,1}, z=7", criterion_appendix_reduction},
        {3, "S_z identity across schemes and z", criterion_sz_identity},
        {4, "minT contract suite", criterion_mint_contract},
        {5, "trace improvement, true-W minT, 5000 periods", criterion_theorem1},
        {6, "closed-form AR(1) oracle and MSE chain, 1e5 periods", criterion_theorem2},
        {7, "simulation-study shapes K={4,1}, 50 reps", criterion_simulation_shapes},
        {8, "singular-covariance boundary K={360,12,1}", criterion_singularity_large},
        {9, "set-negative-to-zero contract", criterion_nonneg},
        {10, "cmd_simulate determinism", criterion_determinism},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const bool is_large = criterion.id == 8;
        if (large_only && !is_large) continue;
        if (!large_only && is_large && !include_large) {
            std::printf("[SKIP] criterion %2d: %s (gated; run with --large-only)\n",
                        criterion.id, criterion.name.c_str());
            continue;
        }
        const auto started = std::chrono::steady_clock::now();
        std::string det;
        try {
            criterion.run(det);
            const double sec = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - started)
                                   .count();
            std::printf("[PASS] criterion %2d: %s (%.1fs)\n", criterion.id,
                        criterion.name.c_str(), sec);
            if (!det.empty()) std::printf("       %s\n", det.c_str());
        } catch (const std::exception& err) {
            const double sec = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - started)
                                   .count();
            std::printf("[FAIL] criterion %2d: %s (%.1fs)\n       %s\n", criterion.id,
                        criterion.name.c_str(), sec, err.what());
            ++failures;
        }
        std::fflush(stdout);
    }
    return failures;
}
