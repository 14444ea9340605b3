#include "hfu/arma.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

namespace hfu {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_mean(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

std::vector<double> centered(const std::vector<double>& x, double mean) {
    std::vector<double> out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) out[t] = x[t] - mean;
    return out;
}

void check_finite(const std::vector<double>& series) {
    for (double v : series) {
        if (!std::isfinite(v)) throw FitFailureError("series contains non-finite values");
    }
}

// Inverse roots as complex values (eigenvalues of the companion matrix of
// u^n - a_1 u^{n-1} - ... - a_n).
std::vector<std::complex<double>> inverse_roots(const std::vector<double>& coeffs) {
    const auto n = static_cast<int>(coeffs.size());
    if (n == 0) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) companion(0, j) = coeffs[static_cast<std::size_t>(j)];
    for (int j = 1; j < n; ++j) companion(j, j - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
    std::vector<std::complex<double>> roots(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) roots[static_cast<std::size_t>(j)] = solver.eigenvalues()[j];
    return roots;
}

double max_inverse_root(const std::vector<double>& coeffs) {
    double worst = 0.0;
    for (const auto& r : inverse_roots(coeffs)) worst = std::max(worst, std::abs(r));
    return worst;
}

// Expands prod_j (1 - u_j B) and returns the lag coefficients a with
// 1 - a_1 B - ... - a_n B^n.
std::vector<double> coeffs_from_inverse_roots(const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> poly{1.0};
    for (const auto& u : roots) {
        std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
        for (std::size_t j = 0; j < poly.size(); ++j) {
            next[j] += poly[j];
            next[j + 1] -= u * poly[j];
        }
        poly = std::move(next);
    }
    std::vector<double> out(poly.size() - 1);
    for (std::size_t j = 1; j < poly.size(); ++j) out[j - 1] = -poly[j].real();
    return out;
}

struct NelderMeadResult {
    std::vector<double> x;
    double f = kInf;
    bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                             std::vector<double> x0, int max_iter) {
    const auto dim = static_cast<int>(x0.size());
    std::vector<std::vector<double>> simplex;
    simplex.push_back(x0);
    for (int j = 0; j < dim; ++j) {
        auto v = x0;
        v[static_cast<std::size_t>(j)] += (v[static_cast<std::size_t>(j)] != 0.0)
                                              ? 0.1 * std::abs(v[static_cast<std::size_t>(j)])
                                              : 0.1;
        simplex.push_back(std::move(v));
    }
    std::vector<double> fvals(simplex.size());
    for (std::size_t j = 0; j < simplex.size(); ++j) fvals[j] = fn(simplex[j]);

    NelderMeadResult result;
    for (int it = 0; it < max_iter; ++it) {
        std::vector<std::size_t> order(simplex.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fvals[a] < fvals[b]; });
        const std::size_t best = order.front(), worst = order.back(),
                          second = order[order.size() - 2];
        if (std::isfinite(fvals[best]) &&
            (fvals[worst] - fvals[best]) <= 1e-12 * (std::abs(fvals[best]) + 1e-12)) {
            result.x = simplex[best];
            result.f = fvals[best];
            result.converged = true;
            return result;
        }
        std::vector<double> centroid(static_cast<std::size_t>(dim), 0.0);
        for (std::size_t j : order) {
            if (j == worst) continue;
            for (int d = 0; d < dim; ++d)
                centroid[static_cast<std::size_t>(d)] +=
                    simplex[j][static_cast<std::size_t>(d)] / static_cast<double>(dim);
        }
        auto blend = [&](double alpha) {
            std::vector<double> v(static_cast<std::size_t>(dim));
            for (int d = 0; d < dim; ++d) {
                const auto dd = static_cast<std::size_t>(d);
                v[dd] = centroid[dd] + alpha * (centroid[dd] - simplex[worst][dd]);
            }
            return v;
        };
        auto reflected = blend(1.0);
        const double f_r = fn(reflected);
        if (f_r < fvals[best]) {
            auto expanded = blend(2.0);
            const double f_e = fn(expanded);
            if (f_e < f_r) {
                simplex[worst] = std::move(expanded);
                fvals[worst] = f_e;
            } else {
                simplex[worst] = std::move(reflected);
                fvals[worst] = f_r;
            }
        } else if (f_r < fvals[second]) {
            simplex[worst] = std::move(reflected);
            fvals[worst] = f_r;
        } else {
            auto contracted = blend(f_r < fvals[worst] ? 0.5 : -0.5);
            const double f_c = fn(contracted);
            if (f_c < std::min(f_r, fvals[worst])) {
                simplex[worst] = std::move(contracted);
                fvals[worst] = f_c;
            } else {
                for (std::size_t j : order) {
                    if (j == best) continue;
                    for (int d = 0; d < dim; ++d) {
                        const auto dd = static_cast<std::size_t>(d);
                        simplex[j][dd] = 0.5 * (simplex[j][dd] + simplex[best][dd]);
                    }
                    fvals[j] = fn(simplex[j]);
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(
        std::min_element(fvals.begin(), fvals.end()) - fvals.begin());
    result.x = simplex[best];
    result.f = fvals[best];
    result.converged = false;
    return result;
}

std::vector<double> fit_ar_least_squares(const std::vector<double>& x, int p) {
    const auto n = static_cast<int>(x.size());
    const int rows = n - p;
    Eigen::MatrixXd design(rows, p);
    Eigen::VectorXd target(rows);
    for (int t = p; t < n; ++t) {
        target[t - p] = x[static_cast<std::size_t>(t)];
        for (int j = 1; j <= p; ++j) design(t - p, j - 1) = x[static_cast<std::size_t>(t - j)];
    }
    Eigen::VectorXd phi = (design.transpose() * design)
                              .ldlt()
                              .solve(design.transpose() * target);
    return {phi.data(), phi.data() + p};
}

double css_value(const std::vector<double>& x, const std::vector<double>& ar,
                 const std::vector<double>& ma) {
    const auto n = static_cast<int>(x.size());
    const auto p = static_cast<int>(ar.size());
    const auto q = static_cast<int>(ma.size());
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    double css = 0.0;
    for (int t = p; t < n; ++t) {
        double pred = 0.0;
        for (int j = 1; j <= p; ++j) pred += ar[static_cast<std::size_t>(j - 1)] * x[static_cast<std::size_t>(t - j)];
        for (int i = 1; i <= q && t - i >= 0; ++i)
            pred += ma[static_cast<std::size_t>(i - 1)] * e[static_cast<std::size_t>(t - i)];
        const double resid = x[static_cast<std::size_t>(t)] - pred;
        e[static_cast<std::size_t>(t)] = resid;
        css += resid * resid;
    }
    return css;
}

// Shared forecast recursion given the centered prefix and its residuals.
std::vector<double> multi_step(const ArmaModel& model, const std::vector<double>& x, int prefix,
                               const std::vector<double>& e, int h) {
    std::vector<double> lags(static_cast<std::size_t>(model.p));
    for (int j = 1; j <= model.p; ++j)
        lags[static_cast<std::size_t>(j - 1)] = x[static_cast<std::size_t>(prefix - j)];
    std::vector<double> elags(static_cast<std::size_t>(model.q), 0.0);
    for (int i = 1; i <= model.q && prefix - i >= 0; ++i)
        elags[static_cast<std::size_t>(i - 1)] = e[static_cast<std::size_t>(prefix - i)];

    std::vector<double> out(static_cast<std::size_t>(h));
    for (int step = 0; step < h; ++step) {
        double pred = 0.0;
        for (int j = 0; j < model.p; ++j)
            pred += model.ar[static_cast<std::size_t>(j)] * lags[static_cast<std::size_t>(j)];
        for (int i = 0; i < model.q; ++i)
            pred += model.ma[static_cast<std::size_t>(i)] * elags[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(step)] = pred + model.mean;
        if (model.p > 0) {
            for (int j = model.p - 1; j > 0; --j)
                lags[static_cast<std::size_t>(j)] = lags[static_cast<std::size_t>(j - 1)];
            lags[0] = pred;
        }
        if (model.q > 0) {
            for (int i = model.q - 1; i > 0; --i)
                elags[static_cast<std::size_t>(i)] = elags[static_cast<std::size_t>(i - 1)];
            elags[0] = 0.0;  // future innovations
        }
    }
    return out;
}

}  // namespace

void ArmaModel::validate() const {
    if (static_cast<int>(ar.size()) != p || static_cast<int>(ma.size()) != q) {
        throw FitFailureError("coefficient counts disagree with declared orders");
    }
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw FitFailureError("innovation variance must be positive and finite");
    }
    if (!is_stationary(ar)) throw FitFailureError("AR polynomial is not stationary");
    if (!is_invertible(ma)) throw FitFailureError("MA polynomial is not invertible");
}

std::vector<double> inverse_root_moduli(const std::vector<double>& coeffs) {
    std::vector<double> out;
    for (const auto& r : inverse_roots(coeffs)) out.push_back(std::abs(r));
    return out;
}

bool is_stationary(const std::vector<double>& ar) { return max_inverse_root(ar) < 1.0; }

bool is_invertible(const std::vector<double>& ma) {
    std::vector<double> neg(ma.size());
    for (std::size_t i = 0; i < ma.size(); ++i) neg[i] = -ma[i];
    return max_inverse_root(neg) < 1.0;
}

std::vector<double> project_to_stationary(const std::vector<double>& ar) {
    if (ar.empty() || is_stationary(ar)) return ar;
    auto roots = inverse_roots(ar);
    for (auto& u : roots) {
        const double mod = std::abs(u);
        if (mod >= 1.0) u *= (1.0 / 1.01) / mod;
    }
    return coeffs_from_inverse_roots(roots);
}

std::vector<double> css_residuals(const ArmaModel& model, const std::vector<double>& x) {
    const auto n = static_cast<int>(x.size());
    std::vector<double> e(static_cast<std::size_t>(n), 0.0);
    for (int t = model.p; t < n; ++t) {
        double pred = 0.0;
        for (int j = 1; j <= model.p; ++j)
            pred += model.ar[static_cast<std::size_t>(j - 1)] * x[static_cast<std::size_t>(t - j)];
        for (int i = 1; i <= model.q && t - i >= 0; ++i)
            pred += model.ma[static_cast<std::size_t>(i - 1)] * e[static_cast<std::size_t>(t - i)];
        e[static_cast<std::size_t>(t)] = x[static_cast<std::size_t>(t)] - pred;
    }
    return e;
}

ArmaModel fit_arma(const std::vector<double>& series, int p, int q) {
    if (p < 0 || q < 0) throw FitFailureError("orders must be non-negative");
    check_finite(series);
    const auto n = static_cast<int>(series.size());
    if (n < 10 * (p + q + 1)) {
        throw InsufficientDataError("need at least " + std::to_string(10 * (p + q + 1)) +
                                    " observations to fit ARMA(" + std::to_string(p) + "," +
                                    std::to_string(q) + "), got " + std::to_string(n));
    }

    ArmaModel model;
    model.p = p;
    model.q = q;
    model.mean = sample_mean(series);
    model.train_length = n;
    const std::vector<double> x = centered(series, model.mean);

    double scatter = 0.0;
    for (double v : x) scatter += v * v;
    if (scatter / n < 1e-12 * std::max(1.0, model.mean * model.mean)) {
        throw FitFailureError("degenerate input: series variance is numerically zero");
    }

    if (p == 0 && q == 0) {
        model.sigma2 = scatter / std::max(1, n - 1);
        return model;
    }

    if (q == 0) {
        model.ar = project_to_stationary(fit_ar_least_squares(x, p));
        const double css = css_value(x, model.ar, {});
        model.sigma2 = css / std::max(1, n - 2 * p - 1);
        model.validate();
        return model;
    }

    // Hannan-Rissanen start: residuals from a long AR, then LS on lagged
    // values and lagged residuals.
    const int long_p = std::min(std::max(2 * (p + q) + 8, 10), n / 4);
    ArmaModel long_ar;
    long_ar.p = long_p;
    long_ar.ar = project_to_stationary(fit_ar_least_squares(x, long_p));
    const std::vector<double> e0 = css_residuals(long_ar, x);

    std::vector<double> init(static_cast<std::size_t>(p + q), 0.0);
    {
        const int t0 = std::max(long_p, std::max(p, q));
        const int rows = n - t0;
        if (rows > p + q + 2) {
            Eigen::MatrixXd design(rows, p + q);
            Eigen::VectorXd target(rows);
            for (int t = t0; t < n; ++t) {
                target[t - t0] = x[static_cast<std::size_t>(t)];
                for (int j = 1; j <= p; ++j)
                    design(t - t0, j - 1) = x[static_cast<std::size_t>(t - j)];
                for (int i = 1; i <= q; ++i)
                    design(t - t0, p + i - 1) = e0[static_cast<std::size_t>(t - i)];
            }
            Eigen::VectorXd beta = (design.transpose() * design)
                                       .ldlt()
                                       .solve(design.transpose() * target);
            for (int j = 0; j < p + q; ++j) init[static_cast<std::size_t>(j)] = beta[j];
        }
    }
    auto sanitize = [&](std::vector<double> params) {
        std::vector<double> ar(params.begin(), params.begin() + p);
        std::vector<double> ma(params.begin() + p, params.end());
        ar = project_to_stationary(ar);
        std::vector<double> neg(ma.size());
        for (std::size_t i = 0; i < ma.size(); ++i) neg[i] = -ma[i];
        neg = project_to_stationary(neg);
        for (std::size_t i = 0; i < ma.size(); ++i) ma[i] = -neg[i];
        std::vector<double> out = ar;
        out.insert(out.end(), ma.begin(), ma.end());
        return out;
    };

    auto objective = [&](const std::vector<double>& params) {
        std::vector<double> ar(params.begin(), params.begin() + p);
        std::vector<double> ma(params.begin() + p, params.end());
        if (!is_stationary(ar) || !is_invertible(ma)) return kInf;
        const double css = css_value(x, ar, ma);
        return std::isfinite(css) ? css : kInf;
    };

    const int max_iter = 300 * (p + q) + 300;
    std::vector<std::vector<double>> starts;
    starts.push_back(sanitize(init));
    {
        auto half = init;
        for (double& v : half) v *= 0.5;
        starts.push_back(sanitize(half));
    }
    starts.emplace_back(static_cast<std::size_t>(p + q), 0.0);

    NelderMeadResult best;
    std::ostringstream diag;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        NelderMeadResult run = nelder_mead(objective, starts[s], max_iter);
        diag << "start " << s << ": css=" << run.f << (run.converged ? "" : " (not converged)")
             << "; ";
        if (run.converged && run.f < best.f) best = run;
    }
    if (!best.converged || !std::isfinite(best.f)) {
        throw FitFailureError("CSS optimization did not converge for ARMA(" + std::to_string(p) +
                              "," + std::to_string(q) + "): " + diag.str());
    }

    const auto params = sanitize(best.x);
    model.ar.assign(params.begin(), params.begin() + p);
    model.ma.assign(params.begin() + p, params.end());
    model.sigma2 = css_value(x, model.ar, model.ma) / std::max(1, n - p - (p + q) - 1);
    model.validate();
    return model;
}

ArmaModel select_order_aicc(const std::vector<double>& series, int max_p, int max_q) {
    const auto n = static_cast<double>(series.size());
    bool have_best = false;
    ArmaModel best;
    double best_aicc = kInf;
    std::ostringstream failures;
    for (int p = 0; p <= max_p; ++p) {
        for (int q = 0; q <= max_q; ++q) {
            ArmaModel candidate;
            try {
                candidate = fit_arma(series, p, q);
            } catch (const Error& err) {
                failures << "(" << p << "," << q << "): " << err.what() << "; ";
                continue;
            }
            const double k = p + q + 2;
            if (n - k - 1 <= 0) continue;
            const double aicc = n * std::log(candidate.sigma2) + 2.0 * k * n / (n - k - 1.0);
            const bool tie = std::abs(aicc - best_aicc) <= 1e-9;
            const bool better =
                !have_best || (!tie && aicc < best_aicc) ||
                (tie && (p + q < best.p + best.q || (p + q == best.p + best.q && p < best.p)));
            if (better) {
                best = candidate;
                best_aicc = aicc;
                have_best = true;
            }
        }
    }
    if (!have_best) {
        throw FitFailureError("order selection failed, no candidate could be fitted: " +
                              failures.str());
    }
    return best;
}

std::vector<double> forecast(const ArmaModel& model, const std::vector<double>& history, int h) {
    if (h < 1) throw DimensionError("forecast horizon must be >= 1");
    const int need = std::max(model.p, model.q);
    if (static_cast<int>(history.size()) < need) {
        throw InsufficientDataError("history of length " + std::to_string(history.size()) +
                                    " is too short for ARMA(" + std::to_string(model.p) + "," +
                                    std::to_string(model.q) + ")");
    }
    const std::vector<double> x = centered(history, model.mean);
    const std::vector<double> e = css_residuals(model, x);
    return multi_step(model, x, static_cast<int>(x.size()), e, h);
}

std::vector<std::vector<double>> rolling_period_forecasts(const ArmaModel& model,
                                                          const std::vector<double>& series,
                                                          int period_len, int i_begin,
                                                          int i_end) {
    if (i_begin < 1 || i_end < i_begin) throw DimensionError("invalid period range");
    if (static_cast<int>(series.size()) < period_len * (i_end - 1)) {
        throw InsufficientDataError("series too short for the requested period range");
    }
    if (period_len * (i_begin - 1) < std::max(model.p, model.q)) {
        throw InsufficientDataError("first period leaves too little history for the model");
    }
    const std::vector<double> x = centered(series, model.mean);
    const std::vector<double> e = css_residuals(model, x);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(i_end - i_begin + 1));
    for (int i = i_begin; i <= i_end; ++i) {
        out.push_back(multi_step(model, x, period_len * (i - 1), e, period_len));
    }
    return out;
}

HierarchyVector update_forecasts(const std::map<int, ArmaModel>& models,
                                 const std::map<int, std::vector<double>>& histories,
                                 const AggregationScheme& scheme, int i, int z, bool refit) {
    if (z < 0 || z >= scheme.m()) {
        throw DimensionError("z=" + std::to_string(z) + " out of range [0, m)");
    }
    Eigen::VectorXd values(scheme.node_count());
    int pos = 0;
    for (int k : scheme.levels()) {
        const int mk = scheme.frequency(k);
        const int n_new = z / k;
        const auto hist_it = histories.find(k);
        const auto model_it = models.find(k);
        if (hist_it == histories.end() || model_it == models.end()) {
            throw ConsistencyError("missing history or model for level " + std::to_string(k));
        }
        const auto& history = hist_it->second;
        const auto expected = static_cast<std::size_t>(mk) * (i - 1) + static_cast<std::size_t>(n_new);
        if (history.size() != expected) {
            throw ConsistencyError("level " + std::to_string(k) + " history has " +
                                   std::to_string(history.size()) + " values, expected " +
                                   std::to_string(expected) + " for z=" + std::to_string(z));
        }
        ArmaModel model = model_it->second;
        if (refit) {
            model = fit_arma(history, model.p, model.q);
        }
        for (int u = 0; u < n_new; ++u) {
            values[pos + u] = history[expected - static_cast<std::size_t>(n_new) +
                                      static_cast<std::size_t>(u)];
        }
        if (n_new < mk) {
            const std::vector<double> fc = forecast(model, history, mk - n_new);
            for (int u = n_new; u < mk; ++u) values[pos + u] = fc[static_cast<std::size_t>(u - n_new)];
        }
        pos += mk;
    }
    return HierarchyVector(scheme, std::move(values), i);
}

}  // namespace hfu
