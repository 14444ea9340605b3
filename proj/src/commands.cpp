#include "hfu/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "hfu/evaluation.hpp"
#include "hfu/updating.hpp"

namespace hfu {

namespace {

using nlohmann::json;

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IngestionError("could not create output directory " + dir.string());
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("could not open " + path.string() + " for writing");
    return out;
}

std::string level_label(int level) { return level == 0 ? "overall" : std::to_string(level); }

std::string value_text(double v) { return std::isnan(v) ? "nan" : format_double(v); }

json methods_json(const std::vector<ReconMethod>& methods) {
    json arr = json::array();
    for (ReconMethod m : methods) arr.push_back(to_string(m));
    return arr;
}

json failures_json(const std::vector<SimFailure>& failures) {
    json arr = json::array();
    for (const auto& f : failures) {
        arr.push_back({{"rep", f.rep},
                       {"method", f.method},
                       {"z", f.z},
                       {"stage", f.stage},
                       {"message", f.message}});
    }
    return arr;
}

void write_meta(const std::filesystem::path& path, json meta) {
    std::ofstream out = open_output(path);
    out << meta.dump(2) << '\n';
}

AggregationScheme scheme_from_cli(const std::vector<int>& levels) {
    try {
        return AggregationScheme(levels);
    } catch (const InvalidSchemeError& err) {
        throw UsageError(std::string("invalid --scheme: ") + err.what());
    }
}

double wall_ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

}  // namespace

int exit_code_for(const std::exception& err) {
    if (dynamic_cast<const UsageError*>(&err) != nullptr) return 1;
    if (dynamic_cast<const SingularCovarianceError*>(&err) != nullptr) return 3;
    if (dynamic_cast<const FitFailureError*>(&err) != nullptr) return 3;
    if (dynamic_cast<const Error*>(&err) != nullptr) return 2;
    return 3;
}

void cmd_simulate(const SimulateCommand& command) {
    const auto t0 = std::chrono::steady_clock::now();
    command.sim.validate();
    ensure_dir(command.out_dir);

    const SimResult result = run_simulation(command.sim);

    {
        std::ofstream out = open_output(command.out_dir / "results.csv");
        out << "rep,method,z,level,train_rrmse,train_flag,test_rrmse,test_flag\n";
        for (const SimRow& row : result.rows) {
            out << row.rep << ',' << row.method << ',' << row.z << ',' << level_label(row.level)
                << ',' << value_text(row.train_rrmse) << ',' << (row.train_flag ? 1 : 0) << ','
                << value_text(row.test_rrmse) << ',' << (row.test_flag ? 1 : 0) << '\n';
        }
    }

    json meta;
    meta["command"] = "simulate";
    meta["version"] = kVersion;
    meta["seed"] = command.sim.seed;
    meta["config"] = {{"p", command.sim.p_bot},
                      {"q", command.sim.q_bot},
                      {"scheme", command.sim.scheme_levels},
                      {"n_top", command.sim.n_top},
                      {"sigma2", command.sim.sigma2},
                      {"reps", command.sim.reps},
                      {"fit_mode", to_string(command.sim.fit_mode)},
                      {"methods", methods_json(command.sim.methods)},
                      {"burn_in", command.sim.burn_in},
                      {"threads", command.sim.threads},
                      {"train_eval", command.sim.train_eval == TrainEval::last_period
                                         ? "last_period"
                                         : "all_periods"},
                      {"cov_window", command.sim.cov_window},
                      {"allow_large", command.sim.allow_large},
                      {"allow_pseudo_inverse", command.sim.allow_pseudo_inverse},
                      {"z_list", command.sim.z_list}};
    meta["failure_count"] = result.failures.size();
    meta["failures"] = failures_json(result.failures);
    json reps = json::array();
    for (const RepMeta& rm : result.rep_meta) {
        json orders = json::object();
        for (const auto& [k, pq] : rm.fitted_orders) {
            orders[std::to_string(k)] = {pq.first, pq.second};
        }
        reps.push_back({{"rep", rm.rep},
                        {"seed", rm.seed},
                        {"dgp", rm.dgp},
                        {"fitted_orders", orders},
                        {"shrink_lambda", rm.shrink_lambda},
                        {"fair_ref_base", rm.fair_ref_base}});
    }
    meta["repetitions"] = reps;
    meta["wall_time_ms"] = wall_ms_since(t0);
    write_meta(command.out_dir / "meta.json", std::move(meta));
}

namespace {

struct UpdateOutputRow {
    std::string series;
    int level = 1;
    int slot = 1;
    std::string kind;
    double value = 0.0;
    std::string method;
    int z = 0;
};

void emit_vector(std::vector<UpdateOutputRow>& rows, const std::string& series,
                 const HierarchyVector& hv, const std::string& method, int z) {
    const AggregationScheme& scheme = hv.scheme;
    for (int k : scheme.levels()) {
        const int mk = scheme.frequency(k);
        const int observed = z / k;
        for (int u = 1; u <= mk; ++u) {
            rows.push_back(UpdateOutputRow{series, k, u, u <= observed ? "observed" : "forecast",
                                           hv.at(k, u), method, z});
        }
    }
}

}  // namespace

void cmd_update(const UpdateCommand& command) {
    const auto t0 = std::chrono::steady_clock::now();
    const AggregationScheme scheme = scheme_from_cli(command.scheme_levels);
    const int m = scheme.m();

    std::vector<int> z_list = command.z_list;
    if (z_list.empty()) {
        for (int z = 0; z < m; ++z) z_list.push_back(z);
    }
    std::sort(z_list.begin(), z_list.end());
    z_list.erase(std::unique(z_list.begin(), z_list.end()), z_list.end());
    for (int z : z_list) {
        if (z < 0 || z >= m) throw UsageError("z=" + std::to_string(z) + " outside [0, m)");
    }
    const int max_z = z_list.back();

    std::vector<ReconMethod> methods;
    for (ReconMethod method : command.methods) {
        if (std::find(methods.begin(), methods.end(), method) == methods.end()) {
            methods.push_back(method);
        }
    }
    if (methods.empty()) throw UsageError("at least one method is required");
    const bool need_shrink =
        std::find(methods.begin(), methods.end(), ReconMethod::mint_shrink) != methods.end();

    const SeriesTable table = read_series_csv(command.data_path);
    if (table.series.empty()) throw IngestionError("no series found in " +
                                                   command.data_path.string());
    std::map<std::string, std::vector<double>> new_obs;
    if (!command.new_obs_path.empty()) {
        new_obs = read_new_obs_csv(command.new_obs_path);
    } else if (max_z > 0) {
        throw UsageError("--new-obs is required when any requested z > 0");
    }

    ensure_dir(command.out_dir);
    std::vector<UpdateOutputRow> rows;
    std::vector<SimFailure> failures;
    json series_meta = json::array();
    std::exception_ptr first_failure;

    int series_counter = 0;
    for (const auto& [series_id, provided_levels] : table.series) {
        const int series_index = series_counter++;
        try {
            const auto bottom_it = provided_levels.find(1);
            if (bottom_it == provided_levels.end()) {
                throw IngestionError("series " + series_id + " has no bottom-level (level 1) data");
            }
            std::vector<double> bottom = bottom_it->second;
            const bool has_uppers = provided_levels.size() > 1;
            const auto total = static_cast<int>(bottom.size());
            int trimmed = 0;
            if (total % m != 0) {
                if (has_uppers) {
                    throw IngestionError("series " + series_id + " bottom length " +
                                         std::to_string(total) +
                                         " is not a multiple of m while upper levels are "
                                         "supplied; trim the head or drop the upper levels");
                }
                trimmed = total % m;
                bottom.erase(bottom.begin(), bottom.begin() + trimmed);
            }
            if (bottom.empty()) {
                throw IngestionError("series " + series_id + " holds no complete period");
            }

            std::map<int, std::vector<double>> levels;
            levels[1] = bottom;
            for (int k : scheme.levels()) {
                if (k == 1) continue;
                const std::vector<double> derived = aggregate_series(bottom, scheme, k);
                const auto it = provided_levels.find(k);
                if (it == provided_levels.end()) {
                    levels[k] = derived;
                    continue;
                }
                const auto& given = it->second;
                if (given.size() != derived.size()) {
                    throw IngestionError("series " + series_id + " level " + std::to_string(k) +
                                         " has " + std::to_string(given.size()) +
                                         " values, expected " + std::to_string(derived.size()));
                }
                for (std::size_t j = 0; j < given.size(); ++j) {
                    const double scale = std::max(1.0, std::abs(derived[j]));
                    if (std::abs(given[j] - derived[j]) > 1e-8 * scale) {
                        throw IngestionError(
                            "incoherent upper level: series " + series_id + ", level " +
                            std::to_string(k) + ", index " + std::to_string(j + 1) +
                            " (provided " + format_double(given[j]) + ", aggregated " +
                            format_double(derived[j]) + ")");
                    }
                }
                levels[k] = given;
            }
            for (const auto& [k, _] : provided_levels) {
                if (!scheme.contains(k)) {
                    throw IngestionError("series " + series_id + " supplies level " +
                                         std::to_string(k) + " not present in the scheme");
                }
            }

            std::vector<double> obs;
            if (max_z > 0) {
                const auto obs_it = new_obs.find(series_id);
                const int have =
                    obs_it == new_obs.end() ? 0 : static_cast<int>(obs_it->second.size());
                if (have < max_z) {
                    throw MissingDataError("series " + series_id + " supplies " +
                                           std::to_string(have) +
                                           " new observations but z=" + std::to_string(max_z) +
                                           " was requested");
                }
                obs = obs_it->second;
            }

            const FittedHierarchy fh =
                fit_hierarchy(levels, scheme, std::nullopt, command.cov_window, command.max_p,
                              command.max_q, need_shrink, command.transform);
            const int i_next = fh.n_periods + 1;
            emit_vector(rows, series_id, fh.base_forecast(i_next), "base", 0);

            const UpdateOptions options{command.refit, command.allow_pseudo_inverse,
                                        command.transform};
            for (ReconMethod method : methods) {
                for (int z : z_list) {
                    try {
                        const std::vector<double> head(obs.begin(), obs.begin() + z);
                        UpdateRun run = hierarchical_forecast_update(
                            fh.models, levels, head, scheme, method,
                            fh.covariances.resolve(method), options);
                        const HierarchyVector output =
                            command.nonneg ? set_negative_to_zero(run.restored) : run.restored;
                        emit_vector(rows, series_id, output, to_string(method), z);
                    } catch (const Error& err) {
                        failures.push_back(SimFailure{series_index, to_string(method), z,
                                                      "series " + series_id, err.what()});
                        if (!first_failure) first_failure = std::current_exception();
                    }
                }
            }

            json orders = json::object();
            for (const auto& [k, model] : fh.models) {
                orders[std::to_string(k)] = {model.p, model.q};
            }
            series_meta.push_back({{"series_id", series_id},
                                   {"periods", fh.n_periods},
                                   {"trimmed_head", trimmed},
                                   {"fitted_orders", orders},
                                   {"shrink_lambda", fh.shrink_lambda},
                                   {"shrink_degenerate", fh.shrink_degenerate}});
        } catch (const Error& err) {
            failures.push_back(
                SimFailure{series_index, "", -1, "series " + series_id, err.what()});
            if (!first_failure) first_failure = std::current_exception();
        }
    }

    if (rows.empty() && first_failure) {
        std::rethrow_exception(first_failure);
    }

    {
        std::ofstream out = open_output(command.out_dir / "updates.csv");
        out << "series_id,level,slot,kind,value,method,z\n";
        for (const auto& row : rows) {
            out << row.series << ',' << row.level << ',' << row.slot << ',' << row.kind << ','
                << format_double(row.value) << ',' << row.method << ',' << row.z << '\n';
        }
    }

    json meta;
    meta["command"] = "update";
    meta["version"] = kVersion;
    meta["seed"] = command.seed;
    meta["config"] = {{"scheme", command.scheme_levels},
                      {"data", command.data_path.string()},
                      {"new_obs", command.new_obs_path.string()},
                      {"methods", methods_json(methods)},
                      {"z_list", z_list},
                      {"transform", to_string(command.transform)},
                      {"refit", command.refit},
                      {"nonneg", command.nonneg},
                      {"allow_pseudo_inverse", command.allow_pseudo_inverse},
                      {"cov_window", command.cov_window},
                      {"max_p", command.max_p},
                      {"max_q", command.max_q}};
    meta["series"] = series_meta;
    meta["failure_count"] = failures.size();
    meta["failures"] = failures_json(failures);
    meta["wall_time_ms"] = wall_ms_since(t0);
    write_meta(command.out_dir / "meta.json", std::move(meta));
}

namespace {

struct PredictionCell {
    double value = 0.0;
    std::string kind;
};

using PredictionGroup = std::map<int, std::map<int, PredictionCell>>;  // level -> slot -> cell

Eigen::VectorXd group_vector(const PredictionGroup& group, const AggregationScheme& scheme,
                             const std::string& what) {
    Eigen::VectorXd values(scheme.node_count());
    int pos = 0;
    for (int k : scheme.levels()) {
        const int mk = scheme.frequency(k);
        const auto level_it = group.find(k);
        if (level_it == group.end() || static_cast<int>(level_it->second.size()) != mk) {
            throw IngestionError(what + ": level " + std::to_string(k) + " must supply " +
                                 std::to_string(mk) + " slots");
        }
        for (int u = 1; u <= mk; ++u) {
            const auto slot_it = level_it->second.find(u);
            if (slot_it == level_it->second.end()) {
                throw IngestionError(what + ": missing slot " + std::to_string(u) + " of level " +
                                     std::to_string(k));
            }
            values[pos + u - 1] = slot_it->second.value;
        }
        pos += mk;
    }
    return values;
}

}  // namespace

void cmd_evaluate(const EvaluateCommand& command) {
    const auto t0 = std::chrono::steady_clock::now();

    // predictions: series -> method -> z -> group
    std::map<std::string, std::map<std::string, std::map<int, PredictionGroup>>> predictions;
    {
        std::ifstream in(command.predictions_path);
        if (!in) throw IngestionError("could not open " + command.predictions_path.string());
        std::string line;
        if (!std::getline(in, line)) {
            throw IngestionError(command.predictions_path.string() + " is empty");
        }
        const auto header = split_csv_line(line);
        const std::vector<std::string> expected{"series_id", "level", "slot", "kind",
                                                "value",     "method", "z"};
        if (std::vector<std::string>(header.begin(), header.end()) != expected) {
            throw IngestionError(command.predictions_path.string() +
                                 ": expected header series_id,level,slot,kind,value,method,z");
        }
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") continue;
            const auto fields = split_csv_line(line);
            const std::string context =
                command.predictions_path.string() + ":" + std::to_string(line_no);
            if (fields.size() != 7) throw IngestionError(context + ": expected 7 fields");
            try {
                const int level = std::stoi(fields[1]);
                const int slot = std::stoi(fields[2]);
                const double value = std::stod(fields[4]);
                const int z = std::stoi(fields[6]);
                predictions[fields[0]][fields[5]][z][level][slot] =
                    PredictionCell{value, fields[3]};
            } catch (const std::exception&) {
                throw IngestionError(context + ": malformed row");
            }
        }
    }
    if (predictions.empty()) {
        throw IngestionError("no prediction rows in " + command.predictions_path.string());
    }

    const SeriesTable actuals = read_series_csv(command.actuals_path);

    // The hierarchy is implied by the actuals: level k carries m/k slots.
    std::optional<AggregationScheme> scheme;
    for (const auto& [series_id, levels] : actuals.series) {
        std::vector<int> ks;
        for (const auto& [k, _] : levels) ks.push_back(k);
        const AggregationScheme candidate(ks);
        for (const auto& [k, values] : levels) {
            if (static_cast<int>(values.size()) != candidate.frequency(k)) {
                throw IngestionError("actuals for series " + series_id + " level " +
                                     std::to_string(k) + " must hold exactly " +
                                     std::to_string(candidate.frequency(k)) +
                                     " slots of the evaluation period");
            }
        }
        if (!scheme.has_value()) {
            scheme = candidate;
        } else if (*scheme != candidate) {
            throw IngestionError("actuals mix different aggregation schemes across series");
        }
    }
    if (!scheme.has_value()) throw IngestionError("actuals file holds no series");

    struct CellSums {
        double num = 0.0;
        double den = 0.0;
    };
    std::map<std::string, std::map<int, std::map<int, CellSums>>> sums;  // method -> z -> level

    for (const auto& [series_id, by_method] : predictions) {
        const auto actual_it = actuals.series.find(series_id);
        if (actual_it == actuals.series.end()) {
            throw IngestionError("no actuals supplied for series " + series_id);
        }
        const HierarchyVector actual = stack_period(actual_it->second, *scheme, 1);

        const auto base_it = by_method.find(command.base_method);
        if (base_it == by_method.end() || base_it->second.find(0) == base_it->second.end()) {
            throw IngestionError("series " + series_id + " lacks method '" + command.base_method +
                                 "' z=0 rows needed for rRMSE denominators");
        }
        const Eigen::VectorXd base = group_vector(base_it->second.at(0), *scheme,
                                                  "series " + series_id + " base forecasts");

        for (const auto& [method, by_z] : by_method) {
            if (method == command.base_method) continue;
            const auto z0_it = by_z.find(0);
            if (z0_it == by_z.end()) {
                throw IngestionError("series " + series_id + " method " + method +
                                     " lacks z=0 rows required for the fair comparison");
            }
            HierarchyVector recon0(*scheme,
                                   group_vector(z0_it->second, *scheme,
                                                "series " + series_id + " method " + method +
                                                    " z=0"));
            if (command.nonneg) recon0 = set_negative_to_zero(recon0);

            for (const auto& [z, group] : by_z) {
                const std::string what =
                    "series " + series_id + " method " + method + " z=" + std::to_string(z);
                for (const auto& [k, slots] : group) {
                    for (const auto& [u, cell] : slots) {
                        const bool should_observe = u <= z / k;
                        if ((cell.kind == "observed") != should_observe) {
                            throw IngestionError(what + ": slot " + std::to_string(u) +
                                                 " of level " + std::to_string(k) +
                                                 " has kind '" + cell.kind + "', expected '" +
                                                 (should_observe ? "observed" : "forecast") +
                                                 "'");
                        }
                    }
                }
                HierarchyVector current(*scheme, group_vector(group, *scheme, what));
                if (command.nonneg) current = set_negative_to_zero(current);

                // Fair stacking: observed slots take the z=0 reconciled values.
                HierarchyVector fair = current;
                const auto offsets = scheme->level_offsets();
                for (int k : scheme->levels()) {
                    const int start = offsets.at(k).start;
                    for (int u = 0; u < z / k; ++u) {
                        fair.values[start + u] = recon0.values[start + u];
                    }
                }

                for (int k : scheme->levels()) {
                    const LevelSpan span = offsets.at(k);
                    auto& cell = sums[method][z][k];
                    cell.num +=
                        (actual.values.segment(span.start, span.length) -
                         fair.values.segment(span.start, span.length))
                            .squaredNorm();
                    cell.den += (actual.values.segment(span.start, span.length) -
                                 base.segment(span.start, span.length))
                                    .squaredNorm();
                }
            }
        }
    }

    ensure_dir(command.out_dir);
    {
        std::ofstream out = open_output(command.out_dir / "evaluation.csv");
        out << "method,z,level,rrmse,flag\n";
        for (const auto& [method, by_z] : sums) {
            for (const auto& [z, by_level] : by_z) {
                double total = 0.0;
                bool flagged = false;
                for (int k : scheme->levels()) {
                    const CellSums& cell = by_level.at(k);
                    if (cell.den == 0.0) {
                        out << method << ',' << z << ',' << k << ",inf,1\n";
                        flagged = true;
                    } else {
                        const double rrmse = std::sqrt(cell.num / cell.den);
                        total += rrmse;
                        out << method << ',' << z << ',' << k << ',' << format_double(rrmse)
                            << ",0\n";
                    }
                }
                if (flagged) {
                    out << method << ',' << z << ",overall,inf,1\n";
                } else {
                    out << method << ',' << z << ",overall,"
                        << format_double(total / scheme->level_count()) << ",0\n";
                }
            }
        }
    }

    json meta;
    meta["command"] = "evaluate";
    meta["version"] = kVersion;
    meta["seed"] = command.seed;
    meta["config"] = {{"predictions", command.predictions_path.string()},
                      {"actuals", command.actuals_path.string()},
                      {"nonneg", command.nonneg},
                      {"base_method", command.base_method}};
    meta["wall_time_ms"] = wall_ms_since(t0);
    write_meta(command.out_dir / "meta.json", std::move(meta));
}

}  // namespace hfu
