#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "hfu/commands.hpp"

namespace {

std::vector<int> parse_scheme(const std::string& text) {
    std::vector<int> levels;
    std::string token;
    for (char c : text + ",") {
        if (c == ',') {
            if (!token.empty()) {
                levels.push_back(std::stoi(token));
                token.clear();
            }
        } else {
            token.push_back(c);
        }
    }
    return levels;
}

std::vector<hfu::ReconMethod> parse_methods(const std::string& text) {
    std::vector<hfu::ReconMethod> methods;
    std::string token;
    for (char c : text + ",") {
        if (c == ',') {
            if (!token.empty()) {
                methods.push_back(hfu::recon_method_from_string(token));
                token.clear();
            }
        } else {
            token.push_back(c);
        }
    }
    return methods;
}

std::vector<int> parse_z_list(const std::string& text, const char* flag) {
    if (text == "all" || text.empty()) return {};
    std::vector<int> zs;
    std::string token;
    for (char c : text + ",") {
        if (c == ',') {
            if (!token.empty()) {
                try {
                    zs.push_back(std::stoi(token));
                } catch (const std::exception&) {
                    throw hfu::UsageError(std::string(flag) + ": could not parse '" + token + "'");
                }
                token.clear();
            }
        } else {
            token.push_back(c);
        }
    }
    if (zs.empty()) throw hfu::UsageError(std::string(flag) + " must list at least one z");
    return zs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hfu - hierarchical forecast updating for temporal hierarchies"};
    app.require_subcommand(1);
    app.set_config("--config")->description("flat key=value config file; CLI flags win");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run the simulation study");
    std::string sim_scheme = "4,1";
    std::string sim_methods = "bottom_up,mint_full,mint_shrink";
    std::string sim_fit = "aicc";
    std::string sim_train_eval = "last";
    std::string sim_z = "all";
    std::string sim_out = "sim_out";
    hfu::SimulateCommand sim_cmd;
    simulate->add_option("--scheme", sim_scheme, "aggregation factors, e.g. 4,1 or 12,3,1");
    simulate->add_option("--p", sim_cmd.sim.p_bot, "bottom-level AR order (0..2)");
    simulate->add_option("--q", sim_cmd.sim.q_bot, "bottom-level MA order (0..2)");
    simulate->add_option("--n-top", sim_cmd.sim.n_top, "top-level sample size");
    simulate->add_option("--sigma2", sim_cmd.sim.sigma2, "bottom innovation variance");
    simulate->add_option("--reps", sim_cmd.sim.reps, "number of repetitions");
    simulate->add_option("--fit", sim_fit, "aicc | correct_orders");
    simulate->add_option("--methods", sim_methods, "comma list of reconciliation methods");
    simulate->add_option("--seed", sim_cmd.sim.seed, "master seed");
    simulate->add_option("--burn-in", sim_cmd.sim.burn_in, "simulation burn-in");
    simulate->add_option("--threads", sim_cmd.sim.threads, "worker threads (0 = hardware)");
    simulate->add_option("--train-eval", sim_train_eval, "last | all training periods");
    simulate->add_option("--cov-window", sim_cmd.sim.cov_window,
                         "periods used for the error covariance (0 = all)");
    simulate->add_option("--z", sim_z, "comma list of z values or 'all'");
    simulate->add_flag("--allow-large", sim_cmd.sim.allow_large, "permit large hierarchies");
    simulate->add_flag("--pinv", sim_cmd.sim.allow_pseudo_inverse,
                       "pseudo-inverse fallback for singular covariances");
    simulate->add_option("--out", sim_out, "output directory");

    // update
    auto* update = app.add_subcommand("update", "update forecasts from partially observed data");
    std::string upd_scheme;
    std::string upd_methods = "bottom_up,mint_shrink";
    std::string upd_z = "all";
    std::string upd_transform = "none";
    std::string upd_data, upd_new_obs, upd_out = "update_out";
    hfu::UpdateCommand upd_cmd;
    update->add_option("--scheme", upd_scheme, "aggregation factors, e.g. 28,7,1")->required();
    update->add_option("--data", upd_data, "long-format series CSV")->required();
    update->add_option("--new-obs", upd_new_obs, "new bottom observations CSV");
    update->add_option("--methods", upd_methods, "comma list of reconciliation methods");
    update->add_option("--z", upd_z, "comma list of z values or 'all'");
    update->add_option("--transform", upd_transform, "none | log1p");
    update->add_flag("--refit", upd_cmd.refit, "refit model parameters on extended history");
    update->add_flag("--nonneg", upd_cmd.nonneg, "apply set-negative-to-zero to the output");
    update->add_flag("--pinv", upd_cmd.allow_pseudo_inverse,
                     "pseudo-inverse fallback for singular covariances");
    update->add_option("--cov-window", upd_cmd.cov_window,
                       "periods used for the error covariance (0 = all)");
    update->add_option("--max-p", upd_cmd.max_p, "AICc grid AR bound");
    update->add_option("--max-q", upd_cmd.max_q, "AICc grid MA bound");
    update->add_option("--seed", upd_cmd.seed, "seed (echoed into meta.json)");
    update->add_option("--out", upd_out, "output directory");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score predictions against actuals");
    std::string eval_pred, eval_actual, eval_out = "eval_out";
    hfu::EvaluateCommand eval_cmd;
    evaluate->add_option("--predictions", eval_pred, "updates.csv-format predictions")->required();
    evaluate->add_option("--actuals", eval_actual, "long-format actuals CSV")->required();
    evaluate->add_flag("--nonneg", eval_cmd.nonneg, "apply set-negative-to-zero before scoring");
    evaluate->add_option("--base-method", eval_cmd.base_method,
                         "method column holding the base forecasts");
    evaluate->add_option("--seed", eval_cmd.seed, "seed (echoed into meta.json)");
    evaluate->add_option("--out", eval_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ||
            e.get_name() == "CallForVersion") {
            return app.exit(e);
        }
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (simulate->parsed()) {
            sim_cmd.sim.scheme_levels = parse_scheme(sim_scheme);
            sim_cmd.sim.methods = parse_methods(sim_methods);
            sim_cmd.sim.fit_mode = hfu::fit_mode_from_string(sim_fit);
            sim_cmd.sim.z_list = parse_z_list(sim_z, "--z");
            if (sim_train_eval == "last") {
                sim_cmd.sim.train_eval = hfu::TrainEval::last_period;
            } else if (sim_train_eval == "all") {
                sim_cmd.sim.train_eval = hfu::TrainEval::all_periods;
            } else {
                throw hfu::UsageError("--train-eval must be 'last' or 'all'");
            }
            sim_cmd.out_dir = sim_out;
            hfu::cmd_simulate(sim_cmd);
        } else if (update->parsed()) {
            upd_cmd.scheme_levels = parse_scheme(upd_scheme);
            upd_cmd.methods = parse_methods(upd_methods);
            upd_cmd.z_list = parse_z_list(upd_z, "--z");
            upd_cmd.transform = hfu::transform_from_string(upd_transform);
            upd_cmd.data_path = upd_data;
            upd_cmd.new_obs_path = upd_new_obs;
            upd_cmd.out_dir = upd_out;
            hfu::cmd_update(upd_cmd);
        } else if (evaluate->parsed()) {
            eval_cmd.predictions_path = eval_pred;
            eval_cmd.actuals_path = eval_actual;
            eval_cmd.out_dir = eval_out;
            hfu::cmd_evaluate(eval_cmd);
        }
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return hfu::exit_code_for(err);
    }
    return 0;
}
