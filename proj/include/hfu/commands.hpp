#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hfu/io.hpp"
#include "hfu/simulation.hpp"

namespace hfu {

inline constexpr const char* kVersion = "0.1.0";

/// simulate: run the simulation study, write results.csv + meta.json.
struct SimulateCommand {
    SimConfig sim;
    std::filesystem::path out_dir = ".";
};

/// update: ingest a series table and new bottom observations, write
/// updates.csv (per-series coherent updated forecasts) + meta.json.
struct UpdateCommand {
    std::vector<int> scheme_levels;
    std::filesystem::path data_path;
    std::filesystem::path new_obs_path;
    std::filesystem::path out_dir = ".";
    std::vector<ReconMethod> methods{ReconMethod::bottom_up, ReconMethod::mint_shrink};
    std::vector<int> z_list;  // empty = all z in [0, m)
    Transform transform = Transform::none;
    bool refit = false;
    bool nonneg = false;
    bool allow_pseudo_inverse = false;
    int cov_window = 0;
    int max_p = 3;
    int max_q = 3;
    std::uint64_t seed = 1;
};

/// evaluate: score a predictions file against actuals, write evaluation.csv
/// + meta.json. The hierarchy is inferred from the prediction rows.
struct EvaluateCommand {
    std::filesystem::path predictions_path;
    std::filesystem::path actuals_path;
    std::filesystem::path out_dir = ".";
    bool nonneg = false;
    std::string base_method = "base";
    std::uint64_t seed = 1;
};

void cmd_simulate(const SimulateCommand& command);
void cmd_update(const UpdateCommand& command);
void cmd_evaluate(const EvaluateCommand& command);

/// Maps library exceptions onto the documented process exit codes:
/// 1 usage, 2 data, 3 numerical failure.
int exit_code_for(const std::exception& err);

}  // namespace hfu
