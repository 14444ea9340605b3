#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hfu/hierarchy.hpp"

namespace hfu {

enum class Transform { none, log1p };

std::string to_string(Transform t);
Transform transform_from_string(const std::string& name);

double apply_transform(Transform t, double x);
double invert_transform(Transform t, double x);

/// Long-format series records: one (series_id, level, index, value) row per
/// observation, indices contiguous from 1 per (series_id, level).
struct SeriesTable {
    // series_id -> level -> values ordered by index
    std::map<std::string, std::map<int, std::vector<double>>> series;

    std::vector<std::string> series_ids() const;
};

/// Formats a double as decimal text with 17 significant digits, enough to
/// round-trip any finite value.
std::string format_double(double value);

/// Reads a long-format CSV with header series_id,level,index,value.
/// Enforces contiguous 1-based indices and finite values.
SeriesTable read_series_csv(const std::filesystem::path& path);

void write_series_csv(const std::filesystem::path& path, const SeriesTable& table);

/// New-observation file: header series_id,index,value with bottom-level
/// indices contiguous from 1.
std::map<std::string, std::vector<double>> read_new_obs_csv(const std::filesystem::path& path);

/// Splits a comma-separated CSV line, trimming surrounding whitespace.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace hfu
