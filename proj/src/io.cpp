#include "hfu/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace hfu {

std::string to_string(Transform t) { return t == Transform::none ? "none" : "log1p"; }

Transform transform_from_string(const std::string& name) {
    if (name == "none" || name.empty()) return Transform::none;
    if (name == "log1p") return Transform::log1p;
    throw Error("unknown transform '" + name + "' (expected none or log1p)");
}

double apply_transform(Transform t, double x) {
    if (t == Transform::none) return x;
    if (x <= -1.0) {
        throw IngestionError("log1p transform requires values > -1, got " + std::to_string(x));
    }
    return std::log1p(x);
}

double invert_transform(Transform t, double x) {
    return t == Transform::none ? x : std::expm1(x);
}

std::vector<std::string> SeriesTable::series_ids() const {
    std::vector<std::string> ids;
    ids.reserve(series.size());
    for (const auto& [id, _] : series) ids.push_back(id);
    return ids;
}

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    for (auto& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t' || f.front() == '\r')) {
            f.erase(f.begin());
        }
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) {
            f.pop_back();
        }
    }
    return fields;
}

namespace {

double parse_double(const std::string& text, const std::string& context) {
    try {
        std::size_t used = 0;
        const double value = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw IngestionError("could not parse number '" + text + "' in " + context);
    }
}

long parse_int(const std::string& text, const std::string& context) {
    try {
        std::size_t used = 0;
        const long value = std::stol(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw IngestionError("could not parse integer '" + text + "' in " + context);
    }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("could not open " + path.string());
    return in;
}

}  // namespace

SeriesTable read_series_csv(const std::filesystem::path& path) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line)) throw IngestionError(path.string() + " is empty");
    const auto header = split_csv_line(line);
    if (header.size() != 4 || header[0] != "series_id" || header[1] != "level" ||
        header[2] != "index" || header[3] != "value") {
        throw IngestionError(path.string() + ": expected header series_id,level,index,value");
    }

    // (series, level) -> index -> value, re-checked for contiguity below.
    std::map<std::string, std::map<int, std::map<long, double>>> staged;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const std::string context = path.string() + ":" + std::to_string(line_no);
        if (fields.size() != 4) throw IngestionError(context + ": expected 4 fields");
        const int level = static_cast<int>(parse_int(fields[1], context));
        const long index = parse_int(fields[2], context);
        const double value = parse_double(fields[3], context);
        if (!std::isfinite(value)) throw IngestionError(context + ": non-finite value");
        auto& slot = staged[fields[0]][level];
        if (!slot.emplace(index, value).second) {
            throw IngestionError(context + ": duplicate index " + std::to_string(index));
        }
    }

    SeriesTable table;
    for (const auto& [id, levels] : staged) {
        for (const auto& [level, indexed] : levels) {
            std::vector<double> values;
            values.reserve(indexed.size());
            long expected = 1;
            for (const auto& [index, value] : indexed) {
                if (index != expected) {
                    throw IngestionError(path.string() + ": series " + id + " level " +
                                         std::to_string(level) + " index " +
                                         std::to_string(index) + " breaks contiguity (expected " +
                                         std::to_string(expected) + ")");
                }
                ++expected;
                values.push_back(value);
            }
            table.series[id][level] = std::move(values);
        }
    }
    return table;
}

void write_series_csv(const std::filesystem::path& path, const SeriesTable& table) {
    std::ofstream out(path);
    if (!out) throw IngestionError("could not open " + path.string() + " for writing");
    out << "series_id,level,index,value\n";
    for (const auto& [id, levels] : table.series) {
        for (const auto& [level, values] : levels) {
            for (std::size_t j = 0; j < values.size(); ++j) {
                out << id << ',' << level << ',' << (j + 1) << ',' << format_double(values[j])
                    << '\n';
            }
        }
    }
}

std::map<std::string, std::vector<double>> read_new_obs_csv(const std::filesystem::path& path) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line)) throw IngestionError(path.string() + " is empty");
    const auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "series_id" || header[1] != "index" ||
        header[2] != "value") {
        throw IngestionError(path.string() + ": expected header series_id,index,value");
    }
    std::map<std::string, std::map<long, double>> staged;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const std::string context = path.string() + ":" + std::to_string(line_no);
        if (fields.size() != 3) throw IngestionError(context + ": expected 3 fields");
        const long index = parse_int(fields[1], context);
        const double value = parse_double(fields[2], context);
        if (!std::isfinite(value)) throw IngestionError(context + ": non-finite value");
        if (!staged[fields[0]].emplace(index, value).second) {
            throw IngestionError(context + ": duplicate index");
        }
    }
    std::map<std::string, std::vector<double>> out;
    for (const auto& [id, indexed] : staged) {
        long expected = 1;
        std::vector<double> values;
        for (const auto& [index, value] : indexed) {
            if (index != expected) {
                throw IngestionError(path.string() + ": series " + id +
                                     " new observations must be indexed contiguously from 1");
            }
            ++expected;
            values.push_back(value);
        }
        out[id] = std::move(values);
    }
    return out;
}

}  // namespace hfu
