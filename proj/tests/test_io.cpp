#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hfu/commands.hpp"
#include "hfu/rng.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("hfu_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out);
    out << text;
}

// Coherent two-series table on K={4,2,1} from an AR-ish recursion.
void write_test_series(const fs::path& path, int periods, bool with_uppers,
                       double corrupt_upper = 0.0) {
    const hfu::AggregationScheme scheme({4, 2, 1});
    std::ostringstream out;
    out << "series_id,level,index,value\n";
    for (const std::string& id : {"a", "b"}) {
        auto rng = hfu::make_rng(id == "a" ? 301 : 302, 0);
        std::normal_distribution<double> gauss;
        std::vector<double> bottom;
        double prev = 0.0;
        for (int t = 0; t < 4 * periods; ++t) {
            prev = 0.5 * prev + gauss(rng);
            bottom.push_back(prev + 10.0);
        }
        for (std::size_t j = 0; j < bottom.size(); ++j) {
            out << id << ",1," << (j + 1) << ',' << hfu::format_double(bottom[j]) << '\n';
        }
        if (with_uppers) {
            for (int k : {2, 4}) {
                auto agg = hfu::aggregate_series(bottom, scheme, k);
                if (corrupt_upper != 0.0 && id == "b" && k == 2) agg[1] += corrupt_upper;
                for (std::size_t j = 0; j < agg.size(); ++j) {
                    out << id << ',' << k << ',' << (j + 1) << ','
                        << hfu::format_double(agg[j]) << '\n';
                }
            }
        }
    }
    write_file(path, out.str());
}

void write_new_obs(const fs::path& path, int count) {
    std::ostringstream out;
    out << "series_id,index,value\n";
    for (const std::string& id : {"a", "b"}) {
        for (int j = 1; j <= count; ++j) {
            out << id << ',' << j << ',' << hfu::format_double(9.5 + 0.25 * j) << '\n';
        }
    }
    write_file(path, out.str());
}

}  // namespace

TEST_CASE("format_double round-trips doubles through text") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(-1e6, 1e6);
    for (int trial = 0; trial < 200; ++trial) {
        const double x = unif(rng) * std::pow(10.0, trial % 17 - 8);
        CHECK(std::stod(hfu::format_double(x)) == x);
    }
    CHECK(std::stod(hfu::format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(std::stod(hfu::format_double(0.1)) == 0.1);
}

TEST_CASE("series table round trip is lossless") {
    const auto dir = fresh_dir("roundtrip");
    hfu::SeriesTable table;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> gauss;
    for (int j = 0; j < 50; ++j) table.series["x"][1].push_back(gauss(rng) * 1e-7);
    for (int j = 0; j < 25; ++j) table.series["x"][2].push_back(gauss(rng) * 1e9);
    hfu::write_series_csv(dir / "t.csv", table);
    const auto back = hfu::read_series_csv(dir / "t.csv");
    CHECK(back.series == table.series);
}

TEST_CASE("series ingestion validation") {
    const auto dir = fresh_dir("ingest");
    SUBCASE("bad header") {
        write_file(dir / "bad.csv", "a,b,c\n");
        CHECK_THROWS_AS(hfu::read_series_csv(dir / "bad.csv"), hfu::IngestionError);
    }
    SUBCASE("non-contiguous index") {
        write_file(dir / "gap.csv", "series_id,level,index,value\nx,1,1,1.0\nx,1,3,2.0\n");
        CHECK_THROWS_AS(hfu::read_series_csv(dir / "gap.csv"), hfu::IngestionError);
    }
    SUBCASE("duplicate index") {
        write_file(dir / "dup.csv", "series_id,level,index,value\nx,1,1,1.0\nx,1,1,2.0\n");
        CHECK_THROWS_AS(hfu::read_series_csv(dir / "dup.csv"), hfu::IngestionError);
    }
    SUBCASE("non-finite value") {
        write_file(dir / "inf.csv", "series_id,level,index,value\nx,1,1,inf\n");
        CHECK_THROWS_AS(hfu::read_series_csv(dir / "inf.csv"), hfu::IngestionError);
    }
}

TEST_CASE("transform helpers") {
    CHECK(hfu::apply_transform(hfu::Transform::log1p, 0.0) == 0.0);
    CHECK(hfu::invert_transform(hfu::Transform::log1p,
                                hfu::apply_transform(hfu::Transform::log1p, 2.5)) ==
          doctest::Approx(2.5).epsilon(1e-15));
    CHECK_THROWS_AS(hfu::apply_transform(hfu::Transform::log1p, -2.0), hfu::IngestionError);
    CHECK_THROWS_AS(hfu::transform_from_string("sqrt"), hfu::Error);
}

TEST_CASE("exit code mapping") {
    CHECK(hfu::exit_code_for(hfu::UsageError("x")) == 1);
    CHECK(hfu::exit_code_for(hfu::IngestionError("x")) == 2);
    CHECK(hfu::exit_code_for(hfu::ConsistencyError("x")) == 2);
    CHECK(hfu::exit_code_for(hfu::SingularCovarianceError("x")) == 3);
    CHECK(hfu::exit_code_for(hfu::FitFailureError("x")) == 3);
    CHECK(hfu::exit_code_for(std::runtime_error("x")) == 3);
}

TEST_CASE("cmd_simulate writes deterministic results") {
    const auto dir = fresh_dir("simulate");
    hfu::SimulateCommand command;
    command.sim.scheme_levels = {4, 1};
    command.sim.p_bot = 1;
    command.sim.q_bot = 0;
    command.sim.reps = 5;
    command.sim.n_top = 30;
    command.sim.seed = 7;
    command.sim.fit_mode = hfu::FitMode::correct_orders;
    command.out_dir = dir / "run1";
    hfu::cmd_simulate(command);
    CHECK(fs::exists(dir / "run1/results.csv"));
    CHECK(fs::exists(dir / "run1/meta.json"));

    command.out_dir = dir / "run2";
    hfu::cmd_simulate(command);
    CHECK(slurp(dir / "run1/results.csv") == slurp(dir / "run2/results.csv"));

    command.sim.threads = 3;
    command.out_dir = dir / "run3";
    hfu::cmd_simulate(command);
    CHECK(slurp(dir / "run1/results.csv") == slurp(dir / "run3/results.csv"));

    const std::string header = slurp(dir / "run1/results.csv").substr(0, 80);
    CHECK(header.rfind("rep,method,z,level,train_rrmse,train_flag,test_rrmse,test_flag", 0) ==
          0);
}

TEST_CASE("cmd_simulate refuses large schemes without the flag") {
    hfu::SimulateCommand command;
    command.sim.scheme_levels = {360, 12, 1};
    command.out_dir = fresh_dir("refuse");
    CHECK_THROWS_AS(hfu::cmd_simulate(command), hfu::UsageError);
}

TEST_CASE("cmd_update end to end") {
    const auto dir = fresh_dir("update");
    write_test_series(dir / "data.csv", 30, true);
    write_new_obs(dir / "new.csv", 3);

    hfu::UpdateCommand command;
    command.scheme_levels = {4, 2, 1};
    command.data_path = dir / "data.csv";
    command.new_obs_path = dir / "new.csv";
    command.out_dir = dir / "out";
    command.methods = {hfu::ReconMethod::bottom_up, hfu::ReconMethod::mint_shrink};
    command.z_list = {0, 2, 3};
    command.max_p = 1;
    command.max_q = 1;
    hfu::cmd_update(command);

    const std::string text = slurp(dir / "out/updates.csv");
    CHECK(text.rfind("series_id,level,slot,kind,value,method,z", 0) == 0);

    // Parse back and check kind bookkeeping.
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    int base_rows = 0, observed_z0 = 0, observed_z2 = 0;
    while (std::getline(in, line)) {
        const auto fields = hfu::split_csv_line(line);
        REQUIRE(fields.size() == 7);
        const int level = std::stoi(fields[1]);
        const int slot = std::stoi(fields[2]);
        const int z = std::stoi(fields[6]);
        if (fields[5] == "base") ++base_rows;
        if (z == 0 && fields[3] == "observed") ++observed_z0;
        if (z == 2 && fields[3] == "observed") {
            ++observed_z2;
            CHECK(slot <= 2 / level);  // slots 1..floor(z/k)
        }
    }
    CHECK(base_rows == 2 * 7);   // two series, seven nodes
    CHECK(observed_z0 == 0);
    // z=2: two bottom slots and one half-year slot, per series and method.
    CHECK(observed_z2 == 2 * 2 * 3);
}

TEST_CASE("cmd_update rejects incoherent upper levels with a precise message") {
    const auto dir = fresh_dir("incoherent");
    write_test_series(dir / "data.csv", 30, true, /*corrupt_upper=*/0.5);
    hfu::UpdateCommand command;
    command.scheme_levels = {4, 2, 1};
    command.data_path = dir / "data.csv";
    command.out_dir = dir / "out";
    command.z_list = {0};
    command.max_p = 1;
    command.max_q = 0;
    hfu::cmd_update(command);  // series a still succeeds; b is recorded as failed
    const std::string meta = slurp(dir / "out/meta.json");
    CHECK(meta.find("incoherent upper level") != std::string::npos);
    CHECK(meta.find("series b, level 2, index 2") != std::string::npos);
}

TEST_CASE("cmd_update trims a head remainder for bottom-only data") {
    const auto dir = fresh_dir("trim");
    // 18 bottom points on m=4: the first two are dropped per the t* rule.
    std::ostringstream out;
    out << "series_id,level,index,value\n";
    auto rng = hfu::make_rng(303, 0);
    std::normal_distribution<double> gauss;
    double prev = 0.0;
    for (int t = 1; t <= 18 + 4 * 28; ++t) {
        prev = 0.4 * prev + gauss(rng);
        out << "solo,1," << t << ',' << hfu::format_double(prev) << '\n';
    }
    write_file(dir / "data.csv", out.str());
    hfu::UpdateCommand command;
    command.scheme_levels = {4, 1};
    command.data_path = dir / "data.csv";
    command.out_dir = dir / "out";
    command.z_list = {0};
    command.max_p = 1;
    command.max_q = 0;
    hfu::cmd_update(command);
    const std::string meta = slurp(dir / "out/meta.json");
    CHECK(meta.find("\"trimmed_head\": 2") != std::string::npos);
}

TEST_CASE("cmd_update with log1p transform keeps output finite and coherent") {
    const auto dir = fresh_dir("log1p");
    std::ostringstream out;
    out << "series_id,level,index,value\n";
    auto rng = hfu::make_rng(304, 0);
    std::lognormal_distribution<double> lognorm(1.0, 0.5);
    for (int t = 1; t <= 4 * 30; ++t) {
        out << "pv,1," << t << ',' << hfu::format_double(lognorm(rng)) << '\n';
    }
    write_file(dir / "data.csv", out.str());
    write_file(dir / "new.csv", "series_id,index,value\npv,1,3.5\npv,2,4.25\n");

    hfu::UpdateCommand command;
    command.scheme_levels = {4, 2, 1};
    command.data_path = dir / "data.csv";
    command.new_obs_path = dir / "new.csv";
    command.out_dir = dir / "out";
    command.transform = hfu::Transform::log1p;
    command.nonneg = true;
    command.methods = {hfu::ReconMethod::bottom_up, hfu::ReconMethod::mint_shrink};
    command.z_list = {0, 2};
    command.max_p = 1;
    command.max_q = 1;
    hfu::cmd_update(command);

    std::istringstream in(slurp(dir / "out/updates.csv"));
    std::string line;
    std::getline(in, line);
    std::map<std::pair<std::string, int>, std::map<std::pair<int, int>, double>> groups;
    while (std::getline(in, line)) {
        const auto fields = hfu::split_csv_line(line);
        const double value = std::stod(fields[4]);
        CHECK(std::isfinite(value));
        groups[{fields[5], std::stoi(fields[6])}][{std::stoi(fields[1]), std::stoi(fields[2])}] =
            value;
    }
    // Reconciled outputs are coherent and the bottom is non-negative.
    for (const auto& [key, cells] : groups) {
        if (key.first == "base") continue;
        for (int u = 1; u <= 4; ++u) CHECK(cells.at({1, u}) >= 0.0);
        const double bottom_total = cells.at({1, 1}) + cells.at({1, 2}) + cells.at({1, 3}) +
                                    cells.at({1, 4});
        CHECK(cells.at({4, 1}) ==
              doctest::Approx(bottom_total).epsilon(1e-9));
    }
}

TEST_CASE("cmd_evaluate") {
    const auto dir = fresh_dir("evaluate");
    // Build a small prediction set directly: K={2,1}, one series.
    std::ostringstream pred;
    pred << "series_id,level,slot,kind,value,method,z\n";
    // base forecasts (z=0)
    pred << "s,2,1,forecast,10,base,0\n";
    pred << "s,1,1,forecast,4,base,0\n";
    pred << "s,1,2,forecast,4,base,0\n";
    // a reconciled method at z=0 and z=1
    pred << "s,2,1,forecast,9,recon,0\n";
    pred << "s,1,1,forecast,4.5,recon,0\n";
    pred << "s,1,2,forecast,4.5,recon,0\n";
    pred << "s,2,1,forecast,8.5,recon,1\n";
    pred << "s,1,1,observed,5,recon,1\n";
    pred << "s,1,2,forecast,3.5,recon,1\n";
    write_file(dir / "pred.csv", pred.str());
    write_file(dir / "actual.csv",
               "series_id,level,index,value\ns,2,1,9\ns,1,1,5\ns,1,2,4\n");

    hfu::EvaluateCommand command;
    command.predictions_path = dir / "pred.csv";
    command.actuals_path = dir / "actual.csv";
    command.out_dir = dir / "out";
    command.base_method = "base";
    hfu::cmd_evaluate(command);

    const std::string text = slurp(dir / "out/evaluation.csv");
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "method,z,level,rrmse,flag");
    std::map<std::string, double> got;
    while (std::getline(in, line)) {
        const auto fields = hfu::split_csv_line(line);
        got[fields[0] + "/" + fields[1] + "/" + fields[2]] = std::stod(fields[3]);
    }
    // z=0: top error 0 vs base 1 -> 0; bottom errors (0.5,0.5) vs (1,0) -> 1/sqrt(2).
    CHECK(got.at("recon/0/2") == doctest::Approx(0.0));
    CHECK(got.at("recon/0/1") == doctest::Approx(std::sqrt(0.5 / 1.0)));
    // z=1 fair stacking: bottom slot 1 takes the z=0 reconciled 4.5.
    CHECK(got.at("recon/1/2") == doctest::Approx(0.5));
    CHECK(got.at("recon/1/1") == doctest::Approx(std::sqrt((0.25 + 0.25) / 1.0)));
    CHECK(got.at("recon/1/overall") ==
          doctest::Approx(0.5 * (0.5 + std::sqrt(0.5))));
}

TEST_CASE("cmd_evaluate base-only predictions score exactly 1") {
    const auto dir = fresh_dir("evalbase");
    std::ostringstream pred;
    pred << "series_id,level,slot,kind,value,method,z\n";
    pred << "s,2,1,forecast,10,base,0\n";
    pred << "s,1,1,forecast,4,base,0\n";
    pred << "s,1,2,forecast,4,base,0\n";
    pred << "s,2,1,forecast,10,mirror,0\n";
    pred << "s,1,1,forecast,4,mirror,0\n";
    pred << "s,1,2,forecast,4,mirror,0\n";
    write_file(dir / "pred.csv", pred.str());
    write_file(dir / "actual.csv",
               "series_id,level,index,value\ns,2,1,9\ns,1,1,5\ns,1,2,4\n");
    hfu::EvaluateCommand command;
    command.predictions_path = dir / "pred.csv";
    command.actuals_path = dir / "actual.csv";
    command.out_dir = dir / "out";
    hfu::cmd_evaluate(command);
    std::istringstream in(slurp(dir / "out/evaluation.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto fields = hfu::split_csv_line(line);
        if (fields[2] == "1" || fields[2] == "overall") {
            CHECK(std::stod(fields[3]) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("cmd_evaluate flags zero denominators and keeps going") {
    const auto dir = fresh_dir("evalflag");
    std::ostringstream pred;
    pred << "series_id,level,slot,kind,value,method,z\n";
    pred << "s,2,1,forecast,9,base,0\n";   // base top is exact: zero denominator
    pred << "s,1,1,forecast,4,base,0\n";
    pred << "s,1,2,forecast,4,base,0\n";
    pred << "s,2,1,forecast,8,recon,0\n";
    pred << "s,1,1,forecast,4.5,recon,0\n";
    pred << "s,1,2,forecast,3.5,recon,0\n";
    write_file(dir / "pred.csv", pred.str());
    write_file(dir / "actual.csv",
               "series_id,level,index,value\ns,2,1,9\ns,1,1,5\ns,1,2,4\n");
    hfu::EvaluateCommand command;
    command.predictions_path = dir / "pred.csv";
    command.actuals_path = dir / "actual.csv";
    command.out_dir = dir / "out";
    CHECK_NOTHROW(hfu::cmd_evaluate(command));
    const std::string text = slurp(dir / "out/evaluation.csv");
    CHECK(text.find("recon,0,2,inf,1") != std::string::npos);
    CHECK(text.find("recon,0,overall,inf,1") != std::string::npos);
}

TEST_CASE("cmd_evaluate alignment failures") {
    const auto dir = fresh_dir("evalalign");
    std::ostringstream pred;
    pred << "series_id,level,slot,kind,value,method,z\n";
    pred << "s,2,1,forecast,10,base,0\n";
    pred << "s,1,1,forecast,4,base,0\n";
    pred << "s,1,2,forecast,4,base,0\n";
    write_file(dir / "pred.csv", pred.str());

    SUBCASE("missing actuals for the series") {
        write_file(dir / "actual.csv", "series_id,level,index,value\nother,2,1,9\nother,1,1,5\nother,1,2,4\n");
        hfu::EvaluateCommand command;
        command.predictions_path = dir / "pred.csv";
        command.actuals_path = dir / "actual.csv";
        command.out_dir = dir / "out";
        CHECK_THROWS_AS(hfu::cmd_evaluate(command), hfu::IngestionError);
    }
    SUBCASE("actuals not covering one full period") {
        write_file(dir / "actual.csv", "series_id,level,index,value\ns,2,1,9\ns,1,1,5\n");
        hfu::EvaluateCommand command;
        command.predictions_path = dir / "pred.csv";
        command.actuals_path = dir / "actual.csv";
        command.out_dir = dir / "out";
        CHECK_THROWS_AS(hfu::cmd_evaluate(command), hfu::IngestionError);
    }
}
