#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("htlab_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const fs::path& dir, const std::string& config, const std::string& cmd, const std::string& extra = "") {
    std::ofstream(dir / "config.json") << config;
    std::string line = std::string(HTLAB_CLI_PATH) + " --config " + (dir / "config.json").string() + " --out " +
                       (dir / "out").string() + " " + extra + " " + cmd + " > " + (dir / "log.txt").string() + " 2>&1";
    int st = std::system(line.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
    std::ifstream f(p);
    std::string line;
    std::getline(f, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST(Cli, EmptyConfigIsSchemaError) {
    auto d = scratch("empty");
    EXPECT_EQ(run(d, "", "gcc-time"), 2);
    EXPECT_EQ(run(d, "{}", "gcc-time"), 2);
    EXPECT_EQ(run(d, R"({"structure": {}, "gcc-time": {"radius": 0.5}})", "gcc-time"), 2);
    EXPECT_EQ(run(d, R"({"structure": {"d": "one"}})", "validate-structure"), 2);
    EXPECT_EQ(run(d, R"({"structure": {}, "propagate": {"potential": {"kind": "cubic"}}})", "propagate"), 2);
}

TEST(Cli, ValidateStructure) {
    auto d = scratch("validate");
    ASSERT_EQ(run(d, R"({"structure": {"preset": "heisenberg", "d": 2}})", "validate-structure"), 0);
    auto m = json::parse(slurp(d / "out" / "manifest.json"));
    EXPECT_TRUE(m.at("passed").get<bool>());
    EXPECT_EQ(m.at("subcommand"), "validate-structure");
    EXPECT_EQ(m.at("config_hash").get<std::string>().size(), 16u);
    EXPECT_TRUE(m.at("tolerances").contains("invariant"));
    EXPECT_TRUE(m.at("versions").contains("eigen"));
    for (auto& r : read_csv(d / "out" / "invariants.csv")) EXPECT_LT(r[1], 1e-12);
}

TEST(Cli, PropagateZeroTimeIsIdentity) {
    auto d = scratch("propagate");
    ASSERT_EQ(run(d,
                  R"({"structure": {}, "propagate": {"t": 0.0, "steps": 1, "potential": {"kind": "zero"},
                      "packet": {"eps": 0.04, "grid": {"n_v": 16, "n_z": 16}}}})",
                  "propagate"),
              0)
        << slurp(d / "log.txt");
    auto in = read_csv(d / "out" / "input.csv"), out = read_csv(d / "out" / "output.csv");
    ASSERT_EQ(in.size(), out.size());
    ASSERT_FALSE(in.empty());
    for (size_t i = 0; i < in.size(); ++i) {
        EXPECT_NEAR(out[i][1], in[i][1], 1e-12);
        EXPECT_NEAR(out[i][2], in[i][2], 1e-12);
    }
}

TEST(Cli, GccTimeRow) {
    auto d = scratch("gcc");
    ASSERT_EQ(run(d, R"({"structure": {}, "gcc-time": {"radii": [0.5], "n_v": 11, "n_z": 200, "expected": [2.0]}})",
                  "gcc-time"),
              0)
        << slurp(d / "log.txt");
    EXPECT_EQ(slurp(d / "out" / "gcc_time.csv").substr(0, 25), "r,t_gcc_lower,t_gcc_upper");
    auto rows = read_csv(d / "out" / "gcc_time.csv");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0][0], 0.5);
    EXPECT_LE(rows[0][1], 2.0);
    EXPECT_GE(rows[0][2], 2.0);
    EXPECT_LT(rows[0][2] - rows[0][1], 0.05);
    EXPECT_TRUE(fs::exists(d / "out" / "gcc_time.gp"));
    EXPECT_EQ(json::parse(slurp(d / "out" / "witnesses.json")).size(), 1u);
}

TEST(Cli, FailedCheckWritesReport) {
    auto d = scratch("fail");
    EXPECT_EQ(run(d, R"({"structure": {}, "gcc-time": {"radii": [5.0]}})", "gcc-time"), 1);
    auto f = json::parse(slurp(d / "out" / "failure.json"));
    EXPECT_EQ(f.at("violated")[0].at("invariant"), "DimensionError");
    // a declared expectation that does not hold
    EXPECT_EQ(run(d,
                  R"({"structure": {}, "assumption-a": {"set": {"kind": "v_slab", "axis": 0, "lo": 1.0, "hi": 1.5},
                      "n": 3, "directions": 4, "horizon": 3, "expect": true}})",
                  "assumption-a"),
              1);
    f = json::parse(slurp(d / "out" / "failure.json"));
    EXPECT_EQ(f.at("violated")[0].at("invariant"), "assumption A outcome");
}

TEST(Cli, OutputsIndependentOfWorkerCount) {
    auto a = scratch("w1"), b = scratch("w2");
    const std::string cfg =
        R"({"structure": {}, "propagate": {"t": 0.05, "steps": 2, "potential": {"kind": "quadratic", "amplitude": 3.0},
            "packet": {"eps": 0.04, "grid": {"n_v": 24, "n_z": 24}}}})";
    ASSERT_EQ(run(a, cfg, "propagate", "--workers 1"), 0);
    ASSERT_EQ(run(b, cfg, "propagate", "--workers 3"), 0);
    EXPECT_EQ(slurp(a / "out" / "output.csv"), slurp(b / "out" / "output.csv"));
    const std::string gcc = R"({"structure": {}, "gcc-time": {"radii": [0.3], "n_v": 7, "n_z": 100}})";
    ASSERT_EQ(run(a, gcc, "gcc-time", "--workers 1"), 0);
    ASSERT_EQ(run(b, gcc, "gcc-time", "--workers 3"), 0);
    EXPECT_EQ(slurp(a / "out" / "gcc_time.csv"), slurp(b / "out" / "gcc_time.csv"));
}
