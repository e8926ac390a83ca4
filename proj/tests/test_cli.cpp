#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "optembed/cli.hpp"

using namespace optembed;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("optembed");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_run(static_cast<int>(argv.size()), argv.data());
}

struct TempRunDir {
    fs::path dir;
    TempRunDir() : dir(fs::temp_directory_path() / "optembed_cli_test") {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TempRunDir() { fs::remove_all(dir); }
    std::string str() const { return dir.string(); }
};

bool has_artifact(const fs::path& dir, const std::string& prefix) {
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().filename().string().rfind(prefix, 0) == 0) return true;
    }
    return false;
}

const std::vector<std::string> kTinyConfig = {
    "--set", "synth.fields=3",     "--set", "synth.cardinalities=15",
    "--set", "synth.informative=2", "--set", "synth.rows=600",
    "--set", "model.embed_dim=4",  "--set", "model.mlp_dims=8",
    "--set", "train.batch_size=128", "--set", "train.max_epochs=1",
    "--set", "search.iterations=1", "--set", "search.n_m=3",
    "--set", "search.n_c=3",       "--set", "search.k=4",
};

std::vector<std::string> with_config(const std::string& cmd, const TempRunDir& dir) {
    std::vector<std::string> args = {cmd, "--out", dir.str()};
    args.insert(args.end(), kTinyConfig.begin(), kTinyConfig.end());
    return args;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run_cli({}) == 1);
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({"prepare", "--bogus"}) == 1);
    CHECK(run_cli({"prepare", "--set", "noequalsign"}) == 1);
    CHECK(run_cli({"prepare", "--set", "not.a.key=1"}) == 1);
    CHECK(run_cli({"prepare", "--seed", "notanumber"}) == 1);
}

TEST_CASE("help exits cleanly") { CHECK(run_cli({"--help"}) == 0); }

TEST_CASE("phase ordering is enforced with exit code 2") {
    TempRunDir dir;
    CHECK(run_cli(with_config("prepare", dir)) == 2);         // no synth data yet
    CHECK(run_cli(with_config("train-supernet", dir)) == 2);  // no prepared data
    CHECK(run_cli(with_config("search", dir)) == 2);          // no supernet
    CHECK(run_cli(with_config("retrain", dir)) == 2);
    CHECK(run_cli(with_config("evaluate", dir)) == 2);
    CHECK(run_cli(with_config("report", dir)) == 2);
}

TEST_CASE("synth then prepare produce versioned artifacts") {
    TempRunDir dir;
    REQUIRE(run_cli(with_config("synth", dir)) == 0);
    CHECK(has_artifact(dir.dir, "synth-data.v001"));
    REQUIRE(run_cli(with_config("prepare", dir)) == 0);
    CHECK(has_artifact(dir.dir, "prepared.v001"));
    CHECK(has_artifact(dir.dir, "resolved-prepare.v001"));

    // Re-running appends a new version instead of overwriting.
    REQUIRE(run_cli(with_config("prepare", dir)) == 0);
    CHECK(has_artifact(dir.dir, "prepared.v002"));
    CHECK(has_artifact(dir.dir, "prepared.v001"));
}

TEST_CASE("report after only the supernet phase marks the rest absent") {
    TempRunDir dir;
    REQUIRE(run_cli(with_config("synth", dir)) == 0);
    REQUIRE(run_cli(with_config("prepare", dir)) == 0);
    REQUIRE(run_cli(with_config("train-supernet", dir)) == 0);
    REQUIRE(run_cli(with_config("report", dir)) == 0);
    std::ifstream in(dir.dir / "report.v001.txt");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("supernet  0.") != std::string::npos);
    CHECK(text.find("baseline  (absent)") != std::string::npos);
    CHECK(text.find("optembed  (absent)") != std::string::npos);
    CHECK(text.find("search    (absent)") != std::string::npos);
}

TEST_CASE("search after train-supernet works and retrain consumes its mask") {
    TempRunDir dir;
    REQUIRE(run_cli(with_config("synth", dir)) == 0);
    REQUIRE(run_cli(with_config("prepare", dir)) == 0);
    REQUIRE(run_cli(with_config("train-supernet", dir)) == 0);
    CHECK(has_artifact(dir.dir, "supernet.v001"));
    CHECK(has_artifact(dir.dir, "metrics-supernet.v001"));

    CHECK(run_cli(with_config("retrain", dir)) == 2);  // search hasn't run yet
    REQUIRE(run_cli(with_config("search", dir)) == 0);
    CHECK(has_artifact(dir.dir, "best-mask.v001"));
    CHECK(has_artifact(dir.dir, "search-log.v001"));

    REQUIRE(run_cli(with_config("retrain", dir)) == 0);
    CHECK(has_artifact(dir.dir, "final.v001"));

    auto baseline_args = with_config("retrain", dir);
    baseline_args.push_back("--set");
    baseline_args.push_back("retrain.mode=baseline");
    REQUIRE(run_cli(baseline_args) == 0);
    CHECK(has_artifact(dir.dir, "baseline.v001"));

    REQUIRE(run_cli(with_config("evaluate", dir)) == 0);
    CHECK(has_artifact(dir.dir, "metrics-evaluate-final.v001"));

    REQUIRE(run_cli(with_config("report", dir)) == 0);
    CHECK(has_artifact(dir.dir, "report.v001"));
    CHECK(has_artifact(dir.dir, "normfreq-scatter.v001"));

    // Reports are deterministic: running twice gives identical bytes.
    REQUIRE(run_cli(with_config("report", dir)) == 0);
    auto slurp = [&](const std::string& name) {
        std::ifstream in(dir.dir / name, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    CHECK(slurp("report.v001.txt") == slurp("report.v002.txt"));
}
