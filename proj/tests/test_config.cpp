#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "optembed/config.hpp"

using namespace optembed;

TEST_CASE("config rejects unknown keys") {
    Config cfg = Config::defaults();
    CHECK_THROWS_WITH_AS(cfg.set("train.learning_rate", "0.1"),
                         doctest::Contains("unknown config key"), std::invalid_argument);
}

TEST_CASE("config resolution is pure") {
    Config a = Config::defaults();
    a.set("train.lr", "3e-4");
    a.set("seed", "9");
    Config b = Config::defaults();
    b.set("seed", "9");
    b.set("train.lr", "3e-4");
    CHECK(a.canonical_text() == b.canonical_text());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash_hex().size() == 12);

    Config c = Config::defaults();
    c.set("train.lr", "3e-4");
    CHECK(a.hash() != c.hash());
}

TEST_CASE("config file parsing with comments and whitespace") {
    const auto path = std::filesystem::temp_directory_path() / "cfg_test.cfg";
    {
        std::ofstream out(path);
        out << "# a comment\n";
        out << "train.lr = 1e-4   # trailing comment\n";
        out << "\n";
        out << "  model.embed_dim=8\n";
    }
    Config cfg = Config::from_file(path.string());
    CHECK(cfg.get("train.lr") == "1e-4");
    CHECK(cfg.get("model.embed_dim") == "8");
    std::filesystem::remove(path);
}

TEST_CASE("run config validates ranges") {
    Config cfg = Config::defaults();
    cfg.set("train.lr", "0");
    CHECK_THROWS_AS(RunConfig::from(cfg), std::invalid_argument);

    cfg = Config::defaults();
    cfg.set("search.prob", "1.5");
    CHECK_THROWS_AS(RunConfig::from(cfg), std::invalid_argument);

    cfg = Config::defaults();
    cfg.set("synth.informative", "99");
    CHECK_THROWS_AS(RunConfig::from(cfg), std::invalid_argument);

    cfg = Config::defaults();
    cfg.set("data.field_kinds", "cat,bogus");
    CHECK_THROWS_AS(RunConfig::from(cfg), std::invalid_argument);
}

TEST_CASE("run config typed view") {
    Config cfg = Config::defaults();
    cfg.set("model.mlp_dims", "32,16");
    cfg.set("synth.cardinalities", "50,60,70");
    cfg.set("synth.fields", "3");
    cfg.set("synth.informative", "2");
    cfg.set("data.field_kinds", "cat,num");
    cfg.set("discretize.log_base", "log2");
    RunConfig rc = RunConfig::from(cfg);
    CHECK(rc.mlp_dims == std::vector<size_t>{32, 16});
    CHECK(rc.synth.cardinalities == std::vector<uint32_t>{50, 60, 70});
    CHECK(rc.field_kinds.size() == 2);
    CHECK(rc.field_kinds[1] == FieldKind::numeric);
    CHECK(rc.log_base == LogBase::log2);
}
