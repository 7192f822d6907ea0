#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cgff/config.hpp"
#include "cgff/experiments.hpp"

using namespace cgff;

namespace {

std::string error_of(const std::string& text) {
  try {
    validate(parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("ini parsing, ranges and errors") {
    const ExperimentConfig c = parse_config_text(
        "[experiment]\nkind = estimate-hstar\n# comment\n[lattice]\nL = 8, 16\n[levels]\nh = 0:0.1:0.05\n"
        "[run]\nreplicas = 12\nseed = 5\n");
    CHECK(c.kind == "estimate-hstar");
    CHECK(c.L == std::vector<int64_t>{8, 16});
    REQUIRE(c.h.size() == 3);
    CHECK(c.h[2] == doctest::Approx(0.1));
    CHECK(c.replicas == 12);
    CHECK(c.seed == 5);
    CHECK_NOTHROW(validate(c));

    CHECK(error_of("[experiment]\nkind = flip\n[run]\nreplicaz = 3\n").find("line 4") != std::string::npos);
    CHECK(error_of("[experiment]\nkind = flip\n[bogus]\nx = 1\n").find("line 4: unknown key 'bogus.x'") != std::string::npos);
    CHECK(error_of("[experiment]\nkind = flip\n[lattice]\nd = 2\n").find("transien") != std::string::npos);
    CHECK(error_of("[experiment]\nkind = nothing\n") != "");
    CHECK(error_of("[experiment]\nkind = flip\n[run]\nreplicas = many\n").find("line 4") != std::string::npos);
  }

  TEST_CASE("json matches ini and the hash is stable") {
    const ExperimentConfig a = parse_config_text("[experiment]\nkind = flip\n[run]\nseed = 3\n[levels]\nh = 0.1, 0.2\n");
    const ExperimentConfig b =
        parse_config_json(R"({"experiment": {"kind": "flip"}, "run": {"seed": 3}, "levels": {"h": [0.1, 0.2]}})");
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    ExperimentConfig c = a;
    c.threads = 7;
    c.out = "elsewhere";
    CHECK(c.hash() == a.hash());
    c.seed = 4;
    CHECK(c.hash() != a.hash());
  }

  TEST_CASE("environment overrides") {
    ExperimentConfig c = default_config("flip");
    setenv("CGFF_RUN_SEED", "77", 1);
    setenv("CGFF_LEVELS_H", "0.3", 1);
    const auto applied = apply_env_overrides(c);
    unsetenv("CGFF_RUN_SEED");
    unsetenv("CGFF_LEVELS_H");
    CHECK(applied.size() == 2);
    CHECK(c.seed == 77);
    CHECK(c.h == std::vector<double>{0.3});
  }

  TEST_CASE("csv and report layout") {
    Table t{"empty", {"a", "b"}, {}};
    CHECK(to_csv(t) == "a,b\n");
    ExperimentResult r;
    r.config = default_config("flip");
    r.checks.push_back({"x", true, ""});
    const nlohmann::json j = report_json(r);
    CHECK(j["schema"] == kReportSchema);
    CHECK(j["config_hash"] == r.config.hash());
    CHECK(j.contains("timestamp"));
    CHECK_FALSE(report_json(r, false).contains("timestamp"));
    CHECK(j["pass"] == true);
  }

  TEST_CASE("replay gives identical reports") {
    ExperimentConfig c = default_config("flip");
    c.h = {0.1};
    c.boundaries = 20;
    c.inner = 200;
    c.replicas = 20;
    c.seed = 11;
    const ExperimentResult r1 = run(c);
    c.threads = 1;
    const ExperimentResult r2 = run(c);
    CHECK(report_json(r1, false).dump() == report_json(r2, false).dump());

    const auto dir = std::filesystem::temp_directory_path() / "cgff_harness_test";
    std::filesystem::remove_all(dir);
    const auto files = emit_report(r1, dir.string());
    CHECK(std::filesystem::exists(dir / "flip.json"));
    for (const auto& f : files) CHECK(std::filesystem::exists(f));
    std::ifstream in(dir / "flip.json");
    const nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j["kind"] == "flip");
    std::filesystem::remove_all(dir);
  }
}
