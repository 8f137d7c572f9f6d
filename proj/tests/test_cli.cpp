#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rollgate/cli.hpp"
#include "rollgate/config.hpp"
#include "rollgate/core_types.hpp"
#include "rollgate/report.hpp"

using namespace rollgate;

namespace {

std::string fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rollgate_cli_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string write_file(const std::string& dir, const std::string& name,
                       const std::string& contents) {
  const std::string path = dir + "/" + name;
  std::ofstream out(path);
  REQUIRE(out.good());
  out << contents;
  return path;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("an empty config yields the documented defaults") {
  const config::AppConfig cfg = config::parse_config_text("");
  CHECK(cfg.run.g == 8);
  CHECK(cfg.run.t_max == 30);
  CHECK(cfg.run.k == 10);
  CHECK(cfg.run.d_l == 0.12);
  CHECK_FALSE(cfg.run.tau_h.has_value());
  CHECK(cfg.run.epsilon == 1e-4);
  CHECK(cfg.run.seed == 42);
  CHECK(cfg.run.n_groups == 100);
  CHECK(cfg.temp_rollout == 0.7);
  CHECK(cfg.temp_eval == 0.0);
  CHECK(cfg.learning_rate == 5e-5);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7, 13, 23, 42});
}

TEST_CASE("config keys parse, normalize and validate") {
  const config::AppConfig cfg = config::parse_config_text(
      "# run block\n"
      "G=6\nT_max=20\nK=5\n d_L = 0.2 \ntau_H=0.85\nepsilon=0.001\nseed=99\nN_groups=50\n"
      "\n"
      "temp_rollout=1.0  # inline comment\ntemp_eval=0.5\nlearning_rate=0.01\nseeds=1, 2,3\n");
  CHECK(cfg.run.g == 6);
  CHECK(cfg.run.t_max == 20);
  CHECK(cfg.run.k == 5);
  CHECK(cfg.run.d_l == 0.2);
  REQUIRE(cfg.run.tau_h.has_value());
  CHECK(*cfg.run.tau_h == 0.85);
  CHECK(cfg.run.epsilon == 0.001);
  CHECK(cfg.run.seed == 99);
  CHECK(cfg.run.n_groups == 50);
  CHECK(cfg.temp_rollout == 1.0);
  CHECK(cfg.temp_eval == 0.5);
  CHECK(cfg.learning_rate == 0.01);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});

  SUBCASE("tau_H can be unset by name") {
    config::AppConfig base = config::parse_config_text("tau_H=0.9\n");
    REQUIRE(base.run.tau_h.has_value());
    config::apply_key(base, "tau_H", "none");
    CHECK_FALSE(base.run.tau_h.has_value());
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_WITH_AS(config::parse_config_text("frob=1\n"),
                         "unknown config key: frob", config::ConfigError);
  }
  SUBCASE("malformed lines are rejected with their line number") {
    CHECK_THROWS_WITH_AS(config::parse_config_text("G=8\nnonsense\n"),
                         "config line 2: expected key=value, got 'nonsense'",
                         config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("=5\n"), config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("G=abc\n"), config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("d_L=0.1x\n"), config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("seeds=\n"), config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("seeds=1,,2\n"), config::ConfigError);
  }
  SUBCASE("range violations name the offending field") {
    CHECK_THROWS_WITH_AS(config::parse_config_text("K=40\n"),
                         "config field K: must satisfy 1 <= K < T_max", config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("G=1\n"), config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("temp_rollout=0\n"), config::ConfigError);
    CHECK_THROWS_AS(config::parse_config_text("learning_rate=0\n"), config::ConfigError);
  }
}

TEST_CASE("flag overrides sit between defaults and validation") {
  const std::string dir = fresh_dir("resolve");
  const std::string path = write_file(dir, "run.cfg", "G=6\nT_max=25\nseed=5\n");

  cli::FlagOverrides over;
  over.g = 12;
  over.seed = 77;
  const config::AppConfig cfg = cli::resolve_config(path, over);
  CHECK(cfg.run.g == 12);      // flag beats file
  CHECK(cfg.run.seed == 77);   // flag beats file
  CHECK(cfg.run.t_max == 25);  // file beats default
  CHECK(cfg.run.k == 10);      // default survives

  const config::AppConfig defaults = cli::resolve_config(std::nullopt, {});
  CHECK(defaults.run.g == 8);
  CHECK(defaults.run.n_groups == 100);

  cli::FlagOverrides bad;
  bad.k = 40;
  CHECK_THROWS_AS(cli::resolve_config(std::nullopt, bad), config::ConfigError);
  CHECK_THROWS_AS(cli::resolve_config(dir + "/absent.cfg", {}), report::IoError);
}

TEST_CASE("canonical lines pin the hash to values, not spellings") {
  const config::AppConfig cfg = config::parse_config_text("");
  const std::string lines = config::canonical_lines(cfg);
  CHECK(lines ==
        "G=8\n"
        "K=10\n"
        "N_groups=100\n"
        "T_max=30\n"
        "d_L=0.12\n"
        "epsilon=0.0001\n"
        "learning_rate=5e-05\n"
        "seed=42\n"
        "seeds=7,13,23,42\n"
        "tau_H=none\n"
        "temp_eval=0\n"
        "temp_rollout=0.7\n");

  const std::string hash = config::config_hash(cfg);
  CHECK(hash.size() == 16);
  CHECK(hash.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(hash == config::config_hash(config::parse_config_text("")));

  // Equivalent spellings hash identically; changed values do not.
  CHECK(config::config_hash(config::parse_config_text("d_L=0.120\nseed=042\n")) ==
        config::config_hash(config::parse_config_text("d_L=0.12\nseed=42\n")));
  CHECK(config::config_hash(config::parse_config_text("seed=43\n")) != hash);
  CHECK(config::config_hash(config::parse_config_text("tau_H=0.9\n")) != hash);
}

TEST_CASE("the byte hash matches the published fnv-1a vectors") {
  CHECK(config::fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(config::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(config::fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("resolved config files record the hash they are named by") {
  const std::string dir = fresh_dir("resolved");
  const config::AppConfig cfg = config::parse_config_text("G=6\nseed=9\n");
  const std::string path = dir + "/config.resolved";
  config::write_resolved(path, cfg);

  const std::string text = read_text(path);
  CHECK(text.rfind("# config_hash=" + config::config_hash(cfg) + "\n", 0) == 0);
  CHECK(text.substr(text.find('\n') + 1) == config::canonical_lines(cfg));

  // The resolved file is itself a loadable config with the same hash.
  const config::AppConfig reloaded = config::load_config(path);
  CHECK(config::config_hash(reloaded) == config::config_hash(cfg));
  CHECK(reloaded.run.g == 6);
  CHECK(reloaded.run.seed == 9);
}

TEST_CASE("run locks are exclusive and released on destruction") {
  const std::string dir = fresh_dir("lock");
  {
    config::RunLock lock(dir);
    CHECK(report::file_exists(dir + "/.lock"));
    CHECK_THROWS_WITH_AS([&] { config::RunLock second(dir); }(),
                         doctest::Contains("run directory is locked by another process"),
                         std::runtime_error);
  }
  CHECK_FALSE(report::file_exists(dir + "/.lock"));
  CHECK_NOTHROW([&] { config::RunLock relock(dir); }());
}

TEST_CASE("the pipeline writes stamped artifacts end to end") {
  const std::string dir = fresh_dir("pipeline");
  const std::string cfg_dir = fresh_dir("pipeline_cfg");
  const std::string cfg_path = write_file(cfg_dir, "run.cfg", "N_groups=40\nseed=11\n");
  const std::string hash = config::config_hash(config::load_config(cfg_path));
  const report::RunPaths paths{dir};

  REQUIRE(cli::run({"rollout", "--config", cfg_path, "--out-dir", dir}) == cli::kOk);
  CHECK(report::file_exists(paths.config_resolved()));
  const core::Corpus rolled = core::read_corpus(paths.corpus());
  REQUIRE(rolled.header.has_value());
  CHECK(rolled.header->config_hash == hash);
  CHECK(rolled.header->seed == 11);
  CHECK(rolled.groups.size() == 40);
  CHECK_FALSE(report::file_exists(dir + "/.lock"));  // released on exit

  REQUIRE(cli::run({"signals", "--out-dir", dir, "--k", "5,10"}) == cli::kOk);
  const core::Corpus annotated = core::read_corpus(paths.corpus());
  for (const auto& group : annotated.groups) {
    CHECK(group.divergence.count(5) == 1);
    CHECK(group.divergence.count(10) == 1);
  }

  REQUIRE(cli::run({"sweep", "--config", cfg_path, "--out-dir", dir}) == cli::kOk);
  const report::CsvFile sweep = report::read_csv(paths.sweep_csv());
  CHECK(sweep.stamp.config_hash == hash);
  CHECK(sweep.stamp.seed == 11);
  CHECK(sweep.header == "K,d_L,cut,TP,FP,precision,recall,safe_pct,raw_pct");
  CHECK_FALSE(sweep.rows.empty());
  const report::CsvFile arms = report::read_csv(paths.arms_csv());
  CHECK(arms.rows.size() == 8);
  CHECK(report::read_csv(paths.mirror_csv()).stamp.config_hash == hash);

  REQUIRE(cli::run({"abtest", "--config", cfg_path, "--out-dir", dir}) == cli::kOk);
  CHECK(report::file_exists(paths.abtest_baseline()));
  CHECK(report::file_exists(paths.abtest_gated()));
  CHECK(report::read_csv(paths.abtest_csv()).stamp.config_hash == hash);

  REQUIRE(cli::run({"bootstrap", "--config", cfg_path, "--out-dir", dir}) == cli::kOk);
  CHECK(report::read_csv(paths.bootstrap_csv()).stamp.config_hash == hash);

  REQUIRE(cli::run({"report", "--config", cfg_path, "--out-dir", dir}) == cli::kOk);
  const std::string text = read_text(paths.report_txt());
  CHECK(text.rfind("selective-rollout gating report\nconfig_hash: " + hash + "\nseed: 11\n", 0) ==
        0);
  CHECK(contains(text, "== gate threshold sweep =="));
  CHECK(contains(text, "== paired rollout A/B =="));
  CHECK(report::file_exists(paths.manifest_json()));
}

TEST_CASE("exit codes identify the failure class") {
  const std::string dir = fresh_dir("codes");

  SUBCASE("unknown subcommands and flags are usage errors") {
    CHECK(cli::run({"frobnicate"}) == cli::kUsageError);
    CHECK(cli::run({"rollout", "--bogus"}) == cli::kUsageError);
    CHECK(cli::run({"rollout", "--n", "abc"}) == cli::kUsageError);
  }
  SUBCASE("bad config values are config errors") {
    const std::string bad = write_file(dir, "bad.cfg", "K=40\n");
    CHECK(cli::run({"rollout", "--config", bad, "--out-dir", dir}) == cli::kConfigError);
    const std::string junk = write_file(dir, "junk.cfg", "frob=1\n");
    CHECK(cli::run({"rollout", "--config", junk, "--out-dir", dir}) == cli::kConfigError);
  }
  SUBCASE("missing inputs are io errors") {
    CHECK(cli::run({"sweep", "--out-dir", dir}) == cli::kIoError);
    CHECK(cli::run({"rollout", "--config", dir + "/absent.cfg", "--out-dir", dir}) ==
          cli::kIoError);
  }
  SUBCASE("a held lock is an io error") {
    write_file(dir, ".lock", "");
    CHECK(cli::run({"rollout", "--n", "10", "--out-dir", dir}) == cli::kIoError);
    std::filesystem::remove(dir + "/.lock");
  }
  SUBCASE("mixed stamps in one run directory are validation errors") {
    REQUIRE(cli::run({"rollout", "--n", "10", "--out-dir", dir}) == cli::kOk);
    report::write_csv(report::RunPaths{dir}.sweep_csv(), {"f00dface00000000", 1}, "K,d_L",
                      std::vector<std::string>{"10,0.12"});
    CHECK(cli::run({"report", "--out-dir", dir}) == cli::kValidationError);
  }
}
