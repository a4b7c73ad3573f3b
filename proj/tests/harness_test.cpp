#include "fidosim/scenario.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fidosim/report.hpp"

namespace fidosim {
namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text) lines += c == '\n' ? 1 : 0;
  return lines;
}

// --- profiles ------------------------------------------------------------------

TEST(Profiles, ShippedPresetsResolve) {
  for (const char* name :
       {"hyperfido", "feitian", "constant_time", "kdf", "yubikey_defended"}) {
    auto p = authenticator_preset(name);
    ASSERT_TRUE(p.has_value()) << name;
    EXPECT_EQ(p->name, name);
  }
  for (const char* name :
       {"chromium_unpatched", "chromium_patched", "windows10", "safari_macos", "firefox"}) {
    ASSERT_TRUE(client_preset(name).has_value()) << name;
  }
  EXPECT_FALSE(authenticator_preset("nope").has_value());
  EXPECT_THROW(resolve_authenticator_profile("no-such-profile"), ConfigError);
}

TEST(Profiles, PresetDeltasMatchMeasuredValues) {
  EXPECT_DOUBLE_EQ(authenticator_preset("hyperfido")->timing_delta_us(), 10070.0);
  EXPECT_DOUBLE_EQ(authenticator_preset("feitian")->timing_delta_us(), 2210.0);
  EXPECT_DOUBLE_EQ(authenticator_preset("constant_time")->timing_delta_us(),
                   authenticator_preset("hyperfido")->timing_delta_us());
  auto defended = authenticator_preset("yubikey_defended");
  EXPECT_EQ(defended->defense_threshold, 10);
  EXPECT_DOUBLE_EQ(defended->defense_delay_range_us.first, 50000.0);
  EXPECT_DOUBLE_EQ(defended->defense_delay_range_us.second, 150000.0);
}

TEST(Profiles, ClientPresetRules) {
  auto windows = client_preset("windows10");
  EXPECT_EQ(windows->max_allow_list, 20u);
  auto safari = client_preset("safari_macos");
  EXPECT_EQ(safari->crash_threshold, 64u);
  auto patched = client_preset("chromium_patched");
  EXPECT_TRUE(patched->dedup_before_ctap);
  EXPECT_EQ(patched->max_allow_list, 64u);
  EXPECT_FALSE(client_preset("chromium_unpatched")->dedup_before_ctap);
}

TEST(Profiles, SerializeParseRoundtrip) {
  auto p = *authenticator_preset("yubikey_defended");
  auto parsed = parse_authenticator_profile(serialize_authenticator_profile(p), "roundtrip");
  EXPECT_EQ(parsed.name, p.name);
  EXPECT_EQ(parsed.scheme, p.scheme);
  EXPECT_DOUBLE_EQ(parsed.cost_mac_verify_us, p.cost_mac_verify_us);
  EXPECT_EQ(parsed.defense_threshold, p.defense_threshold);
  EXPECT_DOUBLE_EQ(parsed.defense_delay_range_us.second, p.defense_delay_range_us.second);
  EXPECT_EQ(parsed.audible_button, p.audible_button);

  auto c = *client_preset("chromium_patched");
  auto parsed_client = parse_client_profile(serialize_client_profile(c), "roundtrip");
  EXPECT_EQ(parsed_client.max_allow_list, c.max_allow_list);
  EXPECT_EQ(parsed_client.dedup_before_ctap, c.dedup_before_ctap);
}

TEST(Profiles, ShippedProfileFilesMatchPresets) {
  // The .profile files under profiles/ must parse to the built-in presets.
  std::filesystem::path dir = std::filesystem::path(FIDOSIM_SOURCE_DIR) / "profiles";
  for (const auto& name : authenticator_preset_names()) {
    auto path = dir / (name + ".profile");
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    auto parsed = parse_authenticator_profile(slurp(path), path.string());
    auto preset = *authenticator_preset(name);
    EXPECT_EQ(parsed.scheme, preset.scheme) << name;
    EXPECT_DOUBLE_EQ(parsed.timing_delta_us(), preset.timing_delta_us()) << name;
    EXPECT_DOUBLE_EQ(parsed.jitter_std_us, preset.jitter_std_us) << name;
  }
  for (const auto& name : client_preset_names()) {
    auto path = dir / (name + ".profile");
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    auto parsed = parse_client_profile(slurp(path), path.string());
    auto preset = *client_preset(name);
    EXPECT_EQ(parsed.max_allow_list, preset.max_allow_list) << name;
    EXPECT_EQ(parsed.dedup_before_ctap, preset.dedup_before_ctap) << name;
    EXPECT_EQ(parsed.crash_threshold, preset.crash_threshold) << name;
  }
}

TEST(Profiles, UnknownKeyRejected) {
  EXPECT_THROW(parse_authenticator_profile("bogus_key = 1\n", "test"), ConfigError);
  EXPECT_THROW(parse_client_profile("bogus_key = 1\n", "test"), ConfigError);
  EXPECT_THROW(parse_authenticator_profile("cost_sign_us = abc\n", "test"), ConfigError);
}

TEST(Profiles, UserSubjects) {
  auto s1 = user_subject(1);
  EXPECT_DOUBLE_EQ(s1.unprimed_mean_us, 5041000.0);
  EXPECT_DOUBLE_EQ(s1.primed_std_us, 227000.0);
  auto s2 = user_subject(2);
  EXPECT_DOUBLE_EQ(s2.primed_mean_us, 344000.0);
  auto s3 = user_subject(3);
  EXPECT_DOUBLE_EQ(s3.unprimed_std_us, 844000.0);
  EXPECT_THROW(user_subject(0), ConfigError);
  EXPECT_THROW(user_subject(4), ConfigError);
}

// --- scenario parsing ------------------------------------------------------------

TEST(Scenario, ParseFull) {
  auto s = parse_scenario(
      "name = demo\n"
      "seed = 42\n"
      "mode = attack\n"
      "authenticator_profile = feitian\n"
      "client_profile = windows10\n"
      "user_subject = 2\n"
      "n = 1,5,10\n"
      "trials = 7\n"
      "observations = 21\n"
      "candidate = foreign\n",
      "test");
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.mode, ScenarioMode::kAttack);
  EXPECT_EQ(s.n_values, (std::vector<int>{1, 5, 10}));
  EXPECT_EQ(s.trials, 7);
  EXPECT_EQ(s.observations, 21);
  EXPECT_FALSE(s.candidate_linked);
}

TEST(Scenario, ParseErrors) {
  EXPECT_THROW(parse_scenario("mode = warp\n", "test"), ConfigError);
  EXPECT_THROW(parse_scenario("unknown = 1\n", "test"), ConfigError);
  EXPECT_THROW(parse_scenario("trials = 0\n", "test"), ConfigError);
  EXPECT_THROW(parse_scenario("user_subject = 9\n", "test"), ConfigError);
  EXPECT_THROW(parse_scenario("n = 0\n", "test"), ConfigError);
  EXPECT_THROW(parse_scenario("seed 17\n", "test"), ConfigError);
}

// --- calibrate --------------------------------------------------------------------

TEST(Calibrate, HitsHyperFidoTarget) {
  double verified = 0.0;
  auto p = calibrate(*authenticator_preset("hyperfido"), 10070.0, 0.05, 10000, 1, &verified);
  EXPECT_DOUBLE_EQ(p.timing_delta_us(), 10070.0);
  EXPECT_NEAR(verified, 10070.0, 0.05 * 10070.0);
}

TEST(Calibrate, HitsFeitianTarget) {
  double verified = 0.0;
  auto p = calibrate(*authenticator_preset("feitian"), 2210.0, 0.05, 10000, 1, &verified);
  EXPECT_DOUBLE_EQ(p.timing_delta_us(), 2210.0);
  EXPECT_NEAR(verified, 2210.0, 0.05 * 2210.0);
}

TEST(Calibrate, RescalesToArbitraryTarget) {
  auto p = calibrate(*authenticator_preset("hyperfido"), 5000.0, 0.05, 6000, 2);
  EXPECT_NEAR(p.timing_delta_us(), 5000.0, 1e-9);
  // Proportional split preserved.
  EXPECT_NEAR(p.cost_aes_decrypt_us / p.cost_origin_compare_us, 9000.0 / 1070.0, 1e-9);
}

TEST(Calibrate, ZeroTargetWithinJitterNoise) {
  auto p = calibrate(*authenticator_preset("constant_time"), 0.0, 0.05, 10000, 3);
  EXPECT_DOUBLE_EQ(p.timing_delta_us(), 0.0);
}

TEST(Calibrate, FailsWhenUnreachable) {
  // A constant-time scheme charges both probe classes identically, so no
  // nonzero target can verify no matter how the costs are scaled.
  EXPECT_THROW(calibrate(*authenticator_preset("constant_time"), 10070.0, 0.05, 2000, 1),
               std::runtime_error);
  EXPECT_THROW(calibrate(*authenticator_preset("hyperfido"), -5.0), ConfigError);
}

// --- run_scenario / reports --------------------------------------------------------

TEST(RunScenario, BaselineSummaryShape) {
  Scenario s;
  s.name = "baseline_smoke";
  s.mode = ScenarioMode::kBaseline;
  s.trials = 200;
  s.seed = 9;
  auto report = run_scenario(s);
  ASSERT_EQ(report.summary.size(), 1u);
  EXPECT_EQ(report.rows.size(), 400u);
  EXPECT_NEAR(report.summary[0].mean_td_us - report.summary[0].mean_te_us, 10070.0, 600.0);
  EXPECT_TRUE(report.curves.contains("scatter_random"));
  EXPECT_TRUE(report.curves.contains("scatter_wrong_origin"));
}

TEST(RunScenario, AudioModeRequiresAudibleProfile) {
  Scenario s;
  s.mode = ScenarioMode::kAudio;
  s.authenticator_profile = "feitian";
  s.trials = 5;
  EXPECT_THROW(run_scenario(s), ConfigError);
}

TEST(RunScenario, DeterministicReports) {
  Scenario s;
  s.name = "determinism";
  s.mode = ScenarioMode::kAttack;
  s.trials = 3;
  s.observations = 15;
  s.n_values = {5};
  s.seed = 77;

  auto r1 = run_scenario(s);
  auto r2 = run_scenario(s);
  EXPECT_EQ(observations_csv(r1), observations_csv(r2));
  EXPECT_EQ(summary_csv(r1), summary_csv(r2));
  EXPECT_EQ(verdicts_json(r1), verdicts_json(r2));

  s.seed = 78;
  auto r3 = run_scenario(s);
  EXPECT_NE(observations_csv(r1), observations_csv(r3));
}

TEST(RunScenario, SweepCoversAllMitigations) {
  Scenario s;
  s.name = "sweep_smoke";
  s.mode = ScenarioMode::kMitigationSweep;
  s.trials = 12;  // observations per class; statistical checks live in acceptance
  s.n_values = {8};
  s.seed = 5;
  auto report = run_scenario(s);
  std::vector<std::string> expected{"none",        "dedup", "random_delay",
                                    "list_cap_20", "list_cap_64", "constant_time",
                                    "kdf",         "resident"};
  ASSERT_GE(report.summary.size(), expected.size());
  for (const auto& name : expected) {
    bool found = false;
    for (const auto& row : report.summary) found = found || row.scheme == name;
    EXPECT_TRUE(found) << "missing sweep config " << name;
  }
}

TEST(RunScenario, SweepOverPatchedClientDefeatsEveryListShape) {
  // With the patched client as the base profile, even the no-extra-mitigation
  // configuration deduplicates, so the attack error sits at chance.
  Scenario s;
  s.name = "sweep_patched";
  s.mode = ScenarioMode::kMitigationSweep;
  s.client_profile = "chromium_patched";
  s.trials = 100;
  s.n_values = {60};
  s.seed = 6;
  auto report = run_scenario(s);
  const SummaryRow* none = nullptr;
  for (const auto& row : report.summary) {
    if (row.scheme == "none") none = &row;
  }
  ASSERT_NE(none, nullptr);
  EXPECT_GE(none->error_rate, 0.40);
}

TEST(EmitReport, FilesAndShapes) {
  ExperimentReport report;
  report.scenario_id = "emit_test";
  for (int i = 0; i < 100; ++i) {
    report.rows.push_back({"emit_test", i, "random", 1, "NO_CREDENTIALS", 1000.0 + i, 1, 0.0});
  }
  report.summary.push_back({"wrap_early_abort", 60, 100, 1.0, 2.0, 0.25});
  report.curves["error_vs_n"] = {{1, 0.4}, {5, 0.3}, {10, 0.2}, {20, 0.1}, {60, 0.05}};
  report.verdicts.push_back({"hyperfido", "wrap_early_abort", 60, 100, 0.25, true, 1.0, 42.0});

  auto dir = std::filesystem::temp_directory_path() / "fidosim_emit_test";
  std::filesystem::remove_all(dir);
  auto written = emit_report(report, dir);

  auto obs_text = slurp(dir / "observations.csv");
  EXPECT_EQ(count_lines(obs_text), 101);  // header + 100 rows
  EXPECT_TRUE(obs_text.starts_with(kObservationsHeader));

  auto summary = slurp(dir / "summary.csv");
  EXPECT_EQ(count_lines(summary), 2);
  EXPECT_TRUE(summary.starts_with("scheme,n,trials,mean_te_us,mean_td_us,error_rate"));

  auto curve = slurp(dir / "plotdata_error_vs_n.dat");
  EXPECT_EQ(count_lines(curve), 5);

  auto verdict = slurp(dir / "verdict.json");
  EXPECT_NE(verdict.find("\"linked\": true"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(EmitReport, ByteIdenticalForEqualSeeds) {
  Scenario s;
  s.name = "emit_determinism";
  s.mode = ScenarioMode::kBaseline;
  s.trials = 50;
  s.seed = 123;

  auto dir1 = std::filesystem::temp_directory_path() / "fidosim_det_1";
  auto dir2 = std::filesystem::temp_directory_path() / "fidosim_det_2";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
  emit_report(run_scenario(s), dir1);
  emit_report(run_scenario(s), dir2);

  for (const char* file : {"observations.csv", "summary.csv"}) {
    EXPECT_EQ(slurp(dir1 / file), slurp(dir2 / file)) << file;
  }
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

}  // namespace
}  // namespace fidosim
