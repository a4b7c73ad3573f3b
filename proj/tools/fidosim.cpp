// Command-line scenario runner for the FIDO2 key-handle timing simulator.
//
// Exit codes: 0 success, 1 scenario failure, 2 configuration error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fidosim/fidosim.hpp"

namespace {

std::optional<std::uint64_t> seed_override_from_env() {
  const char* env = std::getenv("FIDO_SIDECHAN_SEED");
  if (!env || !*env) return std::nullopt;
  try {
    std::size_t pos = 0;
    std::uint64_t seed = std::stoull(env, &pos);
    if (pos != std::string(env).size()) throw std::invalid_argument("trailing");
    return seed;
  } catch (const std::exception&) {
    throw fidosim::ConfigError(std::string("FIDO_SIDECHAN_SEED is not an integer: ") + env);
  }
}

void print_report_summary(const fidosim::ExperimentReport& report) {
  std::printf("scenario %s (seed %llu): %zu observation rows, %zu summary rows, %.1f ms\n",
              report.scenario_id.c_str(), static_cast<unsigned long long>(report.seed),
              report.rows.size(), report.summary.size(), report.wall_clock_ms);
  for (const auto& row : report.summary) {
    std::printf("  %-24s n=%-4d trials=%-6d mean_te=%12.3f us  mean_td=%12.3f us  error=%.4f\n",
                row.scheme.c_str(), row.n, row.trials, row.mean_te_us, row.mean_td_us,
                row.error_rate);
  }
  for (const auto& v : report.verdicts) {
    std::printf("  verdict %-24s n=%-4d linked=%s linked_rate=%.3f margin=%.1f us\n",
                v.profile.c_str(), v.n, v.linked ? "yes" : "no", v.linked_rate, v.margin_us);
  }
}

fidosim::Client::WireTap make_wire_tap() {
  return [](bool to_authenticator, std::span<const std::uint8_t> frame) {
    std::printf("%s %s\n", to_authenticator ? "->" : "<-", fidosim::to_hex(frame).c_str());
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fidosim: FIDO2 key-handle timing side-channel simulator"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Run a scenario file and emit CSV/plot data");
  std::string scenario_path;
  std::string out_dir = "out";
  bool dump_wire = false;
  run_cmd->add_option("--scenario", scenario_path, "Scenario file (key = value lines)")->required();
  run_cmd->add_option("--out", out_dir, "Output directory");
  run_cmd->add_flag("--dump-wire", dump_wire, "Hex-dump CTAP frames for single-probe demo traffic");

  // calibrate
  auto* cal_cmd = app.add_subcommand("calibrate", "Calibrate a profile to a target timing delta");
  std::string cal_profile = "hyperfido";
  double cal_delta_us = 0.0;
  double cal_tolerance = 0.05;
  std::uint64_t cal_seed = 1;
  std::string cal_out;
  cal_cmd->add_option("--profile", cal_profile, "Authenticator profile name or file")->required();
  cal_cmd->add_option("--delta-us", cal_delta_us, "Target silent-probe delta in microseconds")
      ->required();
  cal_cmd->add_option("--tolerance", cal_tolerance, "Relative tolerance for verification");
  cal_cmd->add_option("--seed", cal_seed, "Verification seed");
  cal_cmd->add_option("--out", cal_out, "Write the calibrated profile to this file");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the mitigation sweep and emit reports");
  std::string sweep_out;
  std::string sweep_auth = "hyperfido";
  std::string sweep_client = "chromium_unpatched";
  std::uint64_t sweep_seed = 1;
  int sweep_subject = 1;
  int sweep_n = 60;
  int sweep_obs = 300;
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
  sweep_cmd->add_option("--profile", sweep_auth, "Authenticator profile");
  sweep_cmd->add_option("--client", sweep_client, "Client profile");
  sweep_cmd->add_option("--seed", sweep_seed, "Scenario seed");
  sweep_cmd->add_option("--subject", sweep_subject, "User-study subject (1-3)");
  sweep_cmd->add_option("--n", sweep_n, "Probe repetitions per call");
  sweep_cmd->add_option("--observations", sweep_obs, "Observations per class per configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      fidosim::Scenario scenario = fidosim::load_scenario(scenario_path);
      if (auto seed = seed_override_from_env()) scenario.seed = *seed;
      fidosim::ExperimentReport report;
      try {
        report = fidosim::run_scenario(scenario);
      } catch (const fidosim::ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        std::fprintf(stderr, "scenario failed: %s\n", e.what());
        return 1;
      }
      auto written = fidosim::emit_report(report, out_dir);
      print_report_summary(report);
      for (const auto& path : written) std::printf("wrote %s\n", path.string().c_str());
      if (dump_wire) {
        // One probe pair over the wire so the frames can be inspected.
        auto profile = fidosim::resolve_authenticator_profile(scenario.authenticator_profile);
        fidosim::Rng rng(scenario.seed);
        fidosim::Authenticator device(profile, rng.fork("dump-device"));
        auto cred = std::get<fidosim::MakeCredentialResult>(device.make_credential("demo.example"));
        fidosim::SimClock clock;
        fidosim::PresenceStream presence;
        fidosim::wire::GetAssertionRequest req;
        req.rp_id = "demo.example";
        rng.fill(req.client_data_hash);
        req.allow_list.push_back(fidosim::wire::CredentialDescriptor{cred.key_handle});
        req.user_presence = false;
        auto frame = fidosim::wire::encode_get_assertion(req);
        auto tap = make_wire_tap();
        tap(true, frame);
        auto reply = device.handle_frame(frame, clock, presence);
        tap(false, reply);
      }
      return 0;
    }

    if (*cal_cmd) {
      auto base = fidosim::resolve_authenticator_profile(cal_profile);
      double verified = 0.0;
      fidosim::AuthenticatorProfile calibrated;
      try {
        calibrated = fidosim::calibrate(base, cal_delta_us, cal_tolerance, 10000, cal_seed,
                                        &verified);
      } catch (const fidosim::ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        std::fprintf(stderr, "calibration failed: %s\n", e.what());
        return 1;
      }
      std::printf("calibrated %s: target=%.3f us verified=%.3f us\n", base.name.c_str(),
                  cal_delta_us, verified);
      std::string serialized = fidosim::serialize_authenticator_profile(calibrated);
      if (!cal_out.empty()) {
        std::ofstream out(cal_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + cal_out);
        out << serialized;
        std::printf("wrote %s\n", cal_out.c_str());
      } else {
        std::fputs(serialized.c_str(), stdout);
      }
      return 0;
    }

    if (*sweep_cmd) {
      fidosim::Scenario scenario;
      scenario.name = "mitigation_sweep";
      scenario.mode = fidosim::ScenarioMode::kMitigationSweep;
      scenario.seed = sweep_seed;
      scenario.authenticator_profile = sweep_auth;
      scenario.client_profile = sweep_client;
      scenario.user_subject = sweep_subject;
      scenario.n_values = {sweep_n};
      scenario.trials = sweep_obs;
      if (auto seed = seed_override_from_env()) scenario.seed = *seed;
      fidosim::ExperimentReport report;
      try {
        report = fidosim::run_scenario(scenario);
      } catch (const fidosim::ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep failed: %s\n", e.what());
        return 1;
      }
      auto written = fidosim::emit_report(report, sweep_out);
      print_report_summary(report);
      for (const auto& path : written) std::printf("wrote %s\n", path.string().c_str());
      return 0;
    }
  } catch (const fidosim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
