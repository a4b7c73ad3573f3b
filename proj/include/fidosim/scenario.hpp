#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fidosim/attack.hpp"
#include "fidosim/report.hpp"

namespace fidosim {

enum class ScenarioMode { kBaseline, kAttack, kMitigationSweep, kCalibrate, kAudio };

inline const char* mode_name(ScenarioMode m) {
  switch (m) {
    case ScenarioMode::kBaseline: return "baseline";
    case ScenarioMode::kAttack: return "attack";
    case ScenarioMode::kMitigationSweep: return "mitigation_sweep";
    case ScenarioMode::kCalibrate: return "calibrate";
    case ScenarioMode::kAudio: return "audio";
  }
  return "unknown";
}

inline std::optional<ScenarioMode> mode_from_name(const std::string& name) {
  if (name == "baseline") return ScenarioMode::kBaseline;
  if (name == "attack") return ScenarioMode::kAttack;
  if (name == "mitigation_sweep") return ScenarioMode::kMitigationSweep;
  if (name == "calibrate") return ScenarioMode::kCalibrate;
  if (name == "audio") return ScenarioMode::kAudio;
  return std::nullopt;
}

/// One experiment configuration. Meaning of `trials` by mode:
///   baseline          probe pairs (one random + one wrong-origin each)
///   attack / audio    independent attack runs (one verdict each)
///   mitigation_sweep  observations per class per configuration
///   calibrate         silent probes per class for verification
/// `observations` is the per-class observation count inside one attack run.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  ScenarioMode mode = ScenarioMode::kBaseline;
  std::string authenticator_profile = "hyperfido";
  std::string client_profile = "chromium_unpatched";
  int user_subject = 1;
  std::vector<int> n_values{60};
  int trials = 100;
  int observations = 15;
  double onset_error_std_us = 1000.0;
  bool candidate_linked = true;
  double target_delta_us = -1.0;  // calibrate mode; -1 = profile's configured delta
  double tolerance = 0.05;

  void validate() const {
    if (trials < 1) throw ConfigError("scenario '" + name + "': trials must be >= 1");
    if (observations < 1) throw ConfigError("scenario '" + name + "': observations must be >= 1");
    if (n_values.empty()) throw ConfigError("scenario '" + name + "': n required");
    for (int n : n_values) {
      if (n < 1) throw ConfigError("scenario '" + name + "': n values must be >= 1");
    }
    if (user_subject < 1 || user_subject > 3) {
      throw ConfigError("scenario '" + name + "': user_subject must be 1, 2 or 3");
    }
  }
};

inline Scenario parse_scenario(const std::string& text, const std::string& context) {
  auto kv = detail::parse_key_values(text, context);
  Scenario s;
  for (const auto& [key, value] : kv) {
    std::string ctx = context + ": " + key;
    if (key == "name") {
      s.name = value;
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(detail::parse_long(value, ctx));
    } else if (key == "mode") {
      auto m = mode_from_name(value);
      if (!m) throw ConfigError(ctx + ": unknown mode '" + value + "'");
      s.mode = *m;
    } else if (key == "authenticator_profile") {
      s.authenticator_profile = value;
    } else if (key == "client_profile") {
      s.client_profile = value;
    } else if (key == "user_subject") {
      s.user_subject = static_cast<int>(detail::parse_long(value, ctx));
    } else if (key == "n") {
      s.n_values.clear();
      std::string item;
      std::istringstream list(value);
      while (std::getline(list, item, ',')) {
        s.n_values.push_back(static_cast<int>(detail::parse_long(item, ctx)));
      }
    } else if (key == "trials") {
      s.trials = static_cast<int>(detail::parse_long(value, ctx));
    } else if (key == "observations") {
      s.observations = static_cast<int>(detail::parse_long(value, ctx));
    } else if (key == "onset_error_std_us") {
      s.onset_error_std_us = detail::parse_double(value, ctx);
    } else if (key == "candidate") {
      if (value == "linked") {
        s.candidate_linked = true;
      } else if (value == "foreign") {
        s.candidate_linked = false;
      } else {
        throw ConfigError(ctx + ": expected linked or foreign");
      }
    } else if (key == "target_delta_us") {
      s.target_delta_us = detail::parse_double(value, ctx);
    } else if (key == "tolerance") {
      s.tolerance = detail::parse_double(value, ctx);
    } else {
      throw ConfigError(ctx + ": unknown key");
    }
  }
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  return parse_scenario(detail::read_file(path), path);
}

namespace detail {

inline const std::string kAdversaryRp = "adversary.example";
inline const std::string kTargetRp = "target-service.example";

struct ProbeStats {
  double mean_random_us = 0.0;
  double mean_wrong_origin_us = 0.0;
  double delta_us() const { return mean_wrong_origin_us - mean_random_us; }
};

/// Direct silent probes at the CTAP layer, one handle per call, alternating a
/// fresh random handle and a wrong-origin handle (a credential of the same
/// device registered for another service). This is the per-probe scatter the
/// baseline mode reports.
inline ProbeStats run_silent_probes(const AuthenticatorProfile& profile, int pairs, Rng& rng,
                                    std::vector<AttackObservation>* random_obs = nullptr,
                                    std::vector<AttackObservation>* wrong_origin_obs = nullptr) {
  Authenticator authenticator(profile, rng.fork("device"));
  auto wrong_origin = authenticator.make_credential(kTargetRp);
  if (std::holds_alternative<MakeCredentialError>(wrong_origin)) {
    throw std::runtime_error("run_silent_probes: registration failed");
  }
  Bytes wrong_origin_handle = std::get<MakeCredentialResult>(wrong_origin).key_handle;
  Rng handle_rng = rng.fork("handles");
  Rng challenge_rng = rng.fork("challenges");
  const std::size_t handle_len = scheme_handle_length(profile.scheme);

  SimClock clock;
  PresenceStream no_presence;
  double sum_random = 0.0;
  double sum_wrong = 0.0;
  auto probe = [&](const Bytes& handle) {
    wire::GetAssertionRequest req;
    req.rp_id = kAdversaryRp;
    challenge_rng.fill(req.client_data_hash);
    req.allow_list.push_back(wire::CredentialDescriptor{handle});
    req.user_presence = false;
    double before = clock.now_us();
    authenticator.handle_frame(wire::encode_get_assertion(req), clock, no_presence);
    return clock.now_us() - before;
  };

  for (int i = 0; i < pairs; ++i) {
    double t_random = probe(handle_rng.bytes(handle_len));
    double t_wrong = probe(wrong_origin_handle);
    sum_random += t_random;
    sum_wrong += t_wrong;
    if (random_obs) {
      random_obs->push_back(
          {ProbeFiller::kRandom, 1, CallOutcome::kError, t_random, 0.0, std::nullopt, false});
    }
    if (wrong_origin_obs) {
      wrong_origin_obs->push_back(
          {ProbeFiller::kCandidate, 1, CallOutcome::kError, t_wrong, 0.0, std::nullopt, false});
    }
  }
  return {sum_random / pairs, sum_wrong / pairs};
}

struct PreparedAttack {
  Authenticator victim;
  Bytes anchor;
  Bytes candidate;
};

/// Victim device holding the adversary-service anchor plus a second-service
/// credential; candidate is that credential (linked) or the equivalent handle
/// from a different device (foreign).
inline PreparedAttack prepare_attack(const AuthenticatorProfile& profile, bool linked, Rng& rng) {
  Authenticator victim(profile, rng.fork("victim-device"));
  auto anchor = std::get<MakeCredentialResult>(victim.make_credential(kAdversaryRp));
  auto linked_cred = std::get<MakeCredentialResult>(victim.make_credential(kTargetRp));
  Bytes candidate;
  if (linked) {
    candidate = linked_cred.key_handle;
  } else {
    Authenticator other(profile, rng.fork("other-device"));
    candidate = std::get<MakeCredentialResult>(other.make_credential(kTargetRp)).key_handle;
  }
  return {std::move(victim), anchor.key_handle, candidate};
}

}  // namespace detail

/// Scales the decrypt + origin-compare costs so their sum hits target_delta,
/// then verifies with `probes` simulated silent probes per class. Throws when
/// the verified delta misses the tolerance.
inline AuthenticatorProfile calibrate(const AuthenticatorProfile& base, double target_delta_us,
                                      double tolerance = 0.05, int probes = 10000,
                                      std::uint64_t seed = 1,
                                      double* verified_delta_us = nullptr) {
  if (target_delta_us < 0) throw ConfigError("calibrate: target delta must be >= 0");
  AuthenticatorProfile p = base;
  double current = p.timing_delta_us();
  if (current > 0) {
    double factor = target_delta_us / current;
    p.cost_aes_decrypt_us *= factor;
    p.cost_origin_compare_us *= factor;
  } else {
    p.cost_aes_decrypt_us = target_delta_us;
    p.cost_origin_compare_us = 0;
  }

  Rng rng(seed);
  auto stats = detail::run_silent_probes(p, probes / 2, rng);
  double delta = stats.delta_us();
  if (verified_delta_us) *verified_delta_us = delta;
  // Statistical floor keeps a zero target verifiable under jitter noise.
  double floor = 8.0 * p.jitter_std_us / std::sqrt(static_cast<double>(probes / 2));
  double allowed = std::max(tolerance * target_delta_us, floor);
  if (std::abs(delta - target_delta_us) > allowed) {
    throw std::runtime_error("calibrate: verified delta " + std::to_string(delta) +
                             " us misses target " + std::to_string(target_delta_us) + " us (±" +
                             std::to_string(allowed) + ")");
  }
  return p;
}

/// Per-run attack outcome used by attack/audio/sweep modes.
struct AttackRunSummary {
  double mean_te_us = 0.0;
  double mean_td_us = 0.0;
  double error_rate = 0.5;
  bool linked = false;
  double margin_us = 0.0;
  bool feasible = true;
  int valid_baseline = 0;
  int valid_probe = 0;
  std::vector<AttackObservation> baseline;
  std::vector<AttackObservation> probe;
};

/// One full attack: observations, classifier fit, per-observation test error,
/// majority-vote verdict. Runs with too few valid observations report
/// chance-level error and no link.
inline AttackRunSummary execute_attack_run(const AuthenticatorProfile& auth_profile,
                                           const ClientProfile& client_profile,
                                           const UserPresenceModel& user, int n, int observations,
                                           bool linked_candidate, bool audio,
                                           double onset_error_std_us, Rng& rng) {
  auto prepared = detail::prepare_attack(auth_profile, linked_candidate, rng);
  Rng attack_rng = rng.fork("attack");
  AttackRun run = run_attack(prepared.candidate, prepared.anchor, n, observations, client_profile,
                             prepared.victim, user, attack_rng);
  if (audio) {
    Rng audio_rng = rng.fork("audio-oracle");
    for (auto& obs : run.baseline) obs = attach_audio_oracle(obs, onset_error_std_us, audio_rng);
    for (auto& obs : run.probe) obs = attach_audio_oracle(obs, onset_error_std_us, audio_rng);
  }
  AttackRunSummary summary;
  summary.valid_baseline = static_cast<int>(run.baseline.size());
  summary.valid_probe = static_cast<int>(run.probe.size());
  summary.baseline = std::move(run.baseline);
  summary.probe = std::move(run.probe);
  if (summary.baseline.size() < 10 || summary.probe.size() < 10) {
    summary.feasible = false;
    return summary;
  }
  auto clf = fit_threshold(summary.baseline, summary.probe);
  summary.error_rate = test_error(clf, summary.baseline, summary.probe);
  auto verdict = decide_link(clf, summary.probe);
  summary.linked = verdict.linked;
  summary.margin_us = verdict.margin_us;
  summary.mean_te_us = detail::mean_of(detail::effective_values(summary.baseline));
  summary.mean_td_us = verdict.t_d_mean_us;
  return summary;
}

namespace detail {

inline void run_baseline_mode(const Scenario& s, const AuthenticatorProfile& profile, Rng& rng,
                              ExperimentReport& report) {
  std::vector<AttackObservation> random_obs;
  std::vector<AttackObservation> wrong_obs;
  auto stats = run_silent_probes(profile, s.trials, rng, &random_obs, &wrong_obs);

  for (int i = 0; i < s.trials; ++i) {
    report.rows.push_back({report.scenario_id, i, "random", 1, "NO_CREDENTIALS",
                           random_obs[static_cast<std::size_t>(i)].elapsed_us, 1, 0.0});
    report.rows.push_back({report.scenario_id, i, "wrong_origin", 1, "NO_CREDENTIALS",
                           wrong_obs[static_cast<std::size_t>(i)].elapsed_us, 1, 0.0});
  }

  double error = 0.5;
  if (random_obs.size() >= 10) {
    auto clf = fit_threshold(random_obs, wrong_obs);
    error = test_error(clf, random_obs, wrong_obs);
  }
  report.summary.push_back({scheme_name(profile.scheme), 1, s.trials, stats.mean_random_us,
                            stats.mean_wrong_origin_us, error});

  auto& random_curve = report.curves["scatter_random"];
  auto& wrong_curve = report.curves["scatter_wrong_origin"];
  for (std::size_t i = 0; i < random_obs.size(); ++i) {
    random_curve.emplace_back(static_cast<double>(i), random_obs[i].elapsed_us);
    wrong_curve.emplace_back(static_cast<double>(i), wrong_obs[i].elapsed_us);
  }
}

inline void run_attack_mode(const Scenario& s, const AuthenticatorProfile& auth_profile,
                            const ClientProfile& client_profile, bool audio, Rng& rng,
                            ExperimentReport& report) {
  const UserPresenceModel user = user_subject(s.user_subject);
  auto& curve = report.curves["error_vs_n"];
  for (int n : s.n_values) {
    double error_sum = 0.0;
    double margin_sum = 0.0;
    double te_sum = 0.0;
    double td_sum = 0.0;
    int linked_count = 0;
    for (int t = 0; t < s.trials; ++t) {
      Rng run_rng = rng.fork("run");
      auto summary =
          execute_attack_run(auth_profile, client_profile, user, n, s.observations,
                             s.candidate_linked, audio, s.onset_error_std_us, run_rng);
      error_sum += summary.error_rate;
      margin_sum += summary.margin_us;
      te_sum += summary.mean_te_us;
      td_sum += summary.mean_td_us;
      linked_count += summary.linked ? 1 : 0;
      auto emit_rows = [&](const std::vector<AttackObservation>& obs) {
        for (const auto& o : obs) {
          report.rows.push_back({report.scenario_id, t, filler_name(o.filler), n,
                                 call_outcome_name(o.outcome), o.elapsed_us, o.silent_probes,
                                 o.true_press_us});
        }
      };
      emit_rows(summary.baseline);
      emit_rows(summary.probe);
    }
    double mean_error = error_sum / s.trials;
    double linked_rate = static_cast<double>(linked_count) / s.trials;
    report.summary.push_back({scheme_name(auth_profile.scheme), n, s.trials, te_sum / s.trials,
                              td_sum / s.trials, mean_error});
    report.verdicts.push_back({auth_profile.name, scheme_name(auth_profile.scheme), n, s.trials,
                               mean_error, linked_rate >= 0.5, linked_rate,
                               margin_sum / s.trials});
    curve.emplace_back(static_cast<double>(n), mean_error);
  }
}

/// Pooled linked-vs-foreign discrimination: both classes use candidate-filled
/// lists of identical shape, so every mitigation acts on both classes alike.
/// The reported error is the threshold classifier's held-out error separating
/// foreign-candidate calls from linked-candidate calls.
inline AttackRunSummary run_discrimination(const AuthenticatorProfile& auth_profile,
                                           const ClientProfile& client_profile,
                                           const UserPresenceModel& user, int n, int observations,
                                           bool audio, double onset_error_std_us, Rng& rng) {
  auto linked_setup = prepare_attack(auth_profile, true, rng);
  Rng foreign_rng = rng.fork("foreign-handle");
  Authenticator other(auth_profile, foreign_rng.fork("other-device"));
  Bytes foreign = std::get<MakeCredentialResult>(other.make_credential(kTargetRp)).key_handle;

  Rng attack_rng = rng.fork("attack");
  // Foreign-candidate calls form the baseline class, linked-candidate calls
  // the probe class; both ride the same victim device and user model.
  Client client(client_profile, user, attack_rng.fork("client"));
  Rng list_rng = attack_rng.fork("probe-lists");
  SimClock clock;
  const std::size_t handle_len = scheme_handle_length(auth_profile.scheme);

  std::vector<AttackObservation> foreign_obs;
  std::vector<AttackObservation> linked_obs;
  Rng audio_rng = rng.fork("audio-oracle");
  auto run_call = [&](const Bytes& candidate, bool primed) -> std::optional<AttackObservation> {
    ProbePlan plan{n, ProbeFiller::kCandidate, candidate, linked_setup.anchor};
    auto list = build_probe_list(plan, list_rng, handle_len);
    auto call = client.credentials_get(list, kAdversaryRp, linked_setup.victim, primed, clock);
    if (call.outcome != CallOutcome::kOk) return std::nullopt;
    auto obs = observation_from_call(call, ProbeFiller::kCandidate, n, auth_profile.audible_button);
    if (audio) obs = attach_audio_oracle(obs, onset_error_std_us, audio_rng);
    return obs;
  };

  run_call(foreign, /*primed=*/false);  // priming transaction, discarded
  for (int t = 0; t < observations; ++t) {
    if (auto obs = run_call(foreign, true)) foreign_obs.push_back(*obs);
    if (auto obs = run_call(linked_setup.candidate, true)) linked_obs.push_back(*obs);
  }

  AttackRunSummary summary;
  summary.valid_baseline = static_cast<int>(foreign_obs.size());
  summary.valid_probe = static_cast<int>(linked_obs.size());
  if (foreign_obs.size() < 10 || linked_obs.size() < 10) {
    summary.feasible = false;
    return summary;
  }
  auto clf = fit_threshold(foreign_obs, linked_obs);
  summary.error_rate = test_error(clf, foreign_obs, linked_obs);
  auto verdict = decide_link(clf, linked_obs);
  summary.linked = verdict.linked;
  summary.margin_us = verdict.margin_us;
  summary.mean_te_us = mean_of(effective_values(foreign_obs));
  summary.mean_td_us = verdict.t_d_mean_us;
  return summary;
}

struct SweepConfig {
  std::string name;
  AuthenticatorProfile auth;
  ClientProfile client;
  int n = 60;
  bool audio = false;
};

inline std::vector<SweepConfig> sweep_configs(const AuthenticatorProfile& base_auth,
                                              const ClientProfile& base_client, int n) {
  std::vector<SweepConfig> configs;
  auto add = [&](const std::string& name, auto mutate) {
    SweepConfig cfg{name, base_auth, base_client, n, false};
    mutate(cfg);
    configs.push_back(std::move(cfg));
  };
  add("none", [](SweepConfig&) {});
  add("dedup", [](SweepConfig& c) { c.client.dedup_before_ctap = true; });
  add("random_delay", [&](SweepConfig& c) {
    c.client.random_error_delay_range_us = {0.0, 150.0 * base_auth.timing_delta_us()};
  });
  add("list_cap_20", [](SweepConfig& c) { c.client.max_allow_list = 20; });
  add("list_cap_64", [](SweepConfig& c) { c.client.max_allow_list = 64; });
  add("constant_time", [](SweepConfig& c) { c.auth = *authenticator_preset("constant_time"); });
  add("kdf", [](SweepConfig& c) { c.auth = *authenticator_preset("kdf"); });
  add("resident", [](SweepConfig& c) { c.auth = *authenticator_preset("resident"); });
  // Companion row: the list cap stops the multi-handle attack but not the
  // post-press timing channel with a small list.
  add("list_cap_20_audio_n10", [](SweepConfig& c) {
    c.client.max_allow_list = 20;
    c.n = 10;
    c.audio = true;
  });
  return configs;
}

inline void run_sweep_mode(const Scenario& s, const AuthenticatorProfile& auth_profile,
                           const ClientProfile& client_profile, Rng& rng,
                           ExperimentReport& report) {
  const UserPresenceModel user = user_subject(s.user_subject);
  auto configs = sweep_configs(auth_profile, client_profile, s.n_values.front());
  auto& curve = report.curves["error_vs_mitigation"];
  double index = 0.0;
  for (const auto& cfg : configs) {
    Rng cfg_rng = rng.fork("sweep:" + cfg.name);
    auto summary = run_discrimination(cfg.auth, cfg.client, user, cfg.n, s.trials, cfg.audio,
                                      s.onset_error_std_us, cfg_rng);
    report.rows.push_back({report.scenario_id, static_cast<int>(index), cfg.name, cfg.n,
                           summary.feasible ? "evaluated" : "infeasible", summary.mean_td_us,
                           0, 0.0});
    report.summary.push_back({cfg.name, cfg.n, s.trials, summary.mean_te_us, summary.mean_td_us,
                              summary.error_rate});
    report.verdicts.push_back({cfg.name, scheme_name(cfg.auth.scheme), cfg.n, s.trials,
                               summary.error_rate, summary.linked,
                               summary.linked ? 1.0 : 0.0, summary.margin_us});
    curve.emplace_back(index, summary.error_rate);
    index += 1.0;
  }
}

inline void run_calibrate_mode(const Scenario& s, const AuthenticatorProfile& profile, Rng& rng,
                               ExperimentReport& report) {
  double target = s.target_delta_us >= 0 ? s.target_delta_us : profile.timing_delta_us();
  double verified = 0.0;
  calibrate(profile, target, s.tolerance, 2 * s.trials, s.seed, &verified);
  double rel_miss = target > 0 ? std::abs(verified - target) / target : std::abs(verified);
  report.summary.push_back({scheme_name(profile.scheme), 1, s.trials, verified, target, rel_miss});
  (void)rng;
}

}  // namespace detail

/// Runs one scenario deterministically; equal scenarios (including seed)
/// produce byte-identical reports.
inline ExperimentReport run_scenario(const Scenario& s) {
  s.validate();
  auto started = std::chrono::steady_clock::now();

  AuthenticatorProfile auth_profile = resolve_authenticator_profile(s.authenticator_profile);
  ClientProfile client_profile = resolve_client_profile(s.client_profile);
  Rng rng(s.seed);

  ExperimentReport report;
  report.scenario_id = s.name;
  report.seed = s.seed;

  switch (s.mode) {
    case ScenarioMode::kBaseline:
      detail::run_baseline_mode(s, auth_profile, rng, report);
      break;
    case ScenarioMode::kAttack:
      detail::run_attack_mode(s, auth_profile, client_profile, false, rng, report);
      break;
    case ScenarioMode::kAudio:
      if (!auth_profile.audible_button) {
        throw ConfigError("audio mode requires an audible_button profile (got " +
                          auth_profile.name + ")");
      }
      detail::run_attack_mode(s, auth_profile, client_profile, true, rng, report);
      break;
    case ScenarioMode::kMitigationSweep:
      detail::run_sweep_mode(s, auth_profile, client_profile, rng, report);
      break;
    case ScenarioMode::kCalibrate:
      detail::run_calibrate_mode(s, auth_profile, rng, report);
      break;
  }

  report.wall_clock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

}  // namespace fidosim
