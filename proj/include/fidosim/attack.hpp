#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fidosim/authenticator.hpp"
#include "fidosim/client.hpp"
#include "fidosim/rng.hpp"

namespace fidosim {

enum class ProbeFiller { kRandom, kCandidate };

inline const char* filler_name(ProbeFiller f) {
  return f == ProbeFiller::kRandom ? "random_fill" : "candidate_fill";
}

/// One probe list: n filler handles followed by the anchor (the handle valid
/// for the adversary's own service). The anchor is last so every filler is
/// checked before the call succeeds.
struct ProbePlan {
  int repetitions = 1;  // n
  ProbeFiller filler = ProbeFiller::kRandom;
  Bytes candidate;  // key handle under test
  Bytes anchor;     // valid for the adversary's service

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("ProbePlan: n must be >= 1");
    if (anchor.empty()) throw std::invalid_argument("ProbePlan: anchor required");
    if (filler == ProbeFiller::kCandidate && candidate.empty()) {
      throw std::invalid_argument("ProbePlan: candidate required for candidate fill");
    }
  }
};

/// RANDOM fill draws n fresh handles of the given length; CANDIDATE fill
/// repeats the candidate n times. Total list length is n + 1.
inline std::vector<Bytes> build_probe_list(const ProbePlan& plan, Rng& rng,
                                           std::size_t handle_length) {
  plan.validate();
  std::vector<Bytes> list;
  list.reserve(static_cast<std::size_t>(plan.repetitions) + 1);
  for (int i = 0; i < plan.repetitions; ++i) {
    list.push_back(plan.filler == ProbeFiller::kRandom ? rng.bytes(handle_length)
                                                       : plan.candidate);
  }
  list.push_back(plan.anchor);
  return list;
}

/// One measured WebAuthn call.
struct AttackObservation {
  ProbeFiller filler = ProbeFiller::kRandom;
  int repetitions = 0;
  CallOutcome outcome = CallOutcome::kError;
  double elapsed_us = 0.0;
  double true_press_us = 0.0;                 // simulated button-press time, call-relative
  std::optional<double> presence_onset_us;    // audio-oracle estimate of the press
  bool audible = false;
  int silent_probes = 0;

  /// Post-onset time when the audio oracle is attached, raw elapsed otherwise.
  double effective_elapsed_us() const {
    return presence_onset_us ? elapsed_us - *presence_onset_us : elapsed_us;
  }
};

inline AttackObservation observation_from_call(const WebAuthnCallResult& call, ProbeFiller filler,
                                               int repetitions, bool audible) {
  AttackObservation obs;
  obs.filler = filler;
  obs.repetitions = repetitions;
  obs.outcome = call.outcome;
  obs.elapsed_us = call.elapsed_us;
  obs.true_press_us = call.press_at_us;
  obs.audible = audible;
  obs.silent_probes = call.silent_probe_count;
  return obs;
}

struct AttackRun {
  std::vector<AttackObservation> baseline;  // t_e: random fill
  std::vector<AttackObservation> probe;     // t_d: candidate fill
  int discarded = 0;                        // failed calls dropped from both sets
};

/// Drives the attack through the victim's client: one priming transaction
/// (unprimed presence, measurement discarded), then alternating baseline and
/// probe transactions with primed presence. Observations from failed calls
/// are discarded.
inline AttackRun run_attack(const Bytes& candidate, const Bytes& anchor, int n, int trials,
                            const ClientProfile& client_profile, Authenticator& authenticator,
                            const UserPresenceModel& user, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("run_attack: trials must be >= 1");
  Client client(client_profile, user, rng.fork("client"));
  Rng list_rng = rng.fork("probe-lists");
  SimClock clock;
  const std::size_t handle_len = scheme_handle_length(authenticator.profile().scheme);
  const std::string rp_id = "adversary.example";

  AttackRun run;
  auto execute = [&](ProbeFiller filler, bool primed) -> std::optional<AttackObservation> {
    ProbePlan plan{n, filler, candidate, anchor};
    auto list = build_probe_list(plan, list_rng, handle_len);
    WebAuthnCallResult call = client.credentials_get(list, rp_id, authenticator, primed, clock);
    if (call.outcome != CallOutcome::kOk) {
      ++run.discarded;
      return std::nullopt;
    }
    return observation_from_call(call, filler, n, authenticator.profile().audible_button);
  };

  execute(ProbeFiller::kRandom, /*primed=*/false);  // priming transaction
  run.discarded = 0;
  for (int t = 0; t < trials; ++t) {
    if (auto obs = execute(ProbeFiller::kRandom, true)) run.baseline.push_back(*obs);
    if (auto obs = execute(ProbeFiller::kCandidate, true)) run.probe.push_back(*obs);
  }
  return run;
}

/// Simple threshold classifier: fit on the first 70% of each class (trial
/// order), threshold at the midpoint of the training class means. elapsed >=
/// threshold classifies as candidate-present.
struct ThresholdClassifier {
  double threshold_us = 0.0;
  double train_fraction = 0.7;
  double mean_baseline_train_us = 0.0;
  double mean_probe_train_us = 0.0;

  bool classify_present(double effective_elapsed_us) const {
    return effective_elapsed_us >= threshold_us;
  }
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline std::vector<double> effective_values(const std::vector<AttackObservation>& obs) {
  std::vector<double> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.push_back(o.effective_elapsed_us());
  return out;
}

}  // namespace detail

inline ThresholdClassifier fit_threshold(const std::vector<AttackObservation>& baseline,
                                         const std::vector<AttackObservation>& probe,
                                         double train_fraction = 0.7) {
  if (baseline.size() < 10 || probe.size() < 10) {
    throw std::invalid_argument("fit_threshold: need >= 10 observations per class");
  }
  auto e = detail::effective_values(baseline);
  auto d = detail::effective_values(probe);
  auto train_count = [&](std::size_t total) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                        static_cast<double>(total) * train_fraction)));
  };
  std::vector<double> e_train(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(train_count(e.size())));
  std::vector<double> d_train(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(train_count(d.size())));
  double mean_e = detail::mean_of(e_train);
  double mean_d = detail::mean_of(d_train);
  if (!std::isfinite(mean_e) || !std::isfinite(mean_d)) {
    throw std::invalid_argument("fit_threshold: class means are not finite");
  }
  ThresholdClassifier clf;
  clf.train_fraction = train_fraction;
  clf.mean_baseline_train_us = mean_e;
  clf.mean_probe_train_us = mean_d;
  clf.threshold_us = (mean_e + mean_d) / 2.0;
  return clf;
}

/// Misclassification rate on the held-out 30% of each class.
inline double test_error(const ThresholdClassifier& clf,
                         const std::vector<AttackObservation>& baseline,
                         const std::vector<AttackObservation>& probe) {
  auto e = detail::effective_values(baseline);
  auto d = detail::effective_values(probe);
  auto train_count = [&](std::size_t total) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                        static_cast<double>(total) * clf.train_fraction)));
  };
  std::size_t wrong = 0;
  std::size_t total = 0;
  for (std::size_t i = train_count(e.size()); i < e.size(); ++i, ++total) {
    if (clf.classify_present(e[i])) ++wrong;
  }
  for (std::size_t i = train_count(d.size()); i < d.size(); ++i, ++total) {
    if (!clf.classify_present(d[i])) ++wrong;
  }
  if (total == 0) throw std::invalid_argument("test_error: empty test split");
  return static_cast<double>(wrong) / static_cast<double>(total);
}

/// Adds the audio-oracle press timestamp: the true press time plus Gaussian
/// estimation error. Refuses when the token has no audible button.
inline AttackObservation attach_audio_oracle(AttackObservation obs, double onset_error_std_us,
                                             Rng& rng) {
  if (!obs.audible) {
    throw std::invalid_argument("attach_audio_oracle: authenticator has no audible button");
  }
  obs.presence_onset_us = obs.true_press_us + rng.normal(0.0, onset_error_std_us);
  return obs;
}

struct LinkVerdict {
  bool linked = false;
  double t_e_mean_us = 0.0;
  double t_d_mean_us = 0.0;
  double margin_us = 0.0;
  int votes_present = 0;
  int votes_total = 0;
};

/// Majority vote of per-observation classifications; ties resolve to
/// not-linked (strict majority required).
inline LinkVerdict decide_link(const ThresholdClassifier& clf,
                               const std::vector<AttackObservation>& probe) {
  LinkVerdict verdict;
  verdict.t_e_mean_us = clf.mean_baseline_train_us;
  verdict.votes_total = static_cast<int>(probe.size());
  std::vector<double> values = detail::effective_values(probe);
  for (double v : values) {
    if (clf.classify_present(v)) ++verdict.votes_present;
  }
  verdict.t_d_mean_us = values.empty() ? 0.0 : detail::mean_of(values);
  verdict.linked = 2 * verdict.votes_present > verdict.votes_total;
  verdict.margin_us = std::abs(verdict.t_d_mean_us - clf.threshold_us);
  return verdict;
}

}  // namespace fidosim
