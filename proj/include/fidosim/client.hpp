#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fidosim/authenticator.hpp"
#include "fidosim/bytes.hpp"
#include "fidosim/rng.hpp"
#include "fidosim/sim_clock.hpp"
#include "fidosim/wire.hpp"

namespace fidosim {

/// allowCredential handling rules for one client/platform.
struct ClientProfile {
  std::string name = "custom";
  std::optional<std::size_t> max_allow_list;  // truncate past this many entries
  bool silent_filtering = true;
  bool dedup_before_ctap = false;
  std::optional<std::pair<double, double>> random_error_delay_range_us;
  std::optional<std::size_t> crash_threshold;  // abort the call at this list size

  void validate() const {
    if (max_allow_list && *max_allow_list < 1) {
      throw std::invalid_argument("client profile '" + name + "': max_allow_list must be >= 1");
    }
    if (crash_threshold && *crash_threshold < 1) {
      throw std::invalid_argument("client profile '" + name + "': crash_threshold must be >= 1");
    }
    if (random_error_delay_range_us &&
        (random_error_delay_range_us->first < 0 ||
         random_error_delay_range_us->second < random_error_delay_range_us->first)) {
      throw std::invalid_argument("client profile '" + name + "': bad random_error_delay_range");
    }
  }
};

/// Time-to-touch distributions, truncated normal at >= 0. The primed
/// distribution models a user who just completed a presence check.
struct UserPresenceModel {
  double unprimed_mean_us = 0.0;
  double unprimed_std_us = 0.0;
  double primed_mean_us = 0.0;
  double primed_std_us = 0.0;

  void validate() const {
    if (unprimed_mean_us <= 0 || primed_mean_us <= 0 || unprimed_std_us < 0 || primed_std_us < 0) {
      throw std::invalid_argument("user presence model: means > 0 and stds >= 0 required");
    }
  }
};

inline double sample_presence(const UserPresenceModel& user, bool primed, Rng& rng) {
  double mean = primed ? user.primed_mean_us : user.unprimed_mean_us;
  double std = primed ? user.primed_std_us : user.unprimed_std_us;
  return rng.truncated_normal_nonneg(mean, std);
}

/// Stable first-occurrence-preserving dedup by exact byte equality.
inline std::vector<Bytes> deduplicate(const std::vector<Bytes>& allow_list) {
  std::vector<Bytes> out;
  out.reserve(allow_list.size());
  for (const auto& handle : allow_list) {
    bool seen = false;
    for (const auto& kept : out) {
      if (kept == handle) {
        seen = true;
        break;
      }
    }
    if (!seen) out.push_back(handle);
  }
  return out;
}

enum class CallOutcome { kOk, kError, kCrash };

inline const char* call_outcome_name(CallOutcome o) {
  switch (o) {
    case CallOutcome::kOk: return "OK";
    case CallOutcome::kError: return "ERROR";
    case CallOutcome::kCrash: return "CRASH";
  }
  return "unknown";
}

/// One WebAuthn-level get() as the adversary observes it. silent_probe_count
/// counts failed silent probes, i.e. the 0-based index of the first matching
/// handle when a match exists.
struct WebAuthnCallResult {
  CallOutcome outcome = CallOutcome::kError;
  double elapsed_us = 0.0;
  int presence_events = 0;
  int silent_probe_count = 0;
  double press_at_us = 0.0;  // button press, relative to call start
  std::optional<wire::GetAssertionResponse> response;
  wire::CtapError error = wire::CtapError::kNoCredentials;
};

/// FIDO client (browser/platform): translates a WebAuthn get() into CTAP
/// frames, filtering the allow list with silent authentications and applying
/// the profile's mitigations. All traffic to the authenticator is serialized
/// frames.
///
/// Presence timing model: one user action per call. The primed/unprimed
/// delay is charged when the call starts (the user reaches for the token as
/// soon as the prompt appears) and all CTAP processing follows it, which is
/// what makes the press timestamp a clean anchor for post-press timing.
class Client {
 public:
  using WireTap = std::function<void(bool to_authenticator, std::span<const std::uint8_t>)>;

  Client(ClientProfile profile, UserPresenceModel user, Rng rng)
      : profile_(std::move(profile)), user_(user), rng_(std::move(rng)) {
    profile_.validate();
    user_.validate();
  }

  const ClientProfile& profile() const { return profile_; }

  void set_wire_tap(WireTap tap) { tap_ = std::move(tap); }

  WebAuthnCallResult credentials_get(const std::vector<Bytes>& allow_list,
                                     const std::string& rp_id, Authenticator& authenticator,
                                     bool primed, SimClock& clock) {
    if (allow_list.empty()) throw std::invalid_argument("credentials_get: allow_list is empty");
    if (rp_id.empty()) throw std::invalid_argument("credentials_get: rp_id is empty");

    const double start_us = clock.now_us();
    WebAuthnCallResult result;

    std::vector<Bytes> list = profile_.dedup_before_ctap ? deduplicate(allow_list) : allow_list;
    if (profile_.crash_threshold && list.size() >= *profile_.crash_threshold) {
      result.outcome = CallOutcome::kCrash;
      return result;
    }
    if (profile_.max_allow_list && list.size() > *profile_.max_allow_list) {
      list.resize(*profile_.max_allow_list);
    }

    double press_delay = sample_presence(user_, primed, rng_);
    clock.advance(press_delay);
    result.press_at_us = press_delay;

    std::array<std::uint8_t, 32> challenge_hash{};
    rng_.fill(challenge_hash);

    std::optional<Bytes> found;
    if (list.size() > 1 && profile_.silent_filtering) {
      for (const auto& handle : list) {
        auto reply = exchange(make_request(rp_id, challenge_hash, {handle}, false), authenticator,
                              clock, nullptr);
        if (!wire::is_error(reply)) {
          found = handle;
          break;
        }
        ++result.silent_probe_count;
        if (profile_.random_error_delay_range_us) {
          clock.advance(rng_.uniform(profile_.random_error_delay_range_us->first,
                                     profile_.random_error_delay_range_us->second));
        }
      }
      if (!found) {
        result.outcome = CallOutcome::kError;
        result.error = wire::CtapError::kNoCredentials;
        result.elapsed_us = clock.now_us() - start_us;
        return result;
      }
    }

    // Final assertion: the found handle when filtering ran, otherwise the
    // whole (possibly single-element) list in one CTAP call.
    std::vector<Bytes> final_list = found ? std::vector<Bytes>{*found} : list;
    PresenceStream presence;
    presence.push(PresenceEvent{});
    auto reply =
        exchange(make_request(rp_id, challenge_hash, final_list, true), authenticator, clock,
                 &presence);
    result.elapsed_us = clock.now_us() - start_us;
    if (wire::is_error(reply)) {
      result.outcome = CallOutcome::kError;
      result.error = std::get<wire::CtapError>(reply);
      return result;
    }
    result.outcome = CallOutcome::kOk;
    result.presence_events = 1;
    result.response = std::get<wire::GetAssertionResponse>(reply);
    return result;
  }

 private:
  static wire::GetAssertionRequest make_request(const std::string& rp_id,
                                                const std::array<std::uint8_t, 32>& challenge_hash,
                                                const std::vector<Bytes>& handles, bool up) {
    wire::GetAssertionRequest req;
    req.rp_id = rp_id;
    req.client_data_hash = challenge_hash;
    req.allow_list.reserve(handles.size());
    for (const auto& h : handles) req.allow_list.push_back(wire::CredentialDescriptor{h});
    req.user_presence = up;
    return req;
  }

  wire::Decoded<wire::GetAssertionResponse> exchange(const wire::GetAssertionRequest& req,
                                                     Authenticator& authenticator, SimClock& clock,
                                                     PresenceStream* presence) {
    Bytes frame = wire::encode_get_assertion(req);
    if (tap_) tap_(true, frame);
    PresenceStream empty;
    Bytes reply = authenticator.handle_frame(frame, clock, presence ? *presence : empty);
    if (tap_) tap_(false, reply);
    return wire::decode_response(reply);
  }

  ClientProfile profile_;
  UserPresenceModel user_;
  Rng rng_;
  WireTap tap_;
};

}  // namespace fidosim
