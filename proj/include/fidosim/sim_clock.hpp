#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>

namespace fidosim {

/// Simulated time in microseconds since scenario start. Advances only through
/// explicit cost charges; never reads wall-clock time.
class SimClock {
 public:
  double now_us() const { return now_us_; }

  void advance(double us) {
    if (us < 0.0) throw std::invalid_argument("SimClock: negative advance");
    now_us_ += us;
  }

 private:
  double now_us_ = 0.0;
};

/// One user-presence action supplied by the client for an assertion.
struct PresenceEvent {
  bool abort = false;
};

/// Queue of user-presence events a client hands to the authenticator for a
/// single WebAuthn call. The press timing itself is charged client-side; the
/// authenticator only consumes events.
class PresenceStream {
 public:
  PresenceStream() = default;

  void push(PresenceEvent ev) { events_.push_back(ev); }

  std::optional<PresenceEvent> pop() {
    if (events_.empty()) return std::nullopt;
    PresenceEvent ev = events_.front();
    events_.pop_front();
    return ev;
  }

  std::size_t pending() const { return events_.size(); }

 private:
  std::deque<PresenceEvent> events_;
};

}  // namespace fidosim
