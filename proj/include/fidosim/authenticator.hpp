#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "fidosim/bytes.hpp"
#include "fidosim/crypto.hpp"
#include "fidosim/rng.hpp"
#include "fidosim/sim_clock.hpp"
#include "fidosim/wire.hpp"

namespace fidosim {

/// How the device turns a key handle back into a signing key.
enum class KeyScheme {
  kWrapEarlyAbort,    // MAC check first, abort before decrypting on failure
  kWrapConstantTime,  // full pipeline regardless of failure stage
  kKdfDerived,        // handle is a nonce fed to a keyed KDF
  kResident,          // handle is a lookup id for an on-device key
};

inline const char* scheme_name(KeyScheme s) {
  switch (s) {
    case KeyScheme::kWrapEarlyAbort: return "wrap_early_abort";
    case KeyScheme::kWrapConstantTime: return "wrap_constant_time";
    case KeyScheme::kKdfDerived: return "kdf_derived";
    case KeyScheme::kResident: return "resident";
  }
  return "unknown";
}

inline std::optional<KeyScheme> scheme_from_name(std::string_view name) {
  if (name == "wrap_early_abort") return KeyScheme::kWrapEarlyAbort;
  if (name == "wrap_constant_time") return KeyScheme::kWrapConstantTime;
  if (name == "kdf_derived") return KeyScheme::kKdfDerived;
  if (name == "resident") return KeyScheme::kResident;
  return std::nullopt;
}

/// Wrapped handle layout: IV(16) || AES-256-CBC(sk 32 || rp_id_hash 32) (64)
/// || HMAC-SHA256 over the first 80 bytes (32).
inline constexpr std::size_t kWrappedHandleLen = 112;
inline constexpr std::size_t kKdfHandleLen = 32;
inline constexpr std::size_t kResidentHandleLen = 16;

inline std::size_t scheme_handle_length(KeyScheme s) {
  switch (s) {
    case KeyScheme::kWrapEarlyAbort:
    case KeyScheme::kWrapConstantTime:
      return kWrappedHandleLen;
    case KeyScheme::kKdfDerived:
      return kKdfHandleLen;
    case KeyScheme::kResident:
      return kResidentHandleLen;
  }
  return 0;
}

/// Per-device cost model. Costs are the simulated microseconds each internal
/// step charges to the clock; the observable per-call timing difference
/// between a random handle and a wrong-origin handle is
/// cost_aes_decrypt + cost_origin_compare.
struct AuthenticatorProfile {
  std::string name = "custom";
  KeyScheme scheme = KeyScheme::kWrapEarlyAbort;
  double cost_mac_verify_us = 0.0;
  double cost_aes_decrypt_us = 0.0;
  double cost_origin_compare_us = 0.0;
  double cost_kdf_us = 0.0;
  double cost_sign_us = 0.0;
  double jitter_std_us = 0.0;
  std::optional<int> defense_threshold;                         // failed checks before delays kick in
  std::pair<double, double> defense_delay_range_us{0.0, 0.0};   // uniform extra delay per check
  bool audible_button = false;
  int resident_cap = 25;

  double timing_delta_us() const { return cost_aes_decrypt_us + cost_origin_compare_us; }

  void validate() const {
    if (cost_mac_verify_us < 0 || cost_aes_decrypt_us < 0 || cost_origin_compare_us < 0 ||
        cost_kdf_us < 0 || cost_sign_us < 0 || jitter_std_us < 0) {
      throw std::invalid_argument("profile '" + name + "': costs must be >= 0");
    }
    if (defense_threshold && *defense_threshold < 1) {
      throw std::invalid_argument("profile '" + name + "': defense_threshold must be >= 1");
    }
    if (defense_delay_range_us.first < 0 ||
        defense_delay_range_us.second < defense_delay_range_us.first) {
      throw std::invalid_argument("profile '" + name + "': bad defense_delay_range");
    }
    if (resident_cap < 1) throw std::invalid_argument("profile '" + name + "': resident_cap >= 1");
  }
};

/// Device secrets; never cross the authenticator boundary.
struct MasterKeys {
  std::array<std::uint8_t, 32> encryption_key{};
  std::array<std::uint8_t, 32> hmac_key{};
  std::array<std::uint8_t, 32> kdf_secret{};

  static MasterKeys generate(Rng& rng) {
    MasterKeys mk;
    rng.fill(mk.encryption_key);
    rng.fill(mk.hmac_key);
    rng.fill(mk.kdf_secret);
    return mk;
  }
};

struct CredentialRecord {
  std::string rp_id;
  Bytes key_handle;
  Bytes public_key;              // uncompressed P-256 point
  std::uint32_t sign_count = 0;
  Bytes private_key;             // resident scheme only
};

enum class UnwrapFailure {
  kBadLength,   // rejected before the MAC, zero charged cost
  kMac,         // random-handle case
  kOrigin,      // wrong-service case
  kIndistinct,  // constant-time scheme reports one failure for all stages
};

struct UnwrapResult {
  std::optional<std::array<std::uint8_t, 32>> key;
  UnwrapFailure failure = UnwrapFailure::kIndistinct;

  bool ok() const { return key.has_value(); }
};

enum class MakeCredentialError { kStorageFull };

struct MakeCredentialResult {
  Bytes key_handle;
  Bytes public_key;
};

/// Software FIDO2 authenticator with a simulated-cost model. One instance is
/// a single logical device; calls on it are strictly sequential.
class Authenticator {
 public:
  Authenticator(AuthenticatorProfile profile, Rng rng)
      : profile_(std::move(profile)), rng_(std::move(rng)), keys_(MasterKeys::generate(rng_)) {
    profile_.validate();
  }

  /// Device with externally chosen secrets (cross-checking wrap layouts
  /// against other implementations). The keys still never leave the instance.
  Authenticator(AuthenticatorProfile profile, Rng rng, const MasterKeys& keys)
      : profile_(std::move(profile)), rng_(std::move(rng)), keys_(keys) {
    profile_.validate();
  }

  const AuthenticatorProfile& profile() const { return profile_; }
  const std::vector<CredentialRecord>& records() const { return records_; }
  std::uint32_t sign_counter() const { return sign_counter_; }

  std::variant<MakeCredentialResult, MakeCredentialError> make_credential(
      const std::string& rp_id) {
    if (rp_id.empty()) throw std::invalid_argument("make_credential: rp_id must be non-empty");
    auto rp_hash = crypto::sha256(rp_id);
    CredentialRecord record;
    record.rp_id = rp_id;
    switch (profile_.scheme) {
      case KeyScheme::kWrapEarlyAbort:
      case KeyScheme::kWrapConstantTime: {
        auto kp = crypto::p256_generate(rng_);
        record.key_handle = wrap_key(kp.private_key, rp_hash);
        record.public_key = kp.public_key;
        break;
      }
      case KeyScheme::kKdfDerived: {
        record.key_handle = rng_.bytes(kKdfHandleLen);
        auto sk = derive_scalar(record.key_handle, rp_hash);
        record.public_key = crypto::p256_public_from_private(sk);
        break;
      }
      case KeyScheme::kResident: {
        int resident = 0;
        for (const auto& r : records_) resident += r.private_key.empty() ? 0 : 1;
        if (resident >= profile_.resident_cap) return MakeCredentialError::kStorageFull;
        auto kp = crypto::p256_generate(rng_);
        record.key_handle = rng_.bytes(kResidentHandleLen);
        record.public_key = kp.public_key;
        record.private_key.assign(kp.private_key.begin(), kp.private_key.end());
        break;
      }
    }
    records_.push_back(record);
    return MakeCredentialResult{record.key_handle, record.public_key};
  }

  /// Encrypt-then-MAC wrapping with a fresh random IV per call.
  Bytes wrap_key(std::span<const std::uint8_t> private_key,
                 std::span<const std::uint8_t> rp_id_hash) {
    if (private_key.size() != 32 || rp_id_hash.size() != 32) {
      throw std::invalid_argument("wrap_key: inputs must be 32 bytes");
    }
    Bytes iv = rng_.bytes(16);
    Bytes plaintext = concat(private_key, rp_id_hash);
    Bytes ciphertext = crypto::aes256_cbc_encrypt(keys_.encryption_key, iv, plaintext);
    Bytes handle = concat(iv, ciphertext);
    auto mac = crypto::hmac_sha256(keys_.hmac_key, handle);
    append(handle, mac);
    return handle;
  }

  /// Recovers the signing key from a wrapped handle, charging the clock per
  /// the scheme. Early abort: length (free) -> MAC -> decrypt -> origin, and
  /// aborts at the first failing stage. Constant time: charges every stage
  /// regardless and reports an indistinct failure.
  UnwrapResult unwrap_key(std::span<const std::uint8_t> handle,
                          std::span<const std::uint8_t> rp_id_hash, SimClock& clock) {
    if (profile_.scheme != KeyScheme::kWrapEarlyAbort &&
        profile_.scheme != KeyScheme::kWrapConstantTime) {
      throw std::logic_error("unwrap_key: wrong scheme");
    }
    const bool constant_time = profile_.scheme == KeyScheme::kWrapConstantTime;
    if (handle.size() != kWrappedHandleLen) {
      return {std::nullopt, constant_time ? UnwrapFailure::kIndistinct : UnwrapFailure::kBadLength};
    }
    auto body = handle.first(80);
    auto tag = handle.subspan(80, 32);
    auto iv = handle.first(16);
    auto ciphertext = handle.subspan(16, 64);

    if (constant_time) {
      charge(clock, profile_.cost_mac_verify_us);
      charge(clock, profile_.cost_aes_decrypt_us);
      charge(clock, profile_.cost_origin_compare_us);
      bool mac_ok = constant_time_equal(crypto::hmac_sha256(keys_.hmac_key, body), tag);
      Bytes plaintext = crypto::aes256_cbc_decrypt(keys_.encryption_key, iv, ciphertext);
      bool origin_ok =
          constant_time_equal(std::span(plaintext).subspan(32, 32), rp_id_hash);
      if (!mac_ok || !origin_ok) return {std::nullopt, UnwrapFailure::kIndistinct};
      std::array<std::uint8_t, 32> sk{};
      std::copy_n(plaintext.begin(), 32, sk.begin());
      return {sk, UnwrapFailure::kIndistinct};
    }

    charge(clock, profile_.cost_mac_verify_us);
    if (!constant_time_equal(crypto::hmac_sha256(keys_.hmac_key, body), tag)) {
      return {std::nullopt, UnwrapFailure::kMac};
    }
    charge(clock, profile_.cost_aes_decrypt_us);
    Bytes plaintext = crypto::aes256_cbc_decrypt(keys_.encryption_key, iv, ciphertext);
    charge(clock, profile_.cost_origin_compare_us);
    if (!constant_time_equal(std::span(plaintext).subspan(32, 32), rp_id_hash)) {
      return {std::nullopt, UnwrapFailure::kOrigin};
    }
    std::array<std::uint8_t, 32> sk{};
    std::copy_n(plaintext.begin(), 32, sk.begin());
    return {sk, UnwrapFailure::kOrigin};
  }

  /// sk = HMAC-SHA256(kdf_secret, nonce || rp_id_hash) reduced mod the curve
  /// order. Charges cost_kdf exactly, independent of inputs.
  std::array<std::uint8_t, 32> derive_key(std::span<const std::uint8_t> nonce,
                                          std::span<const std::uint8_t> rp_id_hash,
                                          SimClock& clock) {
    if (profile_.scheme != KeyScheme::kKdfDerived) throw std::logic_error("derive_key: wrong scheme");
    charge(clock, profile_.cost_kdf_us);
    return derive_scalar(nonce, rp_id_hash);
  }

  /// CTAP getAssertion. Iterates the allow list in order; the first handle
  /// that checks out is used to sign. Every failed silent probe surfaces as
  /// the same NO_CREDENTIALS error regardless of the internal failure stage;
  /// only the charged time differs.
  std::variant<wire::GetAssertionResponse, wire::CtapError> process_get_assertion(
      const wire::GetAssertionRequest& req, SimClock& clock, PresenceStream& presence) {
    auto rp_hash = crypto::sha256(req.rp_id);

    std::optional<std::array<std::uint8_t, 32>> signing_key;
    CredentialRecord* matched = nullptr;
    Bytes matched_handle;

    if (req.allow_list.empty()) {
      if (profile_.scheme == KeyScheme::kResident) {
        for (auto& record : records_) {
          if (record.rp_id == req.rp_id) {
            matched = &record;
            matched_handle = record.key_handle;
            std::array<std::uint8_t, 32> sk{};
            std::copy_n(record.private_key.begin(), 32, sk.begin());
            signing_key = sk;
            break;
          }
        }
      }
    } else {
      for (const auto& desc : req.allow_list) {
        apply_defense_delay(clock);
        auto check = check_handle(desc.id, req.rp_id, rp_hash, clock);
        if (check.first) {
          consecutive_failures_ = 0;
          signing_key = check.first;
          matched = check.second;
          matched_handle = desc.id;
          break;
        }
        ++consecutive_failures_;
      }
    }

    if (!signing_key) return wire::CtapError::kNoCredentials;

    std::uint8_t flags = 0x00;
    if (req.user_presence) {
      auto event = presence.pop();
      if (!event || event->abort) return wire::CtapError::kOperationDenied;
      flags |= 0x01;
    }

    charge(clock, profile_.cost_sign_us);
    std::uint32_t count = ++sign_counter_;
    if (matched) matched->sign_count = count;

    wire::GetAssertionResponse resp;
    resp.credential.id = matched_handle;
    resp.auth_data = wire::make_auth_data(rp_hash, flags, count);
    Bytes signed_payload = resp.auth_data;
    append(signed_payload, req.client_data_hash);
    resp.signature = crypto::ecdsa_p256_sign(*signing_key, crypto::sha256(signed_payload));
    return resp;
  }

  /// Transport entry point: one serialized CTAP frame in, one frame out.
  Bytes handle_frame(std::span<const std::uint8_t> frame, SimClock& clock,
                     PresenceStream& presence) {
    auto decoded = wire::decode_get_assertion(frame);
    if (wire::is_error(decoded)) return wire::encode_error(std::get<wire::CtapError>(decoded));
    auto result = process_get_assertion(std::get<wire::GetAssertionRequest>(decoded), clock, presence);
    if (std::holds_alternative<wire::CtapError>(result)) {
      return wire::encode_error(std::get<wire::CtapError>(result));
    }
    return wire::encode_response(std::get<wire::GetAssertionResponse>(result));
  }

  int consecutive_failed_checks() const { return consecutive_failures_; }

 private:
  /// Base cost plus zero-mean Gaussian jitter, clamped so a charge never goes
  /// negative. Zero-cost steps charge nothing.
  void charge(SimClock& clock, double base_us) {
    if (base_us <= 0.0) return;
    double amount = base_us;
    if (profile_.jitter_std_us > 0.0) {
      amount = std::max(0.0, base_us + rng_.normal(0.0, profile_.jitter_std_us));
    }
    clock.advance(amount);
  }

  void apply_defense_delay(SimClock& clock) {
    if (!profile_.defense_threshold) return;
    if (consecutive_failures_ < *profile_.defense_threshold) return;
    clock.advance(rng_.uniform(profile_.defense_delay_range_us.first,
                               profile_.defense_delay_range_us.second));
  }

  std::array<std::uint8_t, 32> derive_scalar(std::span<const std::uint8_t> nonce,
                                             std::span<const std::uint8_t> rp_id_hash) {
    Bytes data = concat(nonce, rp_id_hash);
    return crypto::p256_scalar_from_bytes(crypto::hmac_sha256(keys_.kdf_secret, data));
  }

  /// One handle check. Wrong-length handles are rejected before the MAC at
  /// zero charged cost, mirroring the usual firmware length guard.
  std::pair<std::optional<std::array<std::uint8_t, 32>>, CredentialRecord*> check_handle(
      const Bytes& handle, const std::string& rp_id,
      const std::array<std::uint8_t, 32>& rp_hash, SimClock& clock) {
    switch (profile_.scheme) {
      case KeyScheme::kWrapEarlyAbort:
      case KeyScheme::kWrapConstantTime: {
        auto result = unwrap_key(handle, rp_hash, clock);
        if (!result.ok()) return {std::nullopt, nullptr};
        return {result.key, find_record(handle)};
      }
      case KeyScheme::kKdfDerived: {
        if (handle.size() != kKdfHandleLen) return {std::nullopt, nullptr};
        charge(clock, profile_.cost_kdf_us);
        auto sk = derived_key_cached(handle, rp_hash);
        auto pk = derived_public_cached(handle, rp_hash, sk);
        for (auto& record : records_) {
          if (record.rp_id == rp_id && record.public_key == pk) return {sk, &record};
        }
        return {std::nullopt, nullptr};
      }
      case KeyScheme::kResident: {
        if (handle.size() != kResidentHandleLen) return {std::nullopt, nullptr};
        charge(clock, profile_.cost_origin_compare_us);
        for (auto& record : records_) {
          if (record.rp_id == rp_id && record.key_handle == handle) {
            std::array<std::uint8_t, 32> sk{};
            std::copy_n(record.private_key.begin(), 32, sk.begin());
            return {sk, &record};
          }
        }
        return {std::nullopt, nullptr};
      }
    }
    return {std::nullopt, nullptr};
  }

  CredentialRecord* find_record(const Bytes& handle) {
    for (auto& record : records_) {
      if (record.key_handle == handle) return &record;
    }
    return nullptr;
  }

  // Memoized derive results; the simulated cost is charged either way, this
  // only avoids recomputing the same EC point for repeated probe handles.
  std::array<std::uint8_t, 32> derived_key_cached(const Bytes& nonce,
                                                  const std::array<std::uint8_t, 32>& rp_hash) {
    std::string key = to_hex(nonce) + to_hex(rp_hash);
    auto it = kdf_cache_.find(key);
    if (it != kdf_cache_.end()) return it->second.first;
    auto sk = derive_scalar(nonce, rp_hash);
    return sk;
  }

  Bytes derived_public_cached(const Bytes& nonce, const std::array<std::uint8_t, 32>& rp_hash,
                              const std::array<std::uint8_t, 32>& sk) {
    std::string key = to_hex(nonce) + to_hex(rp_hash);
    auto it = kdf_cache_.find(key);
    if (it != kdf_cache_.end()) return it->second.second;
    auto pk = crypto::p256_public_from_private(sk);
    if (kdf_cache_.size() > 4096) kdf_cache_.clear();
    kdf_cache_.emplace(key, std::make_pair(sk, pk));
    return pk;
  }

  AuthenticatorProfile profile_;
  Rng rng_;
  MasterKeys keys_;
  std::vector<CredentialRecord> records_;
  std::uint32_t sign_counter_ = 0;
  int consecutive_failures_ = 0;
  std::unordered_map<std::string, std::pair<std::array<std::uint8_t, 32>, Bytes>> kdf_cache_;
};

}  // namespace fidosim
