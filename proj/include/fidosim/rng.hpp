#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string_view>

#include <openssl/evp.h>

#include "fidosim/bytes.hpp"

namespace fidosim {

/// Deterministic, seedable random stream (ChaCha20 keystream under a
/// SHA-256-derived key). Every source of randomness in a scenario hangs off
/// one of these so equal seeds reproduce byte-identical runs. Streams forked
/// with distinct labels are independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng(derive_key("fidosim.rng.root", seed)) {}

  Rng(const Rng&) = delete;
  Rng& operator=(const Rng&) = delete;
  Rng(Rng&&) = default;
  Rng& operator=(Rng&&) = default;

  /// Child stream keyed by this stream's key, the label, and a fork counter,
  /// so repeated forks with the same label stay distinct but reproducible.
  Rng fork(std::string_view label) {
    Bytes material(key_.begin(), key_.end());
    material.push_back(0x66);  // domain separator for forks
    material.insert(material.end(), label.begin(), label.end());
    auto ctr = u64_be(fork_counter_++);
    material.insert(material.end(), ctr.begin(), ctr.end());
    return Rng(sha256_raw(material));
  }

  void fill(std::span<std::uint8_t> out) {
    for (auto& b : out) b = next_byte();
  }

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
  }

  std::uint64_t next_u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | next_byte();
    return v;
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller; the spare value is cached for the next call.
  double normal(double mean, double stddev) {
    if (stddev <= 0.0) return mean;
    if (spare_) {
      double z = *spare_;
      spare_.reset();
      return mean + stddev * z;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Normal restricted to non-negative values via rejection; degenerates to
  /// the mean when stddev is zero.
  double truncated_normal_nonneg(double mean, double stddev) {
    if (stddev <= 0.0) return mean < 0.0 ? 0.0 : mean;
    for (;;) {
      double v = normal(mean, stddev);
      if (v >= 0.0) return v;
    }
  }

 private:
  using Key = std::array<std::uint8_t, 32>;

  explicit Rng(Key key) : key_(key) { buf_.fill(0); }

  static Key derive_key(std::string_view domain, std::uint64_t seed) {
    Bytes material(domain.begin(), domain.end());
    auto s = u64_be(seed);
    material.insert(material.end(), s.begin(), s.end());
    return sha256_raw(material);
  }

  // Local digest helper; crypto.hpp is layered above this header.
  static Key sha256_raw(std::span<const std::uint8_t> data) {
    Key out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
      throw std::runtime_error("rng: SHA-256 failed");
    }
    return out;
  }

  std::uint8_t next_byte() {
    if (pos_ == buf_.size()) refill();
    return buf_[pos_++];
  }

  void refill() {
    // ChaCha20 keystream: encrypt zeros with a block-counter IV.
    std::array<std::uint8_t, 16> iv{};
    std::uint64_t ctr = block_counter_;
    for (int i = 0; i < 8; ++i) {
      iv[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>(ctr);
      ctr >>= 8;
    }
    std::array<std::uint8_t, kBufSize> zeros{};
    std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(EVP_CIPHER_CTX_new(),
                                                                        EVP_CIPHER_CTX_free);
    int out_len = 0;
    if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_chacha20(), nullptr, key_.data(), iv.data()) != 1 ||
        EVP_EncryptUpdate(ctx.get(), buf_.data(), &out_len, zeros.data(),
                          static_cast<int>(zeros.size())) != 1 ||
        out_len != static_cast<int>(kBufSize)) {
      throw std::runtime_error("rng: ChaCha20 keystream failed");
    }
    ++block_counter_;
    pos_ = 0;
  }

  static constexpr std::size_t kBufSize = 4096;

  Key key_;
  std::uint64_t block_counter_ = 0;
  std::uint64_t fork_counter_ = 0;
  std::array<std::uint8_t, kBufSize> buf_{};
  std::size_t pos_ = kBufSize;
  std::optional<double> spare_;
};

}  // namespace fidosim
