#pragma once

#include <array>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/ecdsa.h>
#include <openssl/evp.h>
#include <openssl/obj_mac.h>
#include <openssl/param_build.h>
#include <openssl/params.h>

#include "fidosim/bytes.hpp"
#include "fidosim/rng.hpp"

namespace fidosim::crypto {

using Digest = std::array<std::uint8_t, 32>;

namespace detail {

struct BnDeleter {
  void operator()(BIGNUM* p) const { BN_free(p); }
};
struct BnCtxDeleter {
  void operator()(BN_CTX* p) const { BN_CTX_free(p); }
};
struct EcPointDeleter {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
struct EvpPkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct EvpPkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct EvpMacCtxDeleter {
  void operator()(EVP_MAC_CTX* p) const { EVP_MAC_CTX_free(p); }
};
struct EvpCipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
struct EcdsaSigDeleter {
  void operator()(ECDSA_SIG* p) const { ECDSA_SIG_free(p); }
};

using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using EcPointPtr = std::unique_ptr<EC_POINT, EcPointDeleter>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, EvpPkeyDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, EvpPkeyCtxDeleter>;

[[noreturn]] inline void fail(const std::string& what) {
  throw std::runtime_error("crypto: " + what);
}

inline const EC_GROUP* p256_group() {
  static const EC_GROUP* group = [] {
    EC_GROUP* g = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
    if (!g) fail("EC_GROUP_new_by_curve_name");
    return g;
  }();
  return group;
}

inline const BIGNUM* p256_order() {
  static const BIGNUM* order = [] {
    BIGNUM* n = BN_new();
    if (!n || EC_GROUP_get_order(p256_group(), n, nullptr) != 1) fail("EC_GROUP_get_order");
    return n;
  }();
  return order;
}

inline BnPtr bn_from_bytes(std::span<const std::uint8_t> bytes) {
  BnPtr bn(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
  if (!bn) fail("BN_bin2bn");
  return bn;
}

inline std::array<std::uint8_t, 32> bn_to_32(const BIGNUM* bn) {
  std::array<std::uint8_t, 32> out{};
  if (BN_bn2binpad(bn, out.data(), 32) != 32) fail("BN_bn2binpad");
  return out;
}

}  // namespace detail

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    detail::fail("SHA-256");
  }
  return out;
}

inline Digest sha256(std::string_view text) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  static EVP_MAC* mac = [] {
    EVP_MAC* m = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
    if (!m) detail::fail("EVP_MAC_fetch(HMAC)");
    return m;
  }();
  std::unique_ptr<EVP_MAC_CTX, detail::EvpMacCtxDeleter> ctx(EVP_MAC_CTX_new(mac));
  if (!ctx) detail::fail("EVP_MAC_CTX_new");
  char digest_name[] = "SHA256";
  OSSL_PARAM params[] = {OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest_name, 0),
                         OSSL_PARAM_construct_end()};
  Digest out{};
  std::size_t out_len = 0;
  if (EVP_MAC_init(ctx.get(), key.data(), key.size(), params) != 1 ||
      EVP_MAC_update(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_MAC_final(ctx.get(), out.data(), &out_len, out.size()) != 1 || out_len != out.size()) {
    detail::fail("HMAC-SHA256");
  }
  return out;
}

/// AES-256-CBC without padding; plaintext length must be a multiple of 16.
inline Bytes aes256_cbc_encrypt(std::span<const std::uint8_t> key,
                                std::span<const std::uint8_t> iv,
                                std::span<const std::uint8_t> plaintext) {
  if (key.size() != 32 || iv.size() != 16 || plaintext.size() % 16 != 0) {
    throw std::invalid_argument("aes256_cbc_encrypt: bad input sizes");
  }
  std::unique_ptr<EVP_CIPHER_CTX, detail::EvpCipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  Bytes out(plaintext.size());
  int len = 0;
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, key.data(), iv.data()) != 1 ||
      EVP_CIPHER_CTX_set_padding(ctx.get(), 0) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1 ||
      len != static_cast<int>(plaintext.size())) {
    detail::fail("AES-256-CBC encrypt");
  }
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1 || fin != 0) {
    detail::fail("AES-256-CBC encrypt final");
  }
  return out;
}

inline Bytes aes256_cbc_decrypt(std::span<const std::uint8_t> key,
                                std::span<const std::uint8_t> iv,
                                std::span<const std::uint8_t> ciphertext) {
  if (key.size() != 32 || iv.size() != 16 || ciphertext.size() % 16 != 0) {
    throw std::invalid_argument("aes256_cbc_decrypt: bad input sizes");
  }
  std::unique_ptr<EVP_CIPHER_CTX, detail::EvpCipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
  Bytes out(ciphertext.size());
  int len = 0;
  if (!ctx || EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_cbc(), nullptr, key.data(), iv.data()) != 1 ||
      EVP_CIPHER_CTX_set_padding(ctx.get(), 0) != 1 ||
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(),
                        static_cast<int>(ciphertext.size())) != 1 ||
      len != static_cast<int>(ciphertext.size())) {
    detail::fail("AES-256-CBC decrypt");
  }
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1 || fin != 0) {
    detail::fail("AES-256-CBC decrypt final");
  }
  return out;
}

/// P-256 key pair. The private scalar is 32 bytes big-endian; the public key
/// is the 65-byte uncompressed SEC1 point.
struct P256KeyPair {
  std::array<std::uint8_t, 32> private_key{};
  Bytes public_key;
};

inline Bytes p256_public_from_private(std::span<const std::uint8_t> private_key) {
  if (private_key.size() != 32) throw std::invalid_argument("p256 private key must be 32 bytes");
  const EC_GROUP* group = detail::p256_group();
  detail::BnCtxPtr ctx(BN_CTX_new());
  detail::BnPtr d = detail::bn_from_bytes(private_key);
  detail::EcPointPtr pub(EC_POINT_new(group));
  if (!ctx || !pub || EC_POINT_mul(group, pub.get(), d.get(), nullptr, nullptr, ctx.get()) != 1) {
    detail::fail("EC_POINT_mul (public key)");
  }
  Bytes out(65);
  if (EC_POINT_point2oct(group, pub.get(), POINT_CONVERSION_UNCOMPRESSED, out.data(), out.size(),
                         ctx.get()) != 65) {
    detail::fail("EC_POINT_point2oct");
  }
  return out;
}

/// Fresh key pair with the scalar drawn from the caller's deterministic stream.
inline P256KeyPair p256_generate(Rng& rng) {
  const BIGNUM* order = detail::p256_order();
  detail::BnPtr d(BN_new());
  if (!d) detail::fail("BN_new");
  for (;;) {
    auto candidate = rng.bytes(32);
    detail::BnPtr c = detail::bn_from_bytes(candidate);
    if (BN_is_zero(c.get()) || BN_cmp(c.get(), order) >= 0) continue;
    BN_copy(d.get(), c.get());
    break;
  }
  P256KeyPair kp;
  kp.private_key = detail::bn_to_32(d.get());
  kp.public_key = p256_public_from_private(kp.private_key);
  return kp;
}

/// Scalar = value mod order, mapped away from zero. Used by the derive-from-
/// nonce scheme where any 32 bytes must yield a usable signing key.
inline std::array<std::uint8_t, 32> p256_scalar_from_bytes(std::span<const std::uint8_t> bytes32) {
  detail::BnCtxPtr ctx(BN_CTX_new());
  detail::BnPtr v = detail::bn_from_bytes(bytes32);
  detail::BnPtr r(BN_new());
  if (!ctx || !r || BN_mod(r.get(), v.get(), detail::p256_order(), ctx.get()) != 1) {
    detail::fail("BN_mod");
  }
  if (BN_is_zero(r.get())) BN_one(r.get());
  return detail::bn_to_32(r.get());
}

namespace detail {

// Deterministic nonce per RFC 6979 (HMAC-SHA256 construction).
inline BnPtr rfc6979_nonce(std::span<const std::uint8_t> private_key, const Digest& digest) {
  const BIGNUM* order = p256_order();

  auto bits2octets = [&](const Digest& h) {
    BnPtr t = bn_from_bytes(h);
    if (BN_cmp(t.get(), order) >= 0) {
      if (BN_sub(t.get(), t.get(), order) != 1) fail("BN_sub");
    }
    return bn_to_32(t.get());
  };

  std::array<std::uint8_t, 32> v{};
  std::array<std::uint8_t, 32> k{};
  v.fill(0x01);
  k.fill(0x00);

  auto x = bn_to_32(bn_from_bytes(private_key).get());
  auto h = bits2octets(digest);

  Bytes msg(v.begin(), v.end());
  msg.push_back(0x00);
  msg.insert(msg.end(), x.begin(), x.end());
  msg.insert(msg.end(), h.begin(), h.end());
  k = hmac_sha256(k, msg);
  v = hmac_sha256(k, v);

  msg.assign(v.begin(), v.end());
  msg.push_back(0x01);
  msg.insert(msg.end(), x.begin(), x.end());
  msg.insert(msg.end(), h.begin(), h.end());
  k = hmac_sha256(k, msg);
  v = hmac_sha256(k, v);

  for (;;) {
    v = hmac_sha256(k, v);
    BnPtr candidate = bn_from_bytes(v);
    if (!BN_is_zero(candidate.get()) && BN_cmp(candidate.get(), order) < 0) return candidate;
    Bytes retry(v.begin(), v.end());
    retry.push_back(0x00);
    k = hmac_sha256(k, retry);
    v = hmac_sha256(k, v);
  }
}

}  // namespace detail

/// ECDSA P-256 signature over a precomputed SHA-256 digest, DER-encoded.
/// The nonce is derived deterministically (RFC 6979 style) so identical
/// inputs always produce identical signatures.
inline Bytes ecdsa_p256_sign(std::span<const std::uint8_t> private_key, const Digest& digest) {
  using namespace detail;
  if (private_key.size() != 32) throw std::invalid_argument("ecdsa_p256_sign: bad key size");
  const EC_GROUP* group = p256_group();
  const BIGNUM* order = p256_order();
  BnCtxPtr ctx(BN_CTX_new());
  if (!ctx) fail("BN_CTX_new");

  BnPtr d = bn_from_bytes(private_key);
  BnPtr z = bn_from_bytes(digest);
  BnPtr k = rfc6979_nonce(private_key, digest);

  BnPtr r(BN_new());
  BnPtr s(BN_new());
  BnPtr x(BN_new());
  BnPtr tmp(BN_new());
  if (!r || !s || !x || !tmp) fail("BN_new");

  for (;;) {
    EcPointPtr point(EC_POINT_new(group));
    if (!point || EC_POINT_mul(group, point.get(), k.get(), nullptr, nullptr, ctx.get()) != 1 ||
        EC_POINT_get_affine_coordinates(group, point.get(), x.get(), nullptr, ctx.get()) != 1) {
      fail("EC point arithmetic");
    }
    if (BN_mod(r.get(), x.get(), order, ctx.get()) != 1) fail("BN_mod (r)");
    if (BN_is_zero(r.get())) {
      k = rfc6979_nonce(private_key, sha256(bn_to_32(k.get())));
      continue;
    }
    // s = k^-1 (z + r d) mod n
    BnPtr kinv(BN_mod_inverse(nullptr, k.get(), order, ctx.get()));
    if (!kinv || BN_mod_mul(tmp.get(), r.get(), d.get(), order, ctx.get()) != 1 ||
        BN_mod_add(tmp.get(), tmp.get(), z.get(), order, ctx.get()) != 1 ||
        BN_mod_mul(s.get(), kinv.get(), tmp.get(), order, ctx.get()) != 1) {
      fail("BN arithmetic (s)");
    }
    if (BN_is_zero(s.get())) {
      k = rfc6979_nonce(private_key, sha256(bn_to_32(k.get())));
      continue;
    }
    break;
  }

  std::unique_ptr<ECDSA_SIG, EcdsaSigDeleter> sig(ECDSA_SIG_new());
  if (!sig || ECDSA_SIG_set0(sig.get(), BN_dup(r.get()), BN_dup(s.get())) != 1) {
    fail("ECDSA_SIG_set0");
  }
  int der_len = i2d_ECDSA_SIG(sig.get(), nullptr);
  if (der_len <= 0) fail("i2d_ECDSA_SIG (size)");
  Bytes der(static_cast<std::size_t>(der_len));
  std::uint8_t* p = der.data();
  if (i2d_ECDSA_SIG(sig.get(), &p) != der_len) fail("i2d_ECDSA_SIG");
  return der;
}

/// Signature components as 32-byte big-endian values, for tests.
inline std::pair<std::array<std::uint8_t, 32>, std::array<std::uint8_t, 32>> ecdsa_der_to_raw(
    std::span<const std::uint8_t> der) {
  const std::uint8_t* p = der.data();
  std::unique_ptr<ECDSA_SIG, detail::EcdsaSigDeleter> sig(
      d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(der.size())));
  if (!sig) detail::fail("d2i_ECDSA_SIG");
  const BIGNUM* r = nullptr;
  const BIGNUM* s = nullptr;
  ECDSA_SIG_get0(sig.get(), &r, &s);
  return {detail::bn_to_32(r), detail::bn_to_32(s)};
}

/// Verification through OpenSSL's EVP stack, independent of the signing path.
inline bool ecdsa_p256_verify(std::span<const std::uint8_t> public_key, const Digest& digest,
                              std::span<const std::uint8_t> der_signature) {
  using namespace detail;
  if (public_key.size() != 65 || public_key[0] != 0x04) return false;

  OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
  if (!bld) fail("OSSL_PARAM_BLD_new");
  char group_name[] = "prime256v1";
  OSSL_PARAM* params = nullptr;
  if (OSSL_PARAM_BLD_push_utf8_string(bld, OSSL_PKEY_PARAM_GROUP_NAME, group_name, 0) != 1 ||
      OSSL_PARAM_BLD_push_octet_string(bld, OSSL_PKEY_PARAM_PUB_KEY, public_key.data(),
                                       public_key.size()) != 1 ||
      (params = OSSL_PARAM_BLD_to_param(bld)) == nullptr) {
    OSSL_PARAM_BLD_free(bld);
    fail("OSSL_PARAM_BLD");
  }
  OSSL_PARAM_BLD_free(bld);

  PkeyCtxPtr from_ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
  EVP_PKEY* raw = nullptr;
  bool ok = from_ctx && EVP_PKEY_fromdata_init(from_ctx.get()) == 1 &&
            EVP_PKEY_fromdata(from_ctx.get(), &raw, EVP_PKEY_PUBLIC_KEY, params) == 1;
  OSSL_PARAM_free(params);
  if (!ok || !raw) return false;
  PkeyPtr pkey(raw);

  PkeyCtxPtr verify_ctx(EVP_PKEY_CTX_new(pkey.get(), nullptr));
  if (!verify_ctx || EVP_PKEY_verify_init(verify_ctx.get()) != 1) return false;
  return EVP_PKEY_verify(verify_ctx.get(), der_signature.data(), der_signature.size(),
                         digest.data(), digest.size()) == 1;
}

}  // namespace fidosim::crypto
