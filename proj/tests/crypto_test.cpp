#include "fidosim/crypto.hpp"

#include <gtest/gtest.h>

#include "fidosim/rng.hpp"
#include "support/ref_crypto.hpp"

namespace fidosim {
namespace {

// --- Reference-oracle self-checks against published vectors ----------------

TEST(RefOracle, Aes256KnownAnswer) {
  // FIPS-197 C.3
  auto key = from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
  auto plaintext = from_hex("00112233445566778899aabbccddeeff");
  auto ct = refcrypto::aes256_encrypt_block(key, plaintext);
  EXPECT_EQ(to_hex(ct), "8ea2b7ca516745bfeafc49904b496089");
  auto pt = refcrypto::aes256_decrypt_block(key, ct);
  EXPECT_EQ(to_hex(pt), to_hex(plaintext));
}

TEST(RefOracle, Sha256KnownAnswer) {
  Bytes abc{'a', 'b', 'c'};
  EXPECT_EQ(to_hex(refcrypto::sha256(abc)),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(RefOracle, HmacSha256KnownAnswer) {
  // RFC 4231 test case 1
  Bytes key(20, 0x0b);
  Bytes data{'H', 'i', ' ', 'T', 'h', 'e', 'r', 'e'};
  EXPECT_EQ(to_hex(refcrypto::hmac_sha256(key, data)),
            "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
}

// --- Library primitives against the independent oracle ---------------------

TEST(Crypto, Sha256MatchesOracle) {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    Bytes data = rng.bytes(rng.next_u64() % 300);
    auto ours = crypto::sha256(data);
    auto ref = refcrypto::sha256(data);
    EXPECT_EQ(to_hex(ours), to_hex(ref));
  }
}

TEST(Crypto, HmacMatchesOracle) {
  Rng rng(22);
  for (int i = 0; i < 100; ++i) {
    Bytes key = rng.bytes(1 + rng.next_u64() % 80);
    Bytes data = rng.bytes(rng.next_u64() % 200);
    EXPECT_EQ(to_hex(crypto::hmac_sha256(key, data)), to_hex(refcrypto::hmac_sha256(key, data)));
  }
}

TEST(Crypto, AesCbcMatchesOracle) {
  Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    Bytes key = rng.bytes(32);
    Bytes iv = rng.bytes(16);
    Bytes plaintext = rng.bytes(16 * (1 + rng.next_u64() % 6));
    Bytes ours = crypto::aes256_cbc_encrypt(key, iv, plaintext);
    Bytes ref = refcrypto::aes256_cbc_encrypt(key, iv, plaintext);
    EXPECT_EQ(to_hex(ours), to_hex(ref));
    EXPECT_EQ(to_hex(crypto::aes256_cbc_decrypt(key, iv, ours)), to_hex(plaintext));
    EXPECT_EQ(to_hex(refcrypto::aes256_cbc_decrypt(key, iv, ours)), to_hex(plaintext));
  }
}

// --- Deterministic ECDSA ----------------------------------------------------

TEST(Crypto, Rfc6979KnownAnswer) {
  // RFC 6979 A.2.5, P-256 with SHA-256, message "sample".
  auto priv = from_hex("C9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721");
  auto digest = crypto::sha256(std::string_view("sample"));
  auto der = crypto::ecdsa_p256_sign(priv, digest);
  auto [r, s] = crypto::ecdsa_der_to_raw(der);
  EXPECT_EQ(to_hex(r), "efd48b2aacb6a8fd1140dd9cd45e81d69d2c877b56aaf991c34d0ea84eaf3716");
  EXPECT_EQ(to_hex(s), "f7cb1c942d657c41d436c7a1b6e29f65f3e900dbb9aff4064dc4ab2f843acda8");

  auto pub = crypto::p256_public_from_private(priv);
  EXPECT_EQ(to_hex(pub),
            "0460fed4ba255a9d31c961eb74c6356d68c049b8923b61fa6ce669622e60f29fb6"
            "7903fe1008b8bc99a41ae9e95628bc64f2f1b20c2d7e9f5177a3c294d4462299");
}

TEST(Crypto, Rfc6979SecondVector) {
  // RFC 6979 A.2.5, message "test".
  auto priv = from_hex("C9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721");
  auto digest = crypto::sha256(std::string_view("test"));
  auto [r, s] = crypto::ecdsa_der_to_raw(crypto::ecdsa_p256_sign(priv, digest));
  EXPECT_EQ(to_hex(r), "f1abb023518351cd71d881567b1ea663ed3efcf6c5132b354f28d3b0b7d38367");
  EXPECT_EQ(to_hex(s), "019f4113742a2b14bd25926b49c649155f267e60d3814b4c0cc84250e46f0083");
}

TEST(Crypto, SignaturesAreDeterministic) {
  Rng rng(24);
  auto kp = crypto::p256_generate(rng);
  auto digest = crypto::sha256(std::string_view("payload"));
  EXPECT_EQ(crypto::ecdsa_p256_sign(kp.private_key, digest),
            crypto::ecdsa_p256_sign(kp.private_key, digest));
}

TEST(Crypto, SignVerifyProperty) {
  Rng rng(25);
  for (int i = 0; i < 50; ++i) {
    auto kp = crypto::p256_generate(rng);
    crypto::Digest digest{};
    rng.fill(digest);
    auto sig = crypto::ecdsa_p256_sign(kp.private_key, digest);
    EXPECT_TRUE(crypto::ecdsa_p256_verify(kp.public_key, digest, sig));

    crypto::Digest tampered = digest;
    tampered[0] ^= 0x01;
    EXPECT_FALSE(crypto::ecdsa_p256_verify(kp.public_key, tampered, sig));

    auto other = crypto::p256_generate(rng);
    EXPECT_FALSE(crypto::ecdsa_p256_verify(other.public_key, digest, sig));
  }
}

TEST(Crypto, ScalarFromBytesNonZero) {
  Bytes zeros(32, 0x00);
  auto scalar = crypto::p256_scalar_from_bytes(zeros);
  bool all_zero = true;
  for (auto b : scalar) all_zero = all_zero && b == 0;
  EXPECT_FALSE(all_zero);
}

// --- Deterministic RNG -------------------------------------------------------

TEST(Rng, EqualSeedsEqualStreams) {
  Rng a(99), b(99);
  EXPECT_EQ(a.bytes(4096 + 100), b.bytes(4096 + 100));  // spans a refill boundary
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  EXPECT_NE(a.bytes(64), b.bytes(64));
}

TEST(Rng, ForksAreIndependentButReproducible) {
  Rng a(5);
  Rng fork1 = a.fork("client");
  Rng fork2 = a.fork("client");  // second fork with same label: distinct stream
  EXPECT_NE(fork1.bytes(32), fork2.bytes(32));

  Rng b(5);
  Rng c(5);
  EXPECT_EQ(b.fork("client").bytes(32), c.fork("client").bytes(32));
  EXPECT_NE(b.fork("client").bytes(32), c.fork("other").bytes(32));
}

TEST(Rng, NormalMomentsRoughlyCorrect) {
  Rng rng(6);
  double sum = 0.0, sum_sq = 0.0;
  const int kDraws = 200000;
  for (int i = 0; i < kDraws; ++i) {
    double v = rng.normal(10.0, 3.0);
    sum += v;
    sum_sq += v * v;
  }
  double mean = sum / kDraws;
  double var = sum_sq / kDraws - mean * mean;
  EXPECT_NEAR(mean, 10.0, 0.05);
  EXPECT_NEAR(std::sqrt(var), 3.0, 0.05);
}

TEST(Rng, UniformRange) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.uniform(50.0, 150.0);
    EXPECT_GE(v, 50.0);
    EXPECT_LT(v, 150.0);
  }
}

}  // namespace
}  // namespace fidosim
