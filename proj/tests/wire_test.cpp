#include "fidosim/wire.hpp"

#include <gtest/gtest.h>

#include "fidosim/rng.hpp"

namespace fidosim {
namespace {

using wire::CtapError;
using wire::decode_get_assertion;
using wire::decode_response;
using wire::encode_get_assertion;
using wire::encode_response;
using wire::GetAssertionRequest;
using wire::GetAssertionResponse;

GetAssertionRequest random_request(Rng& rng, std::size_t max_handles = 6) {
  GetAssertionRequest req;
  std::size_t name_len = 1 + rng.next_u64() % 24;
  for (std::size_t i = 0; i < name_len; ++i) {
    req.rp_id.push_back(static_cast<char>('a' + rng.next_u64() % 26));
  }
  rng.fill(req.client_data_hash);
  std::size_t handles = rng.next_u64() % (max_handles + 1);
  for (std::size_t i = 0; i < handles; ++i) {
    req.allow_list.push_back(wire::CredentialDescriptor{rng.bytes(1 + rng.next_u64() % 120)});
  }
  req.user_presence = rng.next_u64() % 2 == 0;
  return req;
}

GetAssertionResponse random_response(Rng& rng) {
  GetAssertionResponse resp;
  resp.credential.id = rng.bytes(1 + rng.next_u64() % 120);
  std::array<std::uint8_t, 32> rp_hash{};
  rng.fill(rp_hash);
  resp.auth_data = wire::make_auth_data(rp_hash, 0x01, static_cast<std::uint32_t>(rng.next_u64()));
  resp.signature = rng.bytes(64 + rng.next_u64() % 8);
  return resp;
}

TEST(WireRequest, EmptyAllowListRoundtrip) {
  GetAssertionRequest req;
  req.rp_id = "a.com";
  req.client_data_hash.fill(0xab);
  req.user_presence = false;

  Bytes frame = encode_get_assertion(req);
  ASSERT_FALSE(frame.empty());
  EXPECT_EQ(frame[0], 0x02);

  auto decoded = decode_get_assertion(frame);
  ASSERT_FALSE(wire::is_error(decoded));
  EXPECT_EQ(std::get<GetAssertionRequest>(decoded), req);
}

TEST(WireRequest, RoundtripProperty) {
  Rng rng(101);
  for (int i = 0; i < 300; ++i) {
    GetAssertionRequest req = random_request(rng);
    auto decoded = decode_get_assertion(encode_get_assertion(req));
    ASSERT_FALSE(wire::is_error(decoded)) << "iteration " << i;
    EXPECT_EQ(std::get<GetAssertionRequest>(decoded), req) << "iteration " << i;
  }
}

TEST(WireRequest, DeterministicEncoding) {
  Rng rng(7);
  GetAssertionRequest req = random_request(rng);
  EXPECT_EQ(encode_get_assertion(req), encode_get_assertion(req));
}

TEST(WireRequest, AllowListOrderChangesBytes) {
  GetAssertionRequest req;
  req.rp_id = "rp.example";
  req.client_data_hash.fill(0x01);
  req.allow_list.push_back(wire::CredentialDescriptor{Bytes{0xaa, 0xaa}});
  req.allow_list.push_back(wire::CredentialDescriptor{Bytes{0xbb, 0xbb}});

  GetAssertionRequest swapped = req;
  std::swap(swapped.allow_list[0], swapped.allow_list[1]);

  EXPECT_NE(encode_get_assertion(req), encode_get_assertion(swapped));

  auto decoded = decode_get_assertion(encode_get_assertion(swapped));
  ASSERT_FALSE(wire::is_error(decoded));
  EXPECT_EQ(std::get<GetAssertionRequest>(decoded).allow_list[0].id, (Bytes{0xbb, 0xbb}));
}

// Byte-count oracle over the raw encoder output: a 112-byte id must appear as
// a CBOR byte string with head 0x58 0x70 followed by the exact handle bytes.
TEST(WireRequest, WrappedHandleEncodesAs112ByteString) {
  Rng rng(11);
  GetAssertionRequest req;
  req.rp_id = "svc.example";
  rng.fill(req.client_data_hash);
  Bytes handle = rng.bytes(112);
  req.allow_list.push_back(wire::CredentialDescriptor{handle});

  Bytes frame = encode_get_assertion(req);
  Bytes needle{0x58, 0x70};
  needle.insert(needle.end(), handle.begin(), handle.end());
  auto it = std::search(frame.begin(), frame.end(), needle.begin(), needle.end());
  EXPECT_NE(it, frame.end());
}

TEST(WireRequest, WrongCommandByteRejected) {
  Rng rng(12);
  Bytes frame = encode_get_assertion(random_request(rng));
  frame[0] = 0x01;
  auto decoded = decode_get_assertion(frame);
  ASSERT_TRUE(wire::is_error(decoded));
  EXPECT_EQ(std::get<CtapError>(decoded), CtapError::kInvalidParameter);
}

TEST(WireRequest, TruncationFuzz) {
  Rng rng(13);
  // Every strict prefix of a valid frame must decode to an error, never crash.
  for (int i = 0; i < 50; ++i) {
    Bytes frame = encode_get_assertion(random_request(rng));
    for (std::size_t len = 0; len < frame.size(); ++len) {
      auto decoded = decode_get_assertion(std::span(frame).first(len));
      EXPECT_TRUE(wire::is_error(decoded)) << "prefix length " << len;
    }
  }
}

TEST(WireRequest, BadClientDataHashLengthRejected) {
  // Hand-build a frame whose clientDataHash is 31 bytes.
  cbor::Map root;
  root.emplace_back(std::uint64_t{1}, std::string("rp.example"));
  root.emplace_back(std::uint64_t{2}, Bytes(31, 0xcd));
  root.emplace_back(std::uint64_t{3}, cbor::Array{});
  cbor::Map options;
  options.emplace_back(std::string("up"), false);
  root.emplace_back(std::uint64_t{5}, std::move(options));
  Bytes frame{0x02};
  append(frame, cbor::encode(cbor::Value(std::move(root))));

  auto decoded = decode_get_assertion(frame);
  ASSERT_TRUE(wire::is_error(decoded));
  EXPECT_EQ(std::get<CtapError>(decoded), CtapError::kInvalidParameter);
}

TEST(WireResponse, RoundtripProperty) {
  Rng rng(14);
  for (int i = 0; i < 300; ++i) {
    GetAssertionResponse resp = random_response(rng);
    auto decoded = decode_response(encode_response(resp));
    ASSERT_FALSE(wire::is_error(decoded)) << "iteration " << i;
    EXPECT_EQ(std::get<GetAssertionResponse>(decoded), resp) << "iteration " << i;
  }
}

TEST(WireResponse, AuthDataMustBe37Bytes) {
  Rng rng(15);
  GetAssertionResponse resp = random_response(rng);
  resp.auth_data.resize(36);
  EXPECT_THROW(encode_response(resp), std::invalid_argument);

  // Same invariant on the decode side, via a hand-built frame.
  cbor::Map root;
  cbor::Map cred;
  cred.emplace_back(std::string("id"), Bytes{0x01});
  cred.emplace_back(std::string("type"), std::string("public-key"));
  root.emplace_back(std::uint64_t{1}, std::move(cred));
  root.emplace_back(std::uint64_t{2}, Bytes(36, 0x00));
  root.emplace_back(std::uint64_t{3}, Bytes{0x30, 0x00});
  Bytes frame{0x00};
  append(frame, cbor::encode(cbor::Value(std::move(root))));
  auto decoded = decode_response(frame);
  ASSERT_TRUE(wire::is_error(decoded));
  EXPECT_EQ(std::get<CtapError>(decoded), CtapError::kInvalidParameter);
}

// Manual byte-layout oracle: sign_count is big-endian at auth_data[33..37].
TEST(WireResponse, SignCountLayout) {
  std::array<std::uint8_t, 32> rp_hash{};
  Bytes auth_data = wire::make_auth_data(rp_hash, 0x01, 0x00000001);
  ASSERT_EQ(auth_data.size(), 37u);
  EXPECT_EQ(auth_data[33], 0x00);
  EXPECT_EQ(auth_data[34], 0x00);
  EXPECT_EQ(auth_data[35], 0x00);
  EXPECT_EQ(auth_data[36], 0x01);

  Bytes big = wire::make_auth_data(rp_hash, 0x01, 0xa1b2c3d4);
  EXPECT_EQ(big[33], 0xa1);
  EXPECT_EQ(big[34], 0xb2);
  EXPECT_EQ(big[35], 0xc3);
  EXPECT_EQ(big[36], 0xd4);
}

TEST(WireResponse, ErrorFrames) {
  for (CtapError code : {CtapError::kInvalidParameter, CtapError::kInvalidLength,
                         CtapError::kOperationDenied, CtapError::kNoCredentials}) {
    Bytes frame = wire::encode_error(code);
    ASSERT_EQ(frame.size(), 1u);
    auto decoded = decode_response(frame);
    ASSERT_TRUE(wire::is_error(decoded));
    EXPECT_EQ(std::get<CtapError>(decoded), code);
  }
  auto unknown = decode_response(Bytes{0x99});
  ASSERT_TRUE(wire::is_error(unknown));
  EXPECT_EQ(std::get<CtapError>(unknown), CtapError::kInvalidParameter);
}

// Every byte string decodes as at most one message type.
TEST(Wire, NoFrameAmbiguity) {
  Rng rng(16);
  auto accepted_count = [](const Bytes& frame) {
    int count = 0;
    if (!wire::is_error(decode_get_assertion(frame))) ++count;
    if (!wire::is_error(decode_response(frame))) ++count;
    return count;
  };
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(accepted_count(encode_get_assertion(random_request(rng))), 1);
    EXPECT_EQ(accepted_count(encode_response(random_response(rng))), 1);
    EXPECT_LE(accepted_count(rng.bytes(1 + rng.next_u64() % 64)), 1);
  }
}

TEST(Wire, HexDump) {
  Bytes data{0x00, 0x1f, 0xab, 0xff};
  EXPECT_EQ(to_hex(data), "001fabff");
  EXPECT_EQ(from_hex("001fabff"), data);
  EXPECT_THROW(from_hex("0g"), std::invalid_argument);
  EXPECT_THROW(from_hex("abc"), std::invalid_argument);
}

TEST(Cbor, CanonicalMapKeyOrder) {
  // Keys supplied out of order encode sorted, so equal maps encode equal.
  cbor::Map a;
  a.emplace_back(std::uint64_t{5}, true);
  a.emplace_back(std::uint64_t{1}, std::string("x"));
  cbor::Map b;
  b.emplace_back(std::uint64_t{1}, std::string("x"));
  b.emplace_back(std::uint64_t{5}, true);
  EXPECT_EQ(cbor::encode(cbor::Value(std::move(a))), cbor::encode(cbor::Value(std::move(b))));
}

TEST(Cbor, RejectsTrailingBytes) {
  Bytes encoded = cbor::encode(cbor::Value(std::uint64_t{1}));
  encoded.push_back(0x00);
  EXPECT_THROW(cbor::decode(encoded), cbor::DecodeError);
}

TEST(Cbor, RandomMutationFuzz) {
  Rng rng(17);
  // Mutated frames must either decode to an error or to some value; the
  // decoder must never crash or hang.
  for (int i = 0; i < 2000; ++i) {
    Bytes frame = encode_get_assertion(random_request(rng));
    std::size_t idx = rng.next_u64() % frame.size();
    frame[idx] = static_cast<std::uint8_t>(rng.next_u64());
    auto decoded = decode_get_assertion(frame);
    (void)decoded;
  }
}

}  // namespace
}  // namespace fidosim
