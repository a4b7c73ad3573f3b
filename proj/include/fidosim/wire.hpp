#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fidosim/bytes.hpp"
#include "fidosim/cbor.hpp"

namespace fidosim::wire {

inline constexpr std::uint8_t kCmdGetAssertion = 0x02;
inline constexpr std::uint8_t kStatusOk = 0x00;

inline constexpr std::size_t kClientDataHashLen = 32;
inline constexpr std::size_t kAuthDataLen = 37;

/// Closed error set; a failed silent probe always surfaces as kNoCredentials.
enum class CtapError : std::uint8_t {
  kInvalidParameter = 0x02,
  kInvalidLength = 0x03,
  kOperationDenied = 0x27,
  kNoCredentials = 0x2e,
};

inline const char* ctap_error_name(CtapError e) {
  switch (e) {
    case CtapError::kInvalidParameter: return "INVALID_PARAMETER";
    case CtapError::kInvalidLength: return "INVALID_LENGTH";
    case CtapError::kOperationDenied: return "OPERATION_DENIED";
    case CtapError::kNoCredentials: return "NO_CREDENTIALS";
  }
  return "UNKNOWN";
}

/// type is always "public-key"; only the id varies.
struct CredentialDescriptor {
  Bytes id;

  friend bool operator==(const CredentialDescriptor&, const CredentialDescriptor&) = default;
};

struct GetAssertionRequest {
  std::string rp_id;
  std::array<std::uint8_t, kClientDataHashLen> client_data_hash{};
  std::vector<CredentialDescriptor> allow_list;
  bool user_presence = true;  // options.up=false denotes a silent request

  friend bool operator==(const GetAssertionRequest&, const GetAssertionRequest&) = default;
};

/// auth_data layout: rp_id_hash(32) || flags(1) || sign_count(4, big-endian).
struct GetAssertionResponse {
  CredentialDescriptor credential;
  Bytes auth_data;
  Bytes signature;

  std::uint32_t sign_count() const { return get_u32_be(std::span(auth_data).subspan(33, 4)); }
  std::uint8_t flags() const { return auth_data[32]; }

  friend bool operator==(const GetAssertionResponse&, const GetAssertionResponse&) = default;
};

inline Bytes make_auth_data(const std::array<std::uint8_t, 32>& rp_id_hash, std::uint8_t flags,
                            std::uint32_t sign_count) {
  Bytes out(rp_id_hash.begin(), rp_id_hash.end());
  out.push_back(flags);
  put_u32_be(out, sign_count);
  return out;
}

template <typename T>
using Decoded = std::variant<T, CtapError>;

template <typename T>
bool is_error(const Decoded<T>& d) {
  return std::holds_alternative<CtapError>(d);
}

namespace detail {

inline cbor::Value descriptor_value(const CredentialDescriptor& desc) {
  cbor::Map m;
  m.emplace_back(std::string("id"), desc.id);
  m.emplace_back(std::string("type"), std::string("public-key"));
  return cbor::Value(std::move(m));
}

inline std::optional<CredentialDescriptor> parse_descriptor(const cbor::Value& v) {
  if (!v.is_map()) return std::nullopt;
  const cbor::Value* id = cbor::map_get(v.as_map(), "id");
  const cbor::Value* type = cbor::map_get(v.as_map(), "type");
  if (!id || !id->is_bytes() || id->as_bytes().empty()) return std::nullopt;
  if (!type || !type->is_text() || type->as_text() != "public-key") return std::nullopt;
  return CredentialDescriptor{id->as_bytes()};
}

}  // namespace detail

/// Command byte 0x02 followed by a canonical CBOR map with integer keys
/// 1=rpId, 2=clientDataHash, 3=allowList, 5=options. Deterministic.
inline Bytes encode_get_assertion(const GetAssertionRequest& req) {
  cbor::Map root;
  root.emplace_back(std::uint64_t{1}, req.rp_id);
  root.emplace_back(std::uint64_t{2}, Bytes(req.client_data_hash.begin(), req.client_data_hash.end()));
  cbor::Array allow;
  allow.reserve(req.allow_list.size());
  for (const auto& desc : req.allow_list) allow.push_back(detail::descriptor_value(desc));
  root.emplace_back(std::uint64_t{3}, std::move(allow));
  cbor::Map options;
  options.emplace_back(std::string("up"), req.user_presence);
  root.emplace_back(std::uint64_t{5}, std::move(options));

  Bytes frame{kCmdGetAssertion};
  append(frame, cbor::encode(cbor::Value(std::move(root))));
  return frame;
}

inline Decoded<GetAssertionRequest> decode_get_assertion(std::span<const std::uint8_t> frame) {
  if (frame.empty() || frame[0] != kCmdGetAssertion) return CtapError::kInvalidParameter;
  try {
    cbor::Value root = cbor::decode(frame.subspan(1));
    const auto& map = root.as_map();
    const cbor::Value* rp_id = cbor::map_get(map, std::uint64_t{1});
    const cbor::Value* cdh = cbor::map_get(map, std::uint64_t{2});
    const cbor::Value* allow = cbor::map_get(map, std::uint64_t{3});
    const cbor::Value* options = cbor::map_get(map, std::uint64_t{5});
    if (!rp_id || !rp_id->is_text() || !cdh || !cdh->is_bytes() || !allow || !allow->is_array() ||
        !options || !options->is_map()) {
      return CtapError::kInvalidParameter;
    }
    if (cdh->as_bytes().size() != kClientDataHashLen) return CtapError::kInvalidParameter;
    const cbor::Value* up = cbor::map_get(options->as_map(), "up");
    if (!up || !up->is_bool()) return CtapError::kInvalidParameter;

    GetAssertionRequest req;
    req.rp_id = rp_id->as_text();
    std::copy(cdh->as_bytes().begin(), cdh->as_bytes().end(), req.client_data_hash.begin());
    for (const auto& item : allow->as_array()) {
      auto desc = detail::parse_descriptor(item);
      if (!desc) return CtapError::kInvalidParameter;
      req.allow_list.push_back(std::move(*desc));
    }
    req.user_presence = up->as_bool();
    return req;
  } catch (const cbor::DecodeError&) {
    return CtapError::kInvalidParameter;
  }
}

/// Status byte 0x00 followed by a canonical CBOR map with integer keys
/// 1=credential, 2=authData, 3=signature.
inline Bytes encode_response(const GetAssertionResponse& resp) {
  if (resp.auth_data.size() != kAuthDataLen) {
    throw std::invalid_argument("encode_response: auth_data must be 37 bytes");
  }
  if (resp.credential.id.empty() || resp.signature.empty()) {
    throw std::invalid_argument("encode_response: empty credential or signature");
  }
  cbor::Map root;
  root.emplace_back(std::uint64_t{1}, detail::descriptor_value(resp.credential));
  root.emplace_back(std::uint64_t{2}, resp.auth_data);
  root.emplace_back(std::uint64_t{3}, resp.signature);

  Bytes frame{kStatusOk};
  append(frame, cbor::encode(cbor::Value(std::move(root))));
  return frame;
}

inline Bytes encode_error(CtapError code) { return Bytes{static_cast<std::uint8_t>(code)}; }

inline std::optional<CtapError> parse_error_byte(std::uint8_t b) {
  switch (b) {
    case 0x02: return CtapError::kInvalidParameter;
    case 0x03: return CtapError::kInvalidLength;
    case 0x27: return CtapError::kOperationDenied;
    case 0x2e: return CtapError::kNoCredentials;
    default: return std::nullopt;
  }
}

/// Accepts either a success frame or a single-byte error frame. Parse
/// failures surface as kInvalidParameter, like any malformed input.
inline Decoded<GetAssertionResponse> decode_response(std::span<const std::uint8_t> frame) {
  if (frame.empty()) return CtapError::kInvalidParameter;
  if (frame.size() == 1) {
    auto code = parse_error_byte(frame[0]);
    return code ? Decoded<GetAssertionResponse>(*code)
                : Decoded<GetAssertionResponse>(CtapError::kInvalidParameter);
  }
  if (frame[0] != kStatusOk) return CtapError::kInvalidParameter;
  try {
    cbor::Value root = cbor::decode(frame.subspan(1));
    const auto& map = root.as_map();
    const cbor::Value* cred = cbor::map_get(map, std::uint64_t{1});
    const cbor::Value* auth_data = cbor::map_get(map, std::uint64_t{2});
    const cbor::Value* sig = cbor::map_get(map, std::uint64_t{3});
    if (!cred || !auth_data || !auth_data->is_bytes() || !sig || !sig->is_bytes()) {
      return CtapError::kInvalidParameter;
    }
    if (auth_data->as_bytes().size() != kAuthDataLen) return CtapError::kInvalidParameter;
    if (sig->as_bytes().empty()) return CtapError::kInvalidParameter;
    auto desc = detail::parse_descriptor(*cred);
    if (!desc) return CtapError::kInvalidParameter;
    return GetAssertionResponse{std::move(*desc), auth_data->as_bytes(), sig->as_bytes()};
  } catch (const cbor::DecodeError&) {
    return CtapError::kInvalidParameter;
  }
}

}  // namespace fidosim::wire
