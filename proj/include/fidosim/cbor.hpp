#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fidosim/bytes.hpp"

namespace fidosim::cbor {

/// Thrown on any malformed input; callers map it to a protocol error code.
class DecodeError : public std::runtime_error {
 public:
  explicit DecodeError(const std::string& what) : std::runtime_error("cbor: " + what) {}
};

class Value;
using Array = std::vector<Value>;
using Map = std::vector<std::pair<Value, Value>>;

/// Small CBOR subset sufficient for CTAP traffic: unsigned integers, byte
/// strings, text strings, arrays, maps, and booleans. Encoding is canonical
/// (definite lengths, minimal-width heads, map keys sorted by encoded bytes).
class Value {
 public:
  Value() : v_(std::uint64_t{0}) {}
  Value(std::uint64_t v) : v_(v) {}
  Value(int v) : v_(static_cast<std::uint64_t>(v)) {
    if (v < 0) throw std::invalid_argument("cbor: negative integers unsupported");
  }
  Value(Bytes v) : v_(std::move(v)) {}
  Value(std::string v) : v_(std::move(v)) {}
  Value(const char* v) : v_(std::string(v)) {}
  Value(Array v) : v_(std::move(v)) {}
  Value(Map v) : v_(std::move(v)) {}
  Value(bool v) : v_(v) {}

  bool is_unsigned() const { return std::holds_alternative<std::uint64_t>(v_); }
  bool is_bytes() const { return std::holds_alternative<Bytes>(v_); }
  bool is_text() const { return std::holds_alternative<std::string>(v_); }
  bool is_array() const { return std::holds_alternative<Array>(v_); }
  bool is_map() const { return std::holds_alternative<Map>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }

  std::uint64_t as_unsigned() const { return get<std::uint64_t>("unsigned"); }
  const Bytes& as_bytes() const { return get<Bytes>("bytes"); }
  const std::string& as_text() const { return get<std::string>("text"); }
  const Array& as_array() const { return get<Array>("array"); }
  const Map& as_map() const { return get<Map>("map"); }
  bool as_bool() const { return get<bool>("bool"); }

  friend bool operator==(const Value& a, const Value& b) { return a.v_ == b.v_; }

 private:
  template <typename T>
  const T& get(const char* name) const {
    if (!std::holds_alternative<T>(v_)) throw DecodeError(std::string("expected ") + name);
    return std::get<T>(v_);
  }

  std::variant<std::uint64_t, Bytes, std::string, Array, Map, bool> v_;
};

namespace detail {

inline void encode_head(Bytes& out, std::uint8_t major, std::uint64_t value) {
  std::uint8_t m = static_cast<std::uint8_t>(major << 5);
  if (value < 24) {
    out.push_back(m | static_cast<std::uint8_t>(value));
  } else if (value <= 0xff) {
    out.push_back(m | 24);
    out.push_back(static_cast<std::uint8_t>(value));
  } else if (value <= 0xffff) {
    out.push_back(m | 25);
    out.push_back(static_cast<std::uint8_t>(value >> 8));
    out.push_back(static_cast<std::uint8_t>(value));
  } else if (value <= 0xffffffff) {
    out.push_back(m | 26);
    for (int i = 24; i >= 0; i -= 8) out.push_back(static_cast<std::uint8_t>(value >> i));
  } else {
    out.push_back(m | 27);
    for (int i = 56; i >= 0; i -= 8) out.push_back(static_cast<std::uint8_t>(value >> i));
  }
}

inline void encode_value(Bytes& out, const Value& v);

inline void encode_map(Bytes& out, const Map& map) {
  std::vector<std::pair<Bytes, const Value*>> entries;
  entries.reserve(map.size());
  for (const auto& [k, val] : map) {
    Bytes key_bytes;
    encode_value(key_bytes, k);
    entries.emplace_back(std::move(key_bytes), &val);
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  encode_head(out, 5, map.size());
  for (auto& [key_bytes, val] : entries) {
    append(out, key_bytes);
    encode_value(out, *val);
  }
}

inline void encode_value(Bytes& out, const Value& v) {
  if (v.is_unsigned()) {
    encode_head(out, 0, v.as_unsigned());
  } else if (v.is_bytes()) {
    encode_head(out, 2, v.as_bytes().size());
    append(out, v.as_bytes());
  } else if (v.is_text()) {
    const auto& t = v.as_text();
    encode_head(out, 3, t.size());
    out.insert(out.end(), t.begin(), t.end());
  } else if (v.is_array()) {
    encode_head(out, 4, v.as_array().size());
    for (const auto& item : v.as_array()) encode_value(out, item);
  } else if (v.is_map()) {
    encode_map(out, v.as_map());
  } else {
    out.push_back(v.as_bool() ? 0xf5 : 0xf4);
  }
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> data) : data_(data) {}

  Value read(int depth = 0) {
    if (depth > kMaxDepth) throw DecodeError("nesting too deep");
    std::uint8_t initial = next();
    std::uint8_t major = initial >> 5;
    std::uint8_t info = initial & 0x1f;
    switch (major) {
      case 0:
        return Value(read_length(info));
      case 2: {
        std::uint64_t len = read_length(info);
        return Value(read_raw(len));
      }
      case 3: {
        std::uint64_t len = read_length(info);
        Bytes raw = read_raw(len);
        return Value(std::string(raw.begin(), raw.end()));
      }
      case 4: {
        std::uint64_t len = read_length(info);
        if (len > remaining()) throw DecodeError("array length exceeds input");
        Array items;
        items.reserve(static_cast<std::size_t>(len));
        for (std::uint64_t i = 0; i < len; ++i) items.push_back(read(depth + 1));
        return Value(std::move(items));
      }
      case 5: {
        std::uint64_t len = read_length(info);
        if (len > remaining()) throw DecodeError("map length exceeds input");
        Map entries;
        entries.reserve(static_cast<std::size_t>(len));
        for (std::uint64_t i = 0; i < len; ++i) {
          Value key = read(depth + 1);
          Value val = read(depth + 1);
          entries.emplace_back(std::move(key), std::move(val));
        }
        return Value(std::move(entries));
      }
      case 7:
        if (info == 20) return Value(false);
        if (info == 21) return Value(true);
        throw DecodeError("unsupported simple value");
      default:
        throw DecodeError("unsupported major type");
    }
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  static constexpr int kMaxDepth = 16;

  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t next() {
    if (pos_ >= data_.size()) throw DecodeError("truncated input");
    return data_[pos_++];
  }

  Bytes read_raw(std::uint64_t len) {
    if (len > remaining()) throw DecodeError("string length exceeds input");
    Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
              data_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += static_cast<std::size_t>(len);
    return out;
  }

  std::uint64_t read_length(std::uint8_t info) {
    if (info < 24) return info;
    int extra = 0;
    switch (info) {
      case 24: extra = 1; break;
      case 25: extra = 2; break;
      case 26: extra = 4; break;
      case 27: extra = 8; break;
      default: throw DecodeError("indefinite lengths unsupported");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < extra; ++i) v = (v << 8) | next();
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Bytes encode(const Value& v) {
  Bytes out;
  detail::encode_value(out, v);
  return out;
}

/// Strict decode: exactly one item, no trailing bytes.
inline Value decode(std::span<const std::uint8_t> data) {
  detail::Reader reader(data);
  Value v = reader.read();
  if (!reader.at_end()) throw DecodeError("trailing bytes");
  return v;
}

/// Map lookup by unsigned key; nullptr when absent.
inline const Value* map_get(const Map& map, std::uint64_t key) {
  for (const auto& [k, v] : map) {
    if (k.is_unsigned() && k.as_unsigned() == key) return &v;
  }
  return nullptr;
}

inline const Value* map_get(const Map& map, std::string_view key) {
  for (const auto& [k, v] : map) {
    if (k.is_text() && k.as_text() == key) return &v;
  }
  return nullptr;
}

}  // namespace fidosim::cbor
