#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <openssl/evp.h>

namespace fgtrac {

inline constexpr std::size_t kDigestSize = 32;

/// A 32-byte SHA-256 output. Rendered everywhere as 64 lowercase hex chars.
struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};

  std::string hex() const;

  /// Strict: exactly 64 lowercase hex characters, otherwise ParseError.
  static Digest from_hex(std::string_view text);
  static std::optional<Digest> try_from_hex(std::string_view text);

  static Digest zero() { return Digest{}; }

  friend auto operator<=>(const Digest&, const Digest&) = default;
};

std::string to_hex(std::span<const std::uint8_t> bytes);

Digest sha256(std::string_view data);
Digest sha256(std::span<const std::uint8_t> data);

// Incremental SHA-256 over an OpenSSL EVP context.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view data);
  Sha256& update(std::span<const std::uint8_t> data);
  Sha256& update(std::uint8_t byte);
  Digest finish();

 private:
  EVP_MD_CTX* ctx_;
};

/// Constant-time equality; runtime does not depend on the mismatch position.
bool constant_time_equal(const Digest& a, const Digest& b);

}  // namespace fgtrac
