#pragma once

#include <compare>
#include <string>
#include <string_view>

#include "fgtrac/digest.hpp"

namespace fgtrac {

/// SHA-256 of a subject's raw identifier. The only identity carried by
/// downstream records.
struct PseudonymousId {
  Digest digest;

  std::string hex() const { return digest.hex(); }
  static PseudonymousId from_hex(std::string_view text) { return {Digest::from_hex(text)}; }

  friend auto operator<=>(const PseudonymousId&, const PseudonymousId&) = default;
};

struct AccessToken {
  Digest token;
  PseudonymousId subject;

  friend bool operator==(const AccessToken&, const AccessToken&) = default;
};

/// SHA-256 over the exact UTF-8 bytes of `user_id`; no normalization.
PseudonymousId hash_id(std::string_view user_id);

/// token = SHA-256(secret || 0x1F || subject digest). Throws EmptySecret.
AccessToken issue_token(std::string_view secret, const PseudonymousId& subject);

/// Compares presented.token with the expected token in constant time.
/// An empty secret never authorizes anything.
bool check_token(std::string_view secret, const PseudonymousId& subject,
                 const AccessToken& presented);

}  // namespace fgtrac
