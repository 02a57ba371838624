#include "fgtrac/identity.hpp"

#include "fgtrac/error.hpp"

namespace fgtrac {

namespace {
constexpr std::uint8_t kTokenSeparator = 0x1f;
}

PseudonymousId hash_id(std::string_view user_id) { return {sha256(user_id)}; }

AccessToken issue_token(std::string_view secret, const PseudonymousId& subject) {
  if (secret.empty()) throw Error(ErrorCode::EmptySecret, "token secret must be non-empty");
  Sha256 h;
  h.update(secret).update(kTokenSeparator).update(subject.digest.bytes);
  return {h.finish(), subject};
}

bool check_token(std::string_view secret, const PseudonymousId& subject,
                 const AccessToken& presented) {
  if (secret.empty()) return false;
  return constant_time_equal(issue_token(secret, subject).token, presented.token);
}

}  // namespace fgtrac
