#include "fgtrac/digest.hpp"

#include <openssl/crypto.h>

#include "fgtrac/error.hpp"

namespace fgtrac {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySecret: return "EmptySecret";
    case ErrorCode::InvalidEvent: return "InvalidEvent";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SequenceGap: return "SequenceGap";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::RangeOverlap: return "RangeOverlap";
    case ErrorCode::RangeOutOfBounds: return "RangeOutOfBounds";
    case ErrorCode::EmptyLeafSet: return "EmptyLeafSet";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnknownBatch: return "UnknownBatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidRatios: return "InvalidRatios";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCheckpointSet: return "EmptyCheckpointSet";
    case ErrorCode::MissingRoleEvent: return "MissingRoleEvent";
    case ErrorCode::TargetNotFound: return "TargetNotFound";
    case ErrorCode::RunExists: return "RunExists";
  }
  return "Unknown";
}

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;  // uppercase is rejected on purpose: one rendering per digest
}

// Explicitly fetched once; the implicit fetch behind EVP_sha256() costs more
// than hashing a short identifier.
const EVP_MD* sha256_md() {
  static EVP_MD* md = EVP_MD_fetch(nullptr, "SHA256", nullptr);
  if (md == nullptr) throw std::runtime_error("SHA256 unavailable from OpenSSL");
  return md;
}

}  // namespace

std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out(bytes.size() * 2, '0');
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out[2 * i] = kHexDigits[bytes[i] >> 4];
    out[2 * i + 1] = kHexDigits[bytes[i] & 0x0f];
  }
  return out;
}

std::string Digest::hex() const { return to_hex(bytes); }

std::optional<Digest> Digest::try_from_hex(std::string_view text) {
  if (text.size() != 2 * kDigestSize) return std::nullopt;
  Digest d;
  for (std::size_t i = 0; i < kDigestSize; ++i) {
    int hi = nibble(text[2 * i]);
    int lo = nibble(text[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    d.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return d;
}

Digest Digest::from_hex(std::string_view text) {
  auto d = try_from_hex(text);
  if (!d) throw Error(ErrorCode::ParseError, "not a 64-char lowercase hex digest");
  return *d;
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, sha256_md(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx_);
    throw std::runtime_error("EVP sha256 init failed");
  }
}

Sha256::~Sha256() { EVP_MD_CTX_free(ctx_); }

Sha256& Sha256::update(std::string_view data) {
  EVP_DigestUpdate(ctx_, data.data(), data.size());
  return *this;
}

Sha256& Sha256::update(std::span<const std::uint8_t> data) {
  EVP_DigestUpdate(ctx_, data.data(), data.size());
  return *this;
}

Sha256& Sha256::update(std::uint8_t byte) {
  EVP_DigestUpdate(ctx_, &byte, 1);
  return *this;
}

Digest Sha256::finish() {
  Digest d;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx_, d.bytes.data(), &len);
  return d;
}

Digest sha256(std::string_view data) {
  Digest d;
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, sha256_md(), nullptr);
  return d;
}

Digest sha256(std::span<const std::uint8_t> data) {
  Digest d;
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, sha256_md(), nullptr);
  return d;
}

bool constant_time_equal(const Digest& a, const Digest& b) {
  return CRYPTO_memcmp(a.bytes.data(), b.bytes.data(), kDigestSize) == 0;
}

}  // namespace fgtrac
