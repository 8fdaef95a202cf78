#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace securefix {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

using AesKey = std::array<std::uint8_t, 16>;

/// Parses a 32-hex-character AES-128 key. Throws ConfigError.
AesKey parse_hex_key(std::string_view hex);

inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;

/// AES-128-GCM with a fresh random nonce. Layout: nonce | ciphertext | tag.
std::string encrypt_artifact(std::string_view plaintext, const AesKey& key);

/// Inverse of encrypt_artifact. Throws AuthenticationError on any tampering.
std::string decrypt_artifact(std::string_view blob, const AesKey& key);

}  // namespace securefix
