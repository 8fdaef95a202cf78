#include "securefix/crypto.h"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <memory>

#include "securefix/errors.h"

namespace securefix {
namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

CipherCtx new_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  return ctx;
}

const unsigned char* bytes(std::string_view s) { return reinterpret_cast<const unsigned char*>(s.data()); }

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

AesKey parse_hex_key(std::string_view hex) {
  if (hex.size() != 32) {
    throw ConfigError("AES-128 key must be 32 hex characters, got " + std::to_string(hex.size()));
  }
  AesKey key{};
  for (std::size_t i = 0; i < 16; ++i) {
    auto nibble = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw ConfigError("AES-128 key contains a non-hex character");
    };
    key[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) * 16 + nibble(hex[2 * i + 1]));
  }
  return key;
}

std::string encrypt_artifact(std::string_view plaintext, const AesKey& key) {
  std::string out(kNonceSize + plaintext.size() + kTagSize, '\0');
  auto* buf = reinterpret_cast<unsigned char*>(out.data());
  if (RAND_bytes(buf, static_cast<int>(kNonceSize)) != 1) throw std::runtime_error("RAND_bytes failed");

  CipherCtx ctx = new_ctx();
  int len = 0;
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kNonceSize), nullptr) != 1 ||
      EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), buf) != 1) {
    throw std::runtime_error("AES-GCM init failed");
  }
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), buf + kNonceSize, &len, bytes(plaintext), static_cast<int>(plaintext.size())) != 1) {
    throw std::runtime_error("AES-GCM encrypt failed");
  }
  int final_len = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), buf + kNonceSize + len, &final_len) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(kTagSize),
                          buf + kNonceSize + plaintext.size()) != 1) {
    throw std::runtime_error("AES-GCM finalize failed");
  }
  return out;
}

std::string decrypt_artifact(std::string_view blob, const AesKey& key) {
  if (blob.size() < kNonceSize + kTagSize) throw AuthenticationError("encrypted artifact is truncated");
  std::size_t body = blob.size() - kNonceSize - kTagSize;
  std::string out(body, '\0');
  std::string tag(blob.substr(kNonceSize + body));

  CipherCtx ctx = new_ctx();
  int len = 0;
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kNonceSize), nullptr) != 1 ||
      EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), bytes(blob)) != 1) {
    throw std::runtime_error("AES-GCM init failed");
  }
  if (body > 0 && EVP_DecryptUpdate(ctx.get(), reinterpret_cast<unsigned char*>(out.data()), &len,
                                    bytes(blob) + kNonceSize, static_cast<int>(body)) != 1) {
    throw AuthenticationError("encrypted artifact failed to decrypt");
  }
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(kTagSize), tag.data()) != 1) {
    throw std::runtime_error("AES-GCM set tag failed");
  }
  int final_len = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), reinterpret_cast<unsigned char*>(out.data()) + len, &final_len) != 1) {
    throw AuthenticationError("encrypted artifact failed authentication (wrong key or tampered data)");
  }
  return out;
}

}  // namespace securefix
