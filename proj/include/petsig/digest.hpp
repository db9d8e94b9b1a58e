// Copyright 2026 the petsig authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <openssl/evp.h>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "petsig/errors.hpp"

namespace petsig {

namespace detail {

struct EvpCtxDel {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

inline std::string hex_digest(const unsigned char* bytes, unsigned int n) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (unsigned int i = 0; i < n; ++i) {
    out.push_back(kHex[bytes[i] >> 4]);
    out.push_back(kHex[bytes[i] & 0x0F]);
  }
  return out;
}

}  // namespace detail

/// Lowercase hex SHA-256 of a byte buffer.
inline std::string sha256_hex(const void* data, std::size_t size) {
  std::unique_ptr<EVP_MD_CTX, detail::EvpCtxDel> ctx(EVP_MD_CTX_new());
  unsigned char bytes[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data, size) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), bytes, &n) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  return detail::hex_digest(bytes, n);
}

inline std::string sha256_hex(const std::string& text) {
  return sha256_hex(text.data(), text.size());
}

/// Streaming digest of a file's raw bytes.
inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open for digest: " + path);
  }
  std::unique_ptr<EVP_MD_CTX, detail::EvpCtxDel> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0 &&
        EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(got)) != 1) {
      throw std::runtime_error("sha256 digest failed");
    }
  }
  if (in.bad()) {
    throw IoError("read failed during digest: " + path);
  }
  unsigned char bytes[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (EVP_DigestFinal_ex(ctx.get(), bytes, &n) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  return detail::hex_digest(bytes, n);
}

/// Digest of a JSON document in canonical form: keys sorted, no whitespace.
/// nlohmann::json already stores object keys sorted, so dump() is canonical.
inline std::string json_digest(const nlohmann::json& doc) {
  return sha256_hex(doc.dump());
}

}  // namespace petsig
