#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fable {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First 16 hex digits of the SHA-256; used for prompt and config digests.
std::string short_digest(std::string_view data);

/// 64-bit FNV-1a. Stable across platforms, used for feature hashing and seed derivation.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace fable
