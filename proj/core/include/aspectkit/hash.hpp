#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace aspectkit {

std::string sha256_hex(std::string_view data);

// First 16 hex digits of the SHA-256 digest.
std::string short_hash(std::string_view data);

// 64-bit seed derived from a label; used to give independent random streams
// to partitions, interactions and seeds without correlating them.
std::uint64_t derive_seed(std::string_view label);

}  // namespace aspectkit
