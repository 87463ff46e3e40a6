// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace xfer {

using Sha256Digest = std::array<uint8_t, 32>;

// Incremental SHA-256.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const uint8_t> bytes);
    void update(std::string_view text);
    Sha256Digest finish();

private:
    void* ctx_;
};

Sha256Digest sha256(std::span<const uint8_t> bytes);
std::string to_hex(std::span<const uint8_t> bytes);
std::string sha256_hex(std::string_view text);
// Hex digest of a file's bytes.
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace xfer
