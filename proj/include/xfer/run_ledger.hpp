// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace xfer::experiment {

// Sorted keys, integral floats folded to integers; equal configs written in
// any field order or number spelling serialize identically.
nlohmann::json canonicalize(const nlohmann::json& value);
std::string canonical_dump(const nlohmann::json& value);
// SHA-256 hex of canonical_dump(value).
std::string config_hash(const nlohmann::json& value);

std::string utc_timestamp();

// Append-only line-delimited JSON store. Each entry is one object with at
// least "config_hash". Appends take an exclusive flock and are written with a
// single write(2) on an O_APPEND descriptor.
class RunLedger {
public:
    explicit RunLedger(std::filesystem::path path);

    const std::filesystem::path& path() const { return path_; }

    void append(const nlohmann::json& entry) const;
    std::vector<nlohmann::json> entries() const;
    std::optional<nlohmann::json> find(const std::string& config_hash) const;
    bool contains(const std::string& config_hash) const { return find(config_hash).has_value(); }

private:
    std::filesystem::path path_;
};

// Advisory ownership of a ledger for the lifetime of the object (a sibling
// "<ledger>.lock" file). A second owner fails immediately with ConfigError.
class LedgerLock {
public:
    explicit LedgerLock(const std::filesystem::path& ledger_path);
    ~LedgerLock();
    LedgerLock(const LedgerLock&) = delete;
    LedgerLock& operator=(const LedgerLock&) = delete;

private:
    int fd_ = -1;
};

}  // namespace xfer::experiment
