// SPDX-License-Identifier: Apache-2.0

#include "xfer/run_ledger.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fmt/format.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>

#include "xfer/errors.hpp"
#include "xfer/hashing.hpp"

namespace xfer::experiment {

using nlohmann::json;

json canonicalize(const json& value) {
    switch (value.type()) {
        case json::value_t::object: {
            json out = json::object();
            for (const auto& [k, v] : value.items()) out[k] = canonicalize(v);
            return out;
        }
        case json::value_t::array: {
            json out = json::array();
            for (const auto& v : value) out.push_back(canonicalize(v));
            return out;
        }
        case json::value_t::number_float: {
            const double d = value.get<double>();
            if (std::isfinite(d) && std::trunc(d) == d && std::abs(d) < 9.0e15) return static_cast<int64_t>(d);
            return d;
        }
        case json::value_t::number_unsigned: {
            const uint64_t u = value.get<uint64_t>();
            if (u <= static_cast<uint64_t>(INT64_MAX)) return static_cast<int64_t>(u);
            return u;
        }
        default: return value;
    }
}

std::string canonical_dump(const json& value) { return canonicalize(value).dump(); }

std::string config_hash(const json& value) { return sha256_hex(canonical_dump(value)); }

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunLedger::RunLedger(std::filesystem::path path) : path_(std::move(path)) {}

void RunLedger::append(const json& entry) const {
    if (!entry.is_object() || !entry.contains("config_hash")) {
        throw std::invalid_argument("ledger entries must be objects with a config_hash");
    }
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    const std::string line = entry.dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw std::runtime_error(fmt::format("cannot open ledger '{}': {}", path_.string(), std::strerror(errno)));
    if (::flock(fd, LOCK_EX) != 0) {
        ::close(fd);
        throw std::runtime_error(fmt::format("cannot lock ledger '{}'", path_.string()));
    }
    const ssize_t written = ::write(fd, line.data(), line.size());
    const bool ok = written == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (!ok) throw std::runtime_error(fmt::format("short write to ledger '{}'", path_.string()));
}

std::vector<json> RunLedger::entries() const {
    std::vector<json> out;
    std::ifstream in(path_);
    if (!in) return out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw ConfigError(fmt::format("{}:{}: malformed ledger line: {}", path_.string(), lineno, e.what()));
        }
    }
    return out;
}

std::optional<json> RunLedger::find(const std::string& hash) const {
    for (auto& e : entries()) {
        if (e.value("config_hash", std::string()) == hash && e.value("status", std::string("completed")) == "completed") {
            return e;
        }
    }
    return std::nullopt;
}

LedgerLock::LedgerLock(const std::filesystem::path& ledger_path) {
    const std::filesystem::path lock_path = ledger_path.string() + ".lock";
    if (lock_path.has_parent_path()) std::filesystem::create_directories(lock_path.parent_path());
    fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error(fmt::format("cannot open '{}'", lock_path.string()));
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw ConfigError(fmt::format("ledger '{}' is in use by another suite runner", ledger_path.string()));
    }
}

LedgerLock::~LedgerLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace xfer::experiment
