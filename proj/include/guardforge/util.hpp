#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace guardforge {

/// 64-bit FNV-1a. Used to derive per-output request seeds and selection
/// seeds; the constants are fixed so downstream tooling can reproduce them.
uint64_t fnv1a64(std::string_view data);

/// Seed for the i-th draw of a sample: fnv1a64("<base>:<id>:<i>"). Masked to
/// 63 bits so it survives JSON integer round-trips everywhere.
uint64_t derive_seed(uint64_t base, std::string_view sample_id, uint64_t index);

/// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's contents, lowercase hex. Throws Io if unreadable.
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);

/// Writes via a temp file in the same directory and renames into place.
void write_file_atomic(const std::string& path, std::string_view content);

std::vector<std::string> split_lines(std::string_view text);

/// Runs fn(i) for i in [0, n) on up to max_inflight worker threads. Rethrows
/// the first exception after all workers have stopped.
void parallel_for(size_t n, size_t max_inflight, const std::function<void(size_t)>& fn);

} // namespace guardforge
