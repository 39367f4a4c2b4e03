#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fusereader {

// SHA-256 hex digest (content hashing for manifests and freeze checks).
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);

// Worker count for per-example parallel inference: FUSEREADER_THREADS caps
// it, defaulting to the hardware concurrency.
std::size_t worker_count();

// Applies fn to 0..n-1 on a small thread pool; results land in index order,
// so reductions over the output are deterministic regardless of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fusereader
