#pragma once

#include <filesystem>
#include <string>

#include "dmt/engine.hpp"
#include "dmt/runner.hpp"

namespace dmt::test {

/// Directory removed on destruction. Keys get their own subdirectory so
/// they never share a directory with the images.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "dmt");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

    /// Engine config for images inside this directory.
    EngineConfig engine_config(std::uint64_t n_blocks, double cache_ratio = 0.1,
                               std::uint32_t block_size = kDefaultBlockSize) const;
    /// Run config with the image and key paths filled in.
    RunConfig run_config() const;

private:
    std::filesystem::path path_;
};

} // namespace dmt::test
