#include "temp_dir.hpp"

#include <atomic>
#include <unistd.h>

namespace dmt::test {

TempDir::TempDir(const std::string& tag)
{
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_ / "img");
    std::filesystem::create_directories(path_ / "keys");
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

EngineConfig TempDir::engine_config(std::uint64_t n_blocks, double cache_ratio,
                                    std::uint32_t block_size) const
{
    EngineConfig c;
    c.layout.n_blocks = n_blocks;
    c.layout.block_size = block_size;
    c.layout.data_path = path_ / "img" / "data";
    c.layout.meta_path = path_ / "img" / "meta";
    c.anchor_path = path_ / "img" / "anchor";
    c.cache_ratio = cache_ratio;
    return c;
}

RunConfig TempDir::run_config() const
{
    RunConfig c;
    c.data_path = path_ / "img" / "data";
    c.meta_path = path_ / "img" / "meta";
    c.anchor_path = path_ / "img" / "anchor";
    c.key_path = path_ / "keys" / "key";
    return c;
}

} // namespace dmt::test
