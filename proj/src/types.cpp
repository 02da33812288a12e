#include "dmt/types.hpp"

#include <numeric>

namespace dmt {

std::string to_hex(const std::uint8_t* data, std::size_t len)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xf]);
    }
    return out;
}

FrequencyProfile::FrequencyProfile(std::vector<std::uint64_t> weights)
    : weights_(std::move(weights))
{
}

std::uint64_t FrequencyProfile::total() const
{
    return std::accumulate(weights_.begin(), weights_.end(), std::uint64_t{0});
}

void FrequencyProfile::add(BlockId b, std::uint64_t count)
{
    if (b.value >= weights_.size()) {
        throw RangeError("block " + std::to_string(b.value) +
                         " outside frequency profile of size " +
                         std::to_string(weights_.size()));
    }
    weights_[b.value] += count;
}

TreeArity::TreeArity(unsigned k) : k_(k)
{
    if (k != 2 && k != 4 && k != 8 && k != 64) {
        throw UsageError("unsupported tree arity " + std::to_string(k) +
                         " (expected 2, 4, 8 or 64)");
    }
}

std::vector<BlockId> blocks_for_io(std::uint64_t offset, std::uint64_t length,
                                   std::uint32_t block_size,
                                   std::uint64_t capacity)
{
    if (block_size == 0) {
        throw UsageError("block size must be positive");
    }
    if (offset > capacity || length > capacity - offset) {
        throw RangeError("I/O [" + std::to_string(offset) + ", +" +
                         std::to_string(length) + ") exceeds capacity " +
                         std::to_string(capacity));
    }
    std::vector<BlockId> out;
    if (length == 0) {
        return out;
    }
    const std::uint64_t first = offset / block_size;
    const std::uint64_t last = (offset + length - 1) / block_size;
    out.reserve(last - first + 1);
    for (std::uint64_t b = first; b <= last; ++b) {
        out.push_back(BlockId{b});
    }
    return out;
}

IntegrityError::IntegrityError(IntegrityReport report)
    : Error("integrity failure: " + report.what + " (block " +
            std::to_string(report.block.value) + ", level " +
            std::to_string(report.level) + ")"),
      report_(std::move(report))
{
}

} // namespace dmt
