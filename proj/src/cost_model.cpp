#include "dmt/cost_model.hpp"

#include <chrono>

#include "dmt/balanced_topology.hpp"
#include "dmt/huffman.hpp"

namespace dmt {

double LatencyTable::at(std::size_t input_bytes) const
{
    auto it = ns_.find(input_bytes);
    if (it == ns_.end()) {
        throw UsageError("latency table has no entry for " + std::to_string(input_bytes) +
                         " bytes");
    }
    return it->second;
}

LatencyTable measure_hash_latency(const CryptoProvider& crypto,
                                  const std::vector<std::size_t>& sizes, std::size_t iterations)
{
    LatencyTable table;
    if (iterations == 0) {
        throw UsageError("need at least one iteration");
    }
    for (std::size_t size : sizes) {
        std::vector<std::uint8_t> buf(size);
        for (std::size_t i = 0; i < size; ++i) {
            buf[i] = static_cast<std::uint8_t>(i * 131 + 7);
        }
        // Feed each output back in so the loop cannot be hoisted.
        Digest sink{};
        for (std::size_t i = 0; i < iterations / 10 + 1; ++i) {
            sink = crypto.keyed_hash(buf);
            buf[0] ^= sink[0];
        }
        auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < iterations; ++i) {
            sink = crypto.keyed_hash(buf);
            buf[0] ^= sink[0];
        }
        auto dt = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0);
        table.set(size, dt.count() / static_cast<double>(iterations));
    }
    return table;
}

std::vector<std::size_t> arity_input_sizes()
{
    return {2 * kDigestSize, 4 * kDigestSize, 8 * kDigestSize, 64 * kDigestSize};
}

double arity_cost(std::uint64_t n_blocks, unsigned k, const LatencyTable& table,
                  std::uint64_t io_size, std::uint32_t block_size)
{
    TreeArity arity(k);
    if (block_size == 0) {
        throw UsageError("block size must be positive");
    }
    const std::uint64_t blocks = (io_size + block_size - 1) / block_size;
    const unsigned height = tree_height(n_blocks, arity.value());
    return static_cast<double>(blocks) * height * table.at(std::size_t{k} * kDigestSize);
}

double amat(const CostParams& p)
{
    if (p.hit_ns < 0 || p.miss_ns < 0 || p.miss_rate < 0 || p.miss_rate > 1) {
        throw UsageError("cost parameters must be non-negative with m <= 1");
    }
    return p.hit_ns + p.miss_rate * p.miss_ns;
}

WorkSplit total_work(const FrequencyProfile& profile, const std::vector<unsigned>& depths,
                     const CostParams& p)
{
    amat(p); // validates
    const auto sum = static_cast<double>(weighted_depth(depths, profile));
    return {sum, p.miss_rate * p.miss_ns * sum};
}

void write_cost_csv(std::ostream& out, std::uint64_t n_blocks, const LatencyTable& table,
                    std::uint64_t io_size, std::uint32_t block_size)
{
    out << "k,height,input_bytes,hash_ns,expected_ns_per_io\n";
    for (unsigned k : {2u, 4u, 8u, 64u}) {
        const std::size_t bytes = std::size_t{k} * kDigestSize;
        out << k << ',' << tree_height(n_blocks, k) << ',' << bytes << ',' << table.at(bytes)
            << ',' << arity_cost(n_blocks, k, table, io_size, block_size) << '\n';
    }
}

} // namespace dmt
