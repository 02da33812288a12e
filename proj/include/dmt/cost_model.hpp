#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <vector>

#include "dmt/crypto.hpp"
#include "dmt/types.hpp"

namespace dmt {

/// Mean keyed-hash latency per input size, measured on this host.
class LatencyTable {
public:
    void set(std::size_t input_bytes, double ns) { ns_[input_bytes] = ns; }
    /// Throws UsageError when the size was not measured.
    double at(std::size_t input_bytes) const;
    bool contains(std::size_t input_bytes) const { return ns_.count(input_bytes) != 0; }
    const std::map<std::size_t, double>& entries() const { return ns_; }

private:
    std::map<std::size_t, double> ns_;
};

/// Times `iterations` hashes per size after a warmup.
LatencyTable measure_hash_latency(const CryptoProvider& crypto,
                                  const std::vector<std::size_t>& sizes,
                                  std::size_t iterations = 10000);

/// Input sizes of one node hash for every supported arity (k * 32 bytes).
std::vector<std::size_t> arity_input_sizes();

/// Hashing ns for one I/O: blocks per I/O * tree height * hash(k*32).
double arity_cost(std::uint64_t n_blocks, unsigned k, const LatencyTable& table,
                  std::uint64_t io_size, std::uint32_t block_size = kDefaultBlockSize);

struct CostParams {
    double hit_ns = 0.0;   // H
    double miss_rate = 0.0; // m
    double miss_ns = 0.0;  // D
};

/// H + m * D. Throws UsageError on negative inputs or m > 1.
double amat(const CostParams& p);

struct WorkSplit {
    double base_work = 0.0;
    double io_cost = 0.0;
    double total() const { return base_work + io_cost; }
};

/// base = sum f_i * depth_i, io = m * D * sum f_i * depth_i.
WorkSplit total_work(const FrequencyProfile& profile, const std::vector<unsigned>& depths,
                     const CostParams& p);

/// CSV with header `k,height,input_bytes,hash_ns,expected_ns_per_io`.
void write_cost_csv(std::ostream& out, std::uint64_t n_blocks, const LatencyTable& table,
                    std::uint64_t io_size, std::uint32_t block_size = kDefaultBlockSize);

} // namespace dmt
