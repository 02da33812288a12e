#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dmt/crypto.hpp"
#include "dmt/engine.hpp"
#include "dmt/workload.hpp"

namespace dmt {

struct TreeSpec {
    enum class Kind { balanced, huffman, dmt };
    Kind kind = Kind::balanced;
    unsigned arity = 2;
    std::filesystem::path trace; // huffman only

    /// "balanced:K", "huffman:TRACE" or "dmt".
    static TreeSpec parse(const std::string& text);
    std::string text() const;
};

struct RunConfig {
    std::uint64_t capacity_bytes = 256ULL << 20;
    std::uint32_t block_size = kDefaultBlockSize;
    double cache_ratio = 0.1;
    double read_ratio = 0.01;
    std::uint64_t io_size = 32768;
    unsigned threads = 1;
    unsigned iodepth = 1;
    TreeSpec tree;
    double splay_p = 0.01;
    bool splay_w = true;
    std::uint64_t seed = 1;       // workload
    std::uint64_t splay_seed = 1;
    std::uint64_t iv_seed = 1;
    double duration_s = 60.0;
    double warmup_s = 10.0;
    /// "uniform", "zipf:T[:C]", a phase list "SHAPE@S,...", or "trace:PATH".
    std::string workload = "zipf:2.5";
    /// Ops per second of a simulated clock. Wall clock when absent.
    std::optional<double> virtual_rate;
    std::optional<std::uint64_t> max_ops;
    std::uint64_t device_latency_us = 0;
    std::string crypto = "openssl"; // or "fast"
    std::filesystem::path data_path;
    std::filesystem::path meta_path;
    std::filesystem::path anchor_path;
    std::filesystem::path key_path;

    std::uint64_t n_blocks() const { return capacity_bytes / block_size; }
    /// Throws UsageError on inconsistent settings.
    void validate() const;
};

/// Base spec (shape, read ratio, io size) from the config.
WorkloadSpec workload_spec(const RunConfig& config);
/// Phases of the configured workload; a plain shape is one endless phase.
std::vector<Phase> workload_phases(const RunConfig& config);
/// One independent op source per submission lane (threads * iodepth).
std::vector<std::unique_ptr<OpSource>> make_sources(const RunConfig& config);

/// The exact op sequence a virtual-clock run submits, in order. Needs
/// virtual_rate. `fn` gets the simulated submit time and the op; returning
/// false stops.
void for_each_virtual_op(const RunConfig& config,
                         const std::function<bool(std::uint64_t t_ns, const WorkloadOp&)>& fn);
std::vector<WorkloadOp> generate_ops(const RunConfig& config);

std::unique_ptr<CryptoProvider> make_crypto(const std::string& name, const KeyMaterial& keys);
EngineConfig engine_config(const RunConfig& config);
/// `profile` overrides the trace for huffman trees.
std::unique_ptr<Topology> make_topology(const RunConfig& config, bool for_init,
                                        const FrequencyProfile* profile = nullptr);
std::unique_ptr<Engine> init_engine(const RunConfig& config, const KeyMaterial& keys, bool force,
                                    const FrequencyProfile* profile = nullptr);
std::unique_ptr<Engine> open_engine(const RunConfig& config, const KeyMaterial& keys);

/// Nearest-rank percentile, q in [0, 1]. 0 for an empty sample.
std::uint64_t percentile(std::vector<std::uint64_t> values, double q);

struct SecondSample {
    std::uint64_t second = 0;
    std::uint64_t ops = 0;
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t bytes = 0;
    std::uint64_t hashes = 0;
    std::uint64_t write_hashes = 0;

    double mean_hashes_per_op() const;
    double mean_hashes_per_write() const;
};

struct LatencySummary {
    std::uint64_t count = 0;
    std::uint64_t p50_ns = 0;
    std::uint64_t p999_ns = 0;
};

struct RunReport {
    std::string tree;
    std::string workload;
    std::string clock; // "virtual" or "wall"
    std::uint64_t n_blocks = 0;
    std::uint64_t ops = 0;
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t bytes = 0;
    std::uint64_t read_hashes = 0;
    std::uint64_t write_hashes = 0;
    std::uint64_t write_update_hashes = 0;
    OpCounters counters; // post-warmup
    RootAnchor final_anchor;
    std::map<unsigned, std::uint64_t> depth_histogram;
    std::vector<SecondSample> samples;

    // Wall-clock measurements; excluded from determinism comparisons.
    double elapsed_s = 0.0;
    double ops_per_s = 0.0;
    double mb_per_s = 0.0;
    LatencySummary read_latency;
    LatencySummary write_latency;

    double mean_hashes_per_read() const;
    double mean_hashes_per_write() const;
    double mean_hashes_per_op() const;
    double cache_hit_rate() const;

    /// Schema-stable JSON text. Wall-clock values live under "timing".
    std::string to_json(bool include_timing = true) const;
    /// Per-second samples as CSV.
    std::string samples_csv() const;
};

/// Drives the engine with the configured workload and flushes at the end.
/// Metrics cover only ops submitted after the warmup.
RunReport run_workload(Engine& engine, const RunConfig& config);

} // namespace dmt
