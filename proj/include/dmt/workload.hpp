#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dmt/types.hpp"

namespace dmt {

/// Malformed trace or workload description.
class ParseError : public UsageError {
public:
    using UsageError::UsageError;
};

/// Rank r (1-based) has probability proportional to 1/r^theta. Rank r maps
/// to index (center + r - 1) mod n, so moving the center moves the hotspot.
class ZipfSampler {
public:
    ZipfSampler(std::uint64_t n, double theta, std::uint64_t center = 0);

    std::uint64_t sample(std::mt19937_64& rng) const;
    /// Probability of rank r, 1 <= r <= n.
    double pmf(std::uint64_t rank) const;
    std::uint64_t index_of_rank(std::uint64_t rank) const { return (center_ + rank - 1) % n_; }

    std::uint64_t size() const { return n_; }
    std::uint64_t center() const { return center_; }
    double theta() const { return theta_; }

private:
    std::uint64_t n_;
    double theta_;
    std::uint64_t center_;
    std::vector<double> cdf_;
};

enum class Shape { uniform, zipf };

struct WorkloadSpec {
    Shape shape = Shape::uniform;
    double theta = 2.5;
    /// Hotspot extent; drawn from the schedule seed when absent.
    std::optional<std::uint64_t> center;
    double read_ratio = 0.01;
    std::uint64_t io_size = 32768;

    /// "uniform", "zipf:THETA" or "zipf:THETA:CENTER".
    static WorkloadSpec parse_shape(const std::string& text);
    std::string shape_text() const;
    /// Throws UsageError unless the spec fits a device of this capacity.
    void validate(std::uint64_t capacity) const;
};

/// Source of requests for the runner. nullopt ends the run early.
class OpSource {
public:
    virtual ~OpSource() = default;
    virtual std::optional<WorkloadOp> next(std::uint64_t t_ns) = 0;
};

struct Phase {
    double duration_s = 0.0;
    WorkloadSpec spec;
};

/// "SHAPE@SECONDS,SHAPE@SECONDS,..." using parse_shape for each shape;
/// read ratio and io size come from `base`.
std::vector<Phase> parse_phases(const std::string& text, const WorkloadSpec& base);

/// Generates ops from a sequence of phases. The last phase continues past
/// its scheduled end. Phase hotspots depend only on `seed`, so every lane
/// of one run sees the same hotspot; each lane draws its own op stream.
class PhaseSchedule final : public OpSource {
public:
    PhaseSchedule(std::vector<Phase> phases, std::uint64_t capacity, std::uint64_t seed,
                  std::uint64_t lane = 0);

    std::optional<WorkloadOp> next(std::uint64_t t_ns) override;
    /// Phase index active at time t.
    std::size_t phase_at(std::uint64_t t_ns) const;
    /// Start of phase i, in ns from the schedule start.
    std::uint64_t phase_start_ns(std::size_t i) const { return starts_ns_.at(i); }
    std::size_t phase_count() const { return phases_.size(); }
    const Phase& phase(std::size_t i) const { return phases_.at(i); }
    /// Hotspot extent of phase i (0 for uniform phases).
    std::uint64_t center_of(std::size_t i) const { return centers_.at(i); }

private:
    std::vector<Phase> phases_;
    std::vector<std::uint64_t> starts_ns_;
    std::vector<std::uint64_t> centers_;
    std::vector<std::optional<ZipfSampler>> samplers_;
    std::uint64_t capacity_;
    std::mt19937_64 rng_;
};

/// One op from a single spec: kind ~ Bernoulli(read_ratio), offset is a
/// sampled extent times io_size.
WorkloadOp next_op(const WorkloadSpec& spec, const ZipfSampler* zipf, std::uint64_t capacity,
                   std::uint64_t t_ns, std::mt19937_64& rng);

/// Replays a parsed trace in order.
class TraceReplay final : public OpSource {
public:
    explicit TraceReplay(std::vector<WorkloadOp> ops) : ops_(std::move(ops)) {}
    std::optional<WorkloadOp> next(std::uint64_t t_ns) override;

private:
    std::vector<WorkloadOp> ops_;
    std::size_t pos_ = 0;
};

/// CSV `t_ns,kind,offset,length` with that header line.
std::vector<WorkloadOp> parse_trace(std::istream& in);
std::vector<WorkloadOp> parse_trace(const std::filesystem::path& path);
void write_trace(std::ostream& out, const std::vector<WorkloadOp>& ops);

/// Scales offsets and lengths by to/from. Offsets round down and lengths
/// round up to 512 bytes, then requests are clamped inside `to_capacity`.
std::vector<WorkloadOp> scale_trace(const std::vector<WorkloadOp>& ops,
                                    std::uint64_t from_capacity, std::uint64_t to_capacity);

} // namespace dmt
