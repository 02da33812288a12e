#include "dmt/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dmt/balanced_topology.hpp"
#include "dmt/dmt_topology.hpp"
#include "dmt/huffman.hpp"

namespace dmt {

namespace {

constexpr char kTracePrefix[] = "trace:";

bool is_trace(const std::string& w)
{
    return w.rfind(kTracePrefix, 0) == 0;
}

std::uint64_t to_ns(double seconds)
{
    return static_cast<std::uint64_t>(std::llround(seconds * 1e9));
}

/// Accumulates metrics for the ops of one lane.
struct Recorder {
    std::map<std::uint64_t, SecondSample> seconds;
    std::vector<std::uint64_t> read_lat;
    std::vector<std::uint64_t> write_lat;
    std::uint64_t ops = 0, reads = 0, writes = 0, bytes = 0;
    std::uint64_t read_hashes = 0, write_hashes = 0, write_update_hashes = 0;

    void add(std::uint64_t second, const WorkloadOp& op, const IoResult& r)
    {
        SecondSample& s = seconds[second];
        s.second = second;
        ++s.ops;
        ++ops;
        s.bytes += op.length;
        bytes += op.length;
        s.hashes += r.hashes;
        if (op.kind == OpKind::read) {
            ++s.reads;
            ++reads;
            read_hashes += r.hashes;
            read_lat.push_back(r.latency_ns);
        } else {
            ++s.writes;
            ++writes;
            s.write_hashes += r.hashes;
            write_hashes += r.hashes;
            write_update_hashes += r.update_hashes;
            write_lat.push_back(r.latency_ns);
        }
    }

    void merge(Recorder&& o)
    {
        for (auto& [k, v] : o.seconds) {
            SecondSample& s = seconds[k];
            s.second = k;
            s.ops += v.ops;
            s.reads += v.reads;
            s.writes += v.writes;
            s.bytes += v.bytes;
            s.hashes += v.hashes;
            s.write_hashes += v.write_hashes;
        }
        read_lat.insert(read_lat.end(), o.read_lat.begin(), o.read_lat.end());
        write_lat.insert(write_lat.end(), o.write_lat.begin(), o.write_lat.end());
        ops += o.ops;
        reads += o.reads;
        writes += o.writes;
        bytes += o.bytes;
        read_hashes += o.read_hashes;
        write_hashes += o.write_hashes;
        write_update_hashes += o.write_update_hashes;
    }
};

LatencySummary summarize(const std::vector<std::uint64_t>& v)
{
    return {v.size(), percentile(v, 0.5), percentile(v, 0.999)};
}

double ratio(std::uint64_t num, std::uint64_t den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

TreeSpec TreeSpec::parse(const std::string& text)
{
    TreeSpec t;
    if (text == "dmt") {
        t.kind = Kind::dmt;
        return t;
    }
    if (text.rfind("balanced:", 0) == 0) {
        t.kind = Kind::balanced;
        const std::string k = text.substr(9);
        try {
            std::size_t used = 0;
            unsigned long v = std::stoul(k, &used);
            if (used != k.size()) {
                throw std::invalid_argument(k);
            }
            t.arity = TreeArity(static_cast<unsigned>(v)).value();
        } catch (const std::logic_error&) {
            throw UsageError("bad arity in tree '" + text + "'");
        }
        return t;
    }
    if (text.rfind("huffman:", 0) == 0 && text.size() > 8) {
        t.kind = Kind::huffman;
        t.trace = text.substr(8);
        return t;
    }
    if (text == "huffman") {
        throw UsageError("huffman trees need a trace: huffman:PATH");
    }
    throw UsageError("unknown tree '" + text + "' (balanced:K, huffman:TRACE, dmt)");
}

std::string TreeSpec::text() const
{
    switch (kind) {
    case Kind::balanced:
        return "balanced:" + std::to_string(arity);
    case Kind::huffman:
        return "huffman:" + trace.string();
    case Kind::dmt:
        return "dmt";
    }
    return "?";
}

void RunConfig::validate() const
{
    if (block_size == 0 || capacity_bytes < block_size || capacity_bytes % block_size != 0) {
        throw UsageError("capacity must be a positive multiple of the block size");
    }
    if (!(cache_ratio > 0.0 && cache_ratio <= 1.0)) {
        throw UsageError("cache ratio must be in (0, 1]");
    }
    if (threads == 0 || iodepth == 0) {
        throw UsageError("threads and iodepth must be at least 1");
    }
    if (!(splay_p >= 0.0 && splay_p <= 1.0)) {
        throw UsageError("splay probability must be in [0, 1]");
    }
    if (duration_s < 0 || warmup_s < 0) {
        throw UsageError("durations must be non-negative");
    }
    if (virtual_rate && !(*virtual_rate > 0.0)) {
        throw UsageError("virtual rate must be positive");
    }
    if (crypto != "openssl" && crypto != "fast") {
        throw UsageError("crypto must be openssl or fast");
    }
    if (!is_trace(workload)) {
        workload_spec(*this).validate(capacity_bytes);
    }
}

WorkloadSpec workload_spec(const RunConfig& c)
{
    WorkloadSpec s;
    if (!is_trace(c.workload) && c.workload.find('@') == std::string::npos) {
        s = WorkloadSpec::parse_shape(c.workload);
    }
    s.read_ratio = c.read_ratio;
    s.io_size = c.io_size;
    return s;
}

std::vector<Phase> workload_phases(const RunConfig& c)
{
    if (is_trace(c.workload)) {
        throw UsageError("trace workloads have no phases");
    }
    if (c.workload.find('@') != std::string::npos) {
        return parse_phases(c.workload, workload_spec(c));
    }
    Phase p;
    p.spec = workload_spec(c);
    p.duration_s = c.warmup_s + c.duration_s;
    return {p};
}

std::vector<std::unique_ptr<OpSource>> make_sources(const RunConfig& c)
{
    const std::size_t lanes = std::size_t{c.threads} * c.iodepth;
    std::vector<std::unique_ptr<OpSource>> out;
    if (is_trace(c.workload)) {
        auto ops = parse_trace(std::filesystem::path(c.workload.substr(sizeof(kTracePrefix) - 1)));
        std::vector<std::vector<WorkloadOp>> split(lanes);
        for (std::size_t i = 0; i < ops.size(); ++i) {
            split[i % lanes].push_back(ops[i]);
        }
        for (auto& s : split) {
            out.push_back(std::make_unique<TraceReplay>(std::move(s)));
        }
        return out;
    }
    auto phases = workload_phases(c);
    for (std::size_t lane = 0; lane < lanes; ++lane) {
        out.push_back(std::make_unique<PhaseSchedule>(phases, c.capacity_bytes, c.seed, lane));
    }
    return out;
}

void for_each_virtual_op(const RunConfig& c,
                         const std::function<bool(std::uint64_t, const WorkloadOp&)>& fn)
{
    if (!c.virtual_rate) {
        throw UsageError("a virtual run needs a rate");
    }
    auto sources = make_sources(c);
    const std::uint64_t total_ns = to_ns(c.warmup_s + c.duration_s);
    const double step = 1e9 / *c.virtual_rate;
    for (std::uint64_t i = 0;; ++i) {
        if (c.max_ops && i >= *c.max_ops) {
            break;
        }
        const auto t = static_cast<std::uint64_t>(std::llround(static_cast<double>(i) * step));
        if (t >= total_ns) {
            break;
        }
        auto op = sources[i % sources.size()]->next(t);
        if (!op || !fn(t, *op)) {
            break;
        }
    }
}

std::vector<WorkloadOp> generate_ops(const RunConfig& c)
{
    std::vector<WorkloadOp> ops;
    for_each_virtual_op(c, [&](std::uint64_t, const WorkloadOp& op) {
        ops.push_back(op);
        return true;
    });
    return ops;
}

std::unique_ptr<CryptoProvider> make_crypto(const std::string& name, const KeyMaterial& keys)
{
    if (name == "openssl") {
        return make_openssl_provider(keys);
    }
    if (name == "fast") {
        return make_fast_provider(keys);
    }
    throw UsageError("unknown crypto provider '" + name + "'");
}

EngineConfig engine_config(const RunConfig& c)
{
    EngineConfig e;
    e.layout.n_blocks = c.n_blocks();
    e.layout.block_size = c.block_size;
    e.layout.data_path = c.data_path;
    e.layout.meta_path = c.meta_path;
    e.anchor_path = c.anchor_path;
    e.cache_ratio = c.cache_ratio;
    e.iv_seed = c.iv_seed;
    e.device_latency = std::chrono::microseconds(c.device_latency_us);
    return e;
}

std::unique_ptr<Topology> make_topology(const RunConfig& c, bool for_init,
                                        const FrequencyProfile* profile)
{
    const std::uint64_t n = c.n_blocks();
    switch (c.tree.kind) {
    case TreeSpec::Kind::balanced:
        return std::make_unique<BalancedTopology>(n, TreeArity(c.tree.arity));
    case TreeSpec::Kind::dmt:
        return std::make_unique<DmtTopology>(n, SplayPolicy{c.splay_w, c.splay_p, c.splay_seed});
    case TreeSpec::Kind::huffman:
        if (!for_init) {
            return std::make_unique<HuffmanTopology>(n);
        }
        if (profile) {
            if (profile->size() != n) {
                throw UsageError("profile does not match the block count");
            }
            return std::make_unique<HuffmanTopology>(build_huffman(*profile));
        }
        if (c.tree.trace.empty()) {
            throw UsageError("huffman trees need a trace: huffman:PATH");
        }
        return std::make_unique<HuffmanTopology>(
            build_huffman(trace_to_profile(parse_trace(c.tree.trace), c.block_size, n)));
    }
    throw UsageError("unknown tree kind");
}

std::unique_ptr<Engine> init_engine(const RunConfig& c, const KeyMaterial& keys, bool force,
                                    const FrequencyProfile* profile)
{
    c.validate();
    return Engine::initialize(engine_config(c), make_topology(c, true, profile),
                              make_crypto(c.crypto, keys), force);
}

std::unique_ptr<Engine> open_engine(const RunConfig& c, const KeyMaterial& keys)
{
    c.validate();
    return Engine::open(engine_config(c), make_topology(c, false), make_crypto(c.crypto, keys));
}

std::uint64_t percentile(std::vector<std::uint64_t> values, double q)
{
    if (values.empty()) {
        return 0;
    }
    std::sort(values.begin(), values.end());
    q = std::clamp(q, 0.0, 1.0);
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[rank == 0 ? 0 : rank - 1];
}

double SecondSample::mean_hashes_per_op() const
{
    return ratio(hashes, ops);
}

double SecondSample::mean_hashes_per_write() const
{
    return ratio(write_hashes, writes);
}

double RunReport::mean_hashes_per_read() const
{
    return ratio(read_hashes, reads);
}

double RunReport::mean_hashes_per_write() const
{
    return ratio(write_hashes, writes);
}

double RunReport::mean_hashes_per_op() const
{
    return ratio(read_hashes + write_hashes, ops);
}

double RunReport::cache_hit_rate() const
{
    return ratio(counters.cache_hits, counters.cache_hits + counters.cache_misses);
}

std::string RunReport::to_json(bool include_timing) const
{
    nlohmann::ordered_json j;
    j["tree"] = tree;
    j["workload"] = workload;
    j["clock"] = clock;
    j["n_blocks"] = n_blocks;
    j["ops"] = ops;
    j["reads"] = reads;
    j["writes"] = writes;
    j["bytes"] = bytes;
    j["mean_hashes_per_read"] = mean_hashes_per_read();
    j["mean_hashes_per_write"] = mean_hashes_per_write();
    j["mean_hashes_per_op"] = mean_hashes_per_op();
    j["mean_update_hashes_per_write"] = ratio(write_update_hashes, writes);
    j["cache_hit_rate"] = cache_hit_rate();
    nlohmann::ordered_json counters_json;
    for (auto [name, v] : counters.fields()) {
        counters_json[name] = v;
    }
    j["counters"] = counters_json;
    j["root_anchor"] = {{"digest", to_hex(final_anchor.digest)},
                        {"generation", final_anchor.generation}};
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (auto [d, n] : depth_histogram) {
        hist.push_back({{"depth", d}, {"leaves", n}});
    }
    j["depth_histogram"] = hist;
    nlohmann::ordered_json samples_json = nlohmann::ordered_json::array();
    for (const auto& s : samples) {
        samples_json.push_back({{"second", s.second},
                                {"ops", s.ops},
                                {"reads", s.reads},
                                {"writes", s.writes},
                                {"bytes", s.bytes},
                                {"mean_hashes_per_op", s.mean_hashes_per_op()},
                                {"mean_hashes_per_write", s.mean_hashes_per_write()}});
    }
    j["samples"] = samples_json;
    if (include_timing) {
        j["timing"] = {
            {"elapsed_s", elapsed_s},
            {"ops_per_s", ops_per_s},
            {"mb_per_s", mb_per_s},
            {"read_latency_ns",
             {{"count", read_latency.count},
              {"p50", read_latency.p50_ns},
              {"p99_9", read_latency.p999_ns}}},
            {"write_latency_ns",
             {{"count", write_latency.count},
              {"p50", write_latency.p50_ns},
              {"p99_9", write_latency.p999_ns}}},
        };
    }
    return j.dump(2);
}

std::string RunReport::samples_csv() const
{
    std::ostringstream o;
    o << "second,ops,reads,writes,mb,mean_hashes_per_op,mean_hashes_per_write\n";
    o << std::fixed << std::setprecision(4);
    for (const auto& s : samples) {
        o << s.second << ',' << s.ops << ',' << s.reads << ',' << s.writes << ','
          << static_cast<double>(s.bytes) / 1e6 << ',' << s.mean_hashes_per_op() << ','
          << s.mean_hashes_per_write() << '\n';
    }
    return o.str();
}

RunReport run_workload(Engine& engine, const RunConfig& c)
{
    c.validate();
    const std::uint64_t warmup_ns = to_ns(c.warmup_s);
    const std::uint64_t total_ns = to_ns(c.warmup_s + c.duration_s);
    Recorder rec;
    OpCounters at_warmup = engine.counters();
    bool warm = warmup_ns == 0;

    auto wall0 = std::chrono::steady_clock::now();
    if (c.virtual_rate) {
        for_each_virtual_op(c, [&](std::uint64_t t, const WorkloadOp& op) {
            if (!warm && t >= warmup_ns) {
                at_warmup = engine.counters();
                warm = true;
            }
            IoResult r = engine.io(op);
            if (warm) {
                rec.add((t - warmup_ns) / 1'000'000'000ULL, op, r);
            }
            return true;
        });
    } else {
        auto sources = make_sources(c);
        std::vector<Recorder> lane_rec(sources.size());
        std::atomic<std::uint64_t> issued{0};
        std::atomic<bool> stop{false};
        std::mutex err_mu;
        std::exception_ptr err;
        auto elapsed = [&] {
            return static_cast<std::uint64_t>(
                std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now() - wall0)
                    .count());
        };
        std::vector<std::thread> workers;
        for (std::size_t lane = 0; lane < sources.size(); ++lane) {
            workers.emplace_back([&, lane] {
                try {
                    while (!stop.load()) {
                        std::uint64_t t = elapsed();
                        if (t >= total_ns) {
                            break;
                        }
                        if (c.max_ops && issued.fetch_add(1) >= *c.max_ops) {
                            break;
                        }
                        auto op = sources[lane]->next(t);
                        if (!op) {
                            break;
                        }
                        IoResult r = engine.io(*op);
                        if (t >= warmup_ns) {
                            lane_rec[lane].add((t - warmup_ns) / 1'000'000'000ULL, *op, r);
                        }
                    }
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err) {
                        err = std::current_exception();
                    }
                    stop = true;
                }
            });
        }
        if (warmup_ns > 0) {
            while (!stop.load() && elapsed() < warmup_ns) {
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
            }
            at_warmup = engine.counters();
        }
        for (auto& w : workers) {
            w.join();
        }
        if (err) {
            std::rethrow_exception(err);
        }
        for (auto& r : lane_rec) {
            rec.merge(std::move(r));
        }
    }
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    engine.flush();

    RunReport rep;
    rep.tree = engine.topology().name();
    rep.workload = c.workload;
    rep.clock = c.virtual_rate ? "virtual" : "wall";
    rep.n_blocks = engine.n_blocks();
    rep.ops = rec.ops;
    rep.reads = rec.reads;
    rep.writes = rec.writes;
    rep.bytes = rec.bytes;
    rep.read_hashes = rec.read_hashes;
    rep.write_hashes = rec.write_hashes;
    rep.write_update_hashes = rec.write_update_hashes;
    rep.counters = engine.counters() - at_warmup;
    rep.final_anchor = engine.anchor();
    for (unsigned d : engine.topology().leaf_depths()) {
        ++rep.depth_histogram[d];
    }
    for (auto& [k, s] : rec.seconds) {
        rep.samples.push_back(s);
    }
    rep.elapsed_s = wall_s;
    rep.ops_per_s = wall_s > 0 ? static_cast<double>(rec.ops) / wall_s : 0.0;
    rep.mb_per_s = wall_s > 0 ? static_cast<double>(rec.bytes) / 1e6 / wall_s : 0.0;
    rep.read_latency = summarize(rec.read_lat);
    rep.write_latency = summarize(rec.write_lat);
    return rep;
}

} // namespace dmt
