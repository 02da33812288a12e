// dmtbench: initialize authenticated device images, drive workloads against
// them and emit reports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dmt/cost_model.hpp"
#include "dmt/runner.hpp"

namespace fs = std::filesystem;
using namespace dmt;

namespace {

enum Exit { kOk = 0, kUsage = 2, kIntegrity = 3, kIo = 4 };

struct Options {
    RunConfig cfg;
    std::string tree = "balanced:2";
    double virtual_rate = 0.0;
    std::uint64_t max_ops = 0;
    bool force = false;
    bool no_timing = false;
    std::uint64_t key_seed = 0;
    std::string report;
    std::string samples;
    std::string shape_out;
    std::string histogram_out;
    // cost-model
    std::uint64_t iterations = 10000;
    std::string csv_out;
    // trace tools
    std::string trace_in;
    std::string trace_out;
    std::uint64_t from_capacity = 0;
    std::uint64_t to_capacity = 0;
};

void add_geometry(CLI::App* app, Options& o)
{
    app->add_option("--capacity", o.cfg.capacity_bytes, "Device capacity in bytes (K/M/G/T suffixes)")
        ->transform(CLI::AsSizeValue(false));
    app->add_option("--block-size", o.cfg.block_size, "Block size in bytes")
        ->transform(CLI::AsSizeValue(false));
}

void add_paths(CLI::App* app, Options& o)
{
    app->add_option("--data", o.cfg.data_path, "Data image")->required();
    app->add_option("--meta", o.cfg.meta_path, "Metadata image")->required();
    app->add_option("--anchor", o.cfg.anchor_path, "Trusted root anchor file")->required();
    app->add_option("--key", o.cfg.key_path, "Key file, kept outside the image directory")
        ->required();
}

void add_tree(CLI::App* app, Options& o)
{
    app->add_option("--tree", o.tree, "balanced:K (K in 2,4,8,64), huffman:TRACE or dmt")
        ->capture_default_str();
    app->add_option("--splay-p", o.cfg.splay_p, "DMT splay probability")->capture_default_str();
    app->add_option("--splay-w", o.cfg.splay_w, "DMT splay window (true/false)")
        ->capture_default_str();
    app->add_option("--splay-seed", o.cfg.splay_seed, "DMT splay coin seed")->capture_default_str();
    app->add_option("--cache-ratio", o.cfg.cache_ratio, "Secure cache size as a fraction of tree nodes")
        ->capture_default_str();
    app->add_option("--iv-seed", o.cfg.iv_seed, "IV generator seed")->capture_default_str();
    app->add_option("--crypto", o.cfg.crypto, "openssl or fast")->capture_default_str();
    app->add_option("--simulate-device-latency-us", o.cfg.device_latency_us,
                    "Busy-wait per data block access")
        ->capture_default_str();
}

void add_workload(CLI::App* app, Options& o)
{
    app->add_option("--workload", o.cfg.workload,
                    "uniform, zipf:THETA[:CENTER], SHAPE@SECONDS,... or trace:PATH")
        ->capture_default_str();
    app->add_option("--read-ratio", o.cfg.read_ratio, "Fraction of reads")->capture_default_str();
    app->add_option("--io-size", o.cfg.io_size, "Bytes per request")
        ->transform(CLI::AsSizeValue(false));
    app->add_option("--threads", o.cfg.threads, "Submitter threads")->capture_default_str();
    app->add_option("--iodepth", o.cfg.iodepth, "Outstanding ops per thread")->capture_default_str();
    app->add_option("--seed", o.cfg.seed, "Workload seed")->capture_default_str();
    app->add_option("--duration", o.cfg.duration_s, "Measured seconds")->capture_default_str();
    app->add_option("--warmup", o.cfg.warmup_s, "Warmup seconds, excluded from metrics")
        ->capture_default_str();
    app->add_option("--virtual-rate", o.virtual_rate,
                    "Submit on a simulated clock at this many ops/s (deterministic)");
    app->add_option("--max-ops", o.max_ops, "Stop after this many ops");
}

void finish(Options& o)
{
    o.cfg.tree = TreeSpec::parse(o.tree);
    if (o.virtual_rate > 0) {
        o.cfg.virtual_rate = o.virtual_rate;
    }
    if (o.max_ops > 0) {
        o.cfg.max_ops = o.max_ops;
    }
}

fs::path dir_of(const fs::path& p)
{
    return fs::weakly_canonical(fs::absolute(p)).parent_path();
}

void check_paths(const RunConfig& c)
{
    const fs::path key_dir = dir_of(c.key_path);
    if (key_dir == dir_of(c.data_path) || key_dir == dir_of(c.meta_path)) {
        throw UsageError("the key file must not live in the data or metadata directory");
    }
    const auto anchor = fs::weakly_canonical(fs::absolute(c.anchor_path));
    if (anchor == fs::weakly_canonical(fs::absolute(c.data_path)) ||
        anchor == fs::weakly_canonical(fs::absolute(c.meta_path))) {
        throw UsageError("the anchor must be a separate file");
    }
}

void write_text(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out || !(out << text)) {
        throw IoError("cannot write " + path);
    }
}

int cmd_init(Options& o)
{
    finish(o);
    o.cfg.validate();
    check_paths(o.cfg);
    KeyMaterial keys;
    if (fs::exists(o.cfg.key_path)) {
        keys = KeyMaterial::load(o.cfg.key_path);
    } else {
        keys = o.key_seed ? KeyMaterial::from_seed(o.key_seed) : KeyMaterial::random();
        keys.save(o.cfg.key_path);
    }
    auto engine = init_engine(o.cfg, keys, o.force);
    const RootAnchor a = engine->anchor();
    std::cout << "initialized " << engine->topology().name() << " over " << engine->n_blocks()
              << " blocks (" << engine->topology().node_count() << " nodes)\n"
              << "root " << to_hex(a.digest) << " generation " << a.generation << '\n';
    return kOk;
}

int cmd_run(Options& o)
{
    finish(o);
    o.cfg.validate();
    check_paths(o.cfg);
    auto engine = open_engine(o.cfg, KeyMaterial::load(o.cfg.key_path));
    RunReport rep = run_workload(*engine, o.cfg);
    write_text(o.report, rep.to_json(!o.no_timing) + "\n");
    if (!o.samples.empty()) {
        write_text(o.samples, rep.samples_csv());
    }
    return kOk;
}

int cmd_export_shape(Options& o)
{
    finish(o);
    o.cfg.validate();
    check_paths(o.cfg);
    auto engine = open_engine(o.cfg, KeyMaterial::load(o.cfg.key_path));
    std::ostringstream shape;
    engine->topology().export_shape(shape);
    write_text(o.shape_out, shape.str());
    if (!o.histogram_out.empty()) {
        std::ostringstream hist;
        export_depth_histogram(engine->topology(), hist);
        write_text(o.histogram_out, hist.str());
    }
    return kOk;
}

int cmd_cost_model(Options& o)
{
    auto crypto = make_crypto(o.cfg.crypto, KeyMaterial::random());
    LatencyTable table = measure_hash_latency(*crypto, arity_input_sizes(), o.iterations);
    std::ostringstream csv;
    write_cost_csv(csv, o.cfg.n_blocks(), table, o.cfg.io_size, o.cfg.block_size);
    write_text(o.csv_out, csv.str());
    return kOk;
}

int cmd_trace_scale(Options& o)
{
    auto ops = scale_trace(parse_trace(fs::path(o.trace_in)), o.from_capacity, o.to_capacity);
    std::ostringstream out;
    write_trace(out, ops);
    write_text(o.trace_out, out.str());
    return kOk;
}

int cmd_trace_gen(Options& o)
{
    finish(o);
    if (!o.cfg.virtual_rate) {
        throw UsageError("trace-gen needs --virtual-rate");
    }
    o.cfg.validate();
    std::ostringstream out;
    write_trace(out, generate_ops(o.cfg));
    write_text(o.trace_out, out.str());
    return kOk;
}

void dump_forensics(const IntegrityError& e)
{
    const IntegrityReport& r = e.report();
    std::cerr << "integrity failure: " << r.what << '\n'
              << "  block    " << r.block.value << '\n'
              << "  node     ";
    if (r.node == kNoNode) {
        std::cerr << "-\n";
    } else {
        std::cerr << r.node.value << '\n';
    }
    std::cerr << "  level    " << r.level << '\n'
              << "  expected " << to_hex(r.expected) << '\n'
              << "  computed " << to_hex(r.computed) << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Authenticated block device benchmark"};
    app.require_subcommand(1);
    Options o;

    auto* init = app.add_subcommand("init", "Create a zeroed image and its hash tree");
    add_geometry(init, o);
    add_paths(init, o);
    add_tree(init, o);
    init->add_flag("--force", o.force, "Overwrite existing images");
    init->add_option("--key-seed", o.key_seed, "Derive a missing key from this seed");

    auto* run = app.add_subcommand("run", "Run a workload against an initialized image");
    add_geometry(run, o);
    add_paths(run, o);
    add_tree(run, o);
    add_workload(run, o);
    run->add_option("--report", o.report, "JSON report path (default stdout)");
    run->add_option("--samples", o.samples, "Per-second samples CSV path");
    run->add_flag("--no-timing", o.no_timing, "Omit wall-clock fields from the report");

    auto* shape = app.add_subcommand("export-shape", "Write the current tree shape");
    add_geometry(shape, o);
    add_paths(shape, o);
    add_tree(shape, o);
    shape->add_option("--out", o.shape_out, "Shape file (default stdout)");
    shape->add_option("--histogram", o.histogram_out, "Leaf depth histogram CSV");

    auto* cost = app.add_subcommand("cost-model", "Hashing cost per I/O versus arity");
    add_geometry(cost, o);
    cost->add_option("--io-size", o.cfg.io_size, "Bytes per request")
        ->transform(CLI::AsSizeValue(false));
    cost->add_option("--iterations", o.iterations, "Hashes timed per input size")
        ->capture_default_str();
    cost->add_option("--crypto", o.cfg.crypto, "openssl or fast")->capture_default_str();
    cost->add_option("--out", o.csv_out, "CSV path (default stdout)");

    auto* scale = app.add_subcommand("trace-scale", "Rescale a trace to another capacity");
    scale->add_option("--in", o.trace_in, "Input trace")->required();
    scale->add_option("--out", o.trace_out, "Output trace (default stdout)");
    scale->add_option("--from-capacity", o.from_capacity, "Capacity the trace was recorded on")
        ->required()
        ->transform(CLI::AsSizeValue(false));
    scale->add_option("--to-capacity", o.to_capacity, "Target capacity")
        ->required()
        ->transform(CLI::AsSizeValue(false));

    auto* gen = app.add_subcommand("trace-gen", "Write the op sequence of a virtual-clock run");
    add_geometry(gen, o);
    add_workload(gen, o);
    gen->add_option("--out", o.trace_out, "Output trace (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*init) {
            return cmd_init(o);
        }
        if (*run) {
            return cmd_run(o);
        }
        if (*shape) {
            return cmd_export_shape(o);
        }
        if (*cost) {
            return cmd_cost_model(o);
        }
        if (*scale) {
            return cmd_trace_scale(o);
        }
        if (*gen) {
            return cmd_trace_gen(o);
        }
    } catch (const IntegrityError& e) {
        dump_forensics(e);
        return kIntegrity;
    } catch (const AuthenticityError& e) {
        std::cerr << "authenticity failure: " << e.what() << '\n';
        return kIntegrity;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    }
    return kUsage;
}
