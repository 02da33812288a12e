#include "dmt/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dmt {

namespace {

constexpr std::uint64_t kSector = 512;

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double parse_double(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) {
            throw ParseError("bad " + what + ": " + s);
        }
        return v;
    } catch (const std::logic_error&) {
        throw ParseError("bad " + what + ": " + s);
    }
}

std::uint64_t parse_u64(std::string_view s, const std::string& what)
{
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
        throw ParseError("bad " + what + ": " + std::string(s));
    }
    return v;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        out.push_back(cur);
    }
    if (!s.empty() && s.back() == sep) {
        out.emplace_back();
    }
    return out;
}

} // namespace

ZipfSampler::ZipfSampler(std::uint64_t n, double theta, std::uint64_t center)
    : n_(n), theta_(theta), center_(n == 0 ? 0 : center % n)
{
    if (n == 0) {
        throw UsageError("zipf needs at least one item");
    }
    if (!(theta > 0.0)) {
        throw UsageError("zipf theta must be positive");
    }
    cdf_.resize(n);
    double sum = 0.0;
    for (std::uint64_t r = 1; r <= n; ++r) {
        sum += std::pow(static_cast<double>(r), -theta);
        cdf_[r - 1] = sum;
    }
    for (auto& c : cdf_) {
        c /= sum;
    }
    cdf_.back() = 1.0;
}

std::uint64_t ZipfSampler::sample(std::mt19937_64& rng) const
{
    double u = std::generate_canonical<double, 64>(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    auto rank = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(
                    it - cdf_.begin(), static_cast<std::ptrdiff_t>(n_ - 1))) +
                1;
    return index_of_rank(rank);
}

double ZipfSampler::pmf(std::uint64_t rank) const
{
    if (rank == 0 || rank > n_) {
        throw RangeError("zipf rank out of range");
    }
    return rank == 1 ? cdf_[0] : cdf_[rank - 1] - cdf_[rank - 2];
}

WorkloadSpec WorkloadSpec::parse_shape(const std::string& text)
{
    WorkloadSpec s;
    auto parts = split(text, ':');
    if (parts.empty()) {
        throw ParseError("empty workload shape");
    }
    if (parts[0] == "uniform" && parts.size() == 1) {
        s.shape = Shape::uniform;
        return s;
    }
    if (parts[0] == "zipf" && (parts.size() == 2 || parts.size() == 3)) {
        s.shape = Shape::zipf;
        s.theta = parse_double(parts[1], "zipf theta");
        if (!(s.theta > 0.0)) {
            throw ParseError("zipf theta must be positive: " + text);
        }
        if (parts.size() == 3) {
            s.center = parse_u64(parts[2], "zipf center");
        }
        return s;
    }
    throw ParseError("unknown workload shape '" + text + "' (uniform, zipf:THETA[:CENTER])");
}

std::string WorkloadSpec::shape_text() const
{
    if (shape == Shape::uniform) {
        return "uniform";
    }
    std::ostringstream o;
    o << "zipf:" << theta;
    if (center) {
        o << ':' << *center;
    }
    return o.str();
}

void WorkloadSpec::validate(std::uint64_t capacity) const
{
    if (io_size == 0 || io_size % kSector != 0) {
        throw UsageError("io size must be a positive multiple of 512");
    }
    if (io_size > capacity) {
        throw UsageError("io size exceeds device capacity");
    }
    if (!(read_ratio >= 0.0 && read_ratio <= 1.0)) {
        throw UsageError("read ratio must be in [0, 1]");
    }
}

std::vector<Phase> parse_phases(const std::string& text, const WorkloadSpec& base)
{
    std::vector<Phase> out;
    for (const auto& item : split(text, ',')) {
        auto at = item.rfind('@');
        if (at == std::string::npos) {
            throw ParseError("phase '" + item + "' needs SHAPE@SECONDS");
        }
        Phase p;
        p.spec = WorkloadSpec::parse_shape(item.substr(0, at));
        p.spec.read_ratio = base.read_ratio;
        p.spec.io_size = base.io_size;
        p.duration_s = parse_double(item.substr(at + 1), "phase duration");
        if (!(p.duration_s > 0.0)) {
            throw ParseError("phase duration must be positive: " + item);
        }
        out.push_back(std::move(p));
    }
    if (out.empty()) {
        throw ParseError("empty phase list");
    }
    return out;
}

WorkloadOp next_op(const WorkloadSpec& spec, const ZipfSampler* zipf, std::uint64_t capacity,
                   std::uint64_t t_ns, std::mt19937_64& rng)
{
    const std::uint64_t extents = capacity / spec.io_size;
    WorkloadOp op;
    op.t_ns = t_ns;
    op.kind = std::generate_canonical<double, 64>(rng) < spec.read_ratio ? OpKind::read
                                                                          : OpKind::write;
    std::uint64_t extent = 0;
    if (spec.shape == Shape::zipf && zipf) {
        extent = zipf->sample(rng);
    } else {
        extent = std::uniform_int_distribution<std::uint64_t>(0, extents - 1)(rng);
    }
    op.offset = extent * spec.io_size;
    op.length = spec.io_size;
    return op;
}

PhaseSchedule::PhaseSchedule(std::vector<Phase> phases, std::uint64_t capacity,
                             std::uint64_t seed, std::uint64_t lane)
    : phases_(std::move(phases)), capacity_(capacity), rng_(mix64(seed ^ mix64(lane + 1)))
{
    if (phases_.empty()) {
        throw UsageError("phase schedule needs at least one phase");
    }
    std::mt19937_64 centers(mix64(seed));
    std::uint64_t t = 0;
    for (const auto& p : phases_) {
        p.spec.validate(capacity);
        starts_ns_.push_back(t);
        t += static_cast<std::uint64_t>(std::llround(p.duration_s * 1e9));
        const std::uint64_t extents = capacity / p.spec.io_size;
        // Draw for every phase so a phase's hotspot does not depend on the
        // shapes that came before it.
        std::uint64_t drawn = centers() % extents;
        if (p.spec.shape == Shape::zipf) {
            std::uint64_t c = p.spec.center.value_or(drawn) % extents;
            centers_.push_back(c);
            samplers_.emplace_back(ZipfSampler(extents, p.spec.theta, c));
        } else {
            centers_.push_back(0);
            samplers_.emplace_back(std::nullopt);
        }
    }
}

std::size_t PhaseSchedule::phase_at(std::uint64_t t_ns) const
{
    auto it = std::upper_bound(starts_ns_.begin(), starts_ns_.end(), t_ns);
    return static_cast<std::size_t>(it - starts_ns_.begin()) - 1;
}

std::optional<WorkloadOp> PhaseSchedule::next(std::uint64_t t_ns)
{
    std::size_t i = phase_at(t_ns);
    const auto& z = samplers_[i];
    return next_op(phases_[i].spec, z ? &*z : nullptr, capacity_, t_ns, rng_);
}

std::optional<WorkloadOp> TraceReplay::next(std::uint64_t)
{
    if (pos_ >= ops_.size()) {
        return std::nullopt;
    }
    return ops_[pos_++];
}

std::vector<WorkloadOp> parse_trace(std::istream& in)
{
    std::vector<WorkloadOp> ops;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (!header) {
            if (line != "t_ns,kind,offset,length") {
                throw ParseError("line 1: expected header t_ns,kind,offset,length");
            }
            header = true;
            continue;
        }
        auto f = split(line, ',');
        try {
            if (f.size() != 4) {
                throw ParseError("expected 4 fields");
            }
            WorkloadOp op;
            op.t_ns = parse_u64(f[0], "timestamp");
            if (f[1] == "read" || f[1] == "R" || f[1] == "r") {
                op.kind = OpKind::read;
            } else if (f[1] == "write" || f[1] == "W" || f[1] == "w") {
                op.kind = OpKind::write;
            } else {
                throw ParseError("bad kind '" + f[1] + "'");
            }
            op.offset = parse_u64(f[2], "offset");
            op.length = parse_u64(f[3], "length");
            ops.push_back(op);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!header) {
        throw ParseError("line 1: missing header t_ns,kind,offset,length");
    }
    return ops;
}

std::vector<WorkloadOp> parse_trace(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open trace " + path.string());
    }
    try {
        return parse_trace(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_trace(std::ostream& out, const std::vector<WorkloadOp>& ops)
{
    out << "t_ns,kind,offset,length\n";
    for (const auto& op : ops) {
        out << op.t_ns << ',' << (op.kind == OpKind::read ? "read" : "write") << ','
            << op.offset << ',' << op.length << '\n';
    }
}

std::vector<WorkloadOp> scale_trace(const std::vector<WorkloadOp>& ops,
                                    std::uint64_t from_capacity, std::uint64_t to_capacity)
{
    if (from_capacity == 0 || to_capacity < kSector) {
        throw UsageError("trace capacities must be positive (target at least 512 bytes)");
    }
    using u128 = unsigned __int128;
    const std::uint64_t cap = to_capacity / kSector * kSector;
    std::vector<WorkloadOp> out;
    out.reserve(ops.size());
    for (const auto& op : ops) {
        WorkloadOp s = op;
        u128 off = u128{op.offset} * to_capacity / from_capacity;
        u128 len = (u128{op.length} * to_capacity + from_capacity - 1) / from_capacity;
        off = off / kSector * kSector;
        len = (len + kSector - 1) / kSector * kSector;
        if (len < kSector) {
            len = kSector;
        }
        if (len > cap) {
            len = cap;
        }
        if (off + len > cap) {
            off = cap - len;
        }
        s.offset = static_cast<std::uint64_t>(off);
        s.length = static_cast<std::uint64_t>(len);
        out.push_back(s);
    }
    return out;
}

} // namespace dmt
