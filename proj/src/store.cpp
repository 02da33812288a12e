#include "dmt/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace dmt {

namespace {

void put_le64(std::uint8_t* p, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i) {
        p[i] = static_cast<std::uint8_t>(v >> (8 * i));
    }
}

std::uint64_t get_le64(const std::uint8_t* p)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= std::uint64_t{p[i]} << (8 * i);
    }
    return v;
}

std::string errno_text() { return std::strerror(errno); }

int open_file(const std::filesystem::path& path, int flags)
{
    int fd = ::open(path.c_str(), flags | O_CLOEXEC, 0644);
    if (fd < 0) {
        throw IoError("open " + path.string() + ": " + errno_text());
    }
    return fd;
}

void size_file(int fd, const std::filesystem::path& path, std::uint64_t size)
{
    if (::ftruncate(fd, static_cast<off_t>(size)) != 0) {
        throw IoError("ftruncate " + path.string() + ": " + errno_text());
    }
}

} // namespace

void NodeRecord::encode(std::span<std::uint8_t, kSize> out) const
{
    std::uint8_t* p = out.data();
    put_le64(p + 0, parent.value);
    put_le64(p + 8, left.value);
    put_le64(p + 16, right.value);
    put_le64(p + 24, static_cast<std::uint64_t>(hotness));
    std::memcpy(p + 32, digest.data(), digest.size());
    std::memcpy(p + 64, iv.data(), iv.size());
    for (int i = 0; i < 4; ++i) {
        p[76 + i] = static_cast<std::uint8_t>(flags >> (8 * i));
    }
}

NodeRecord NodeRecord::decode(std::span<const std::uint8_t, kSize> in)
{
    const std::uint8_t* p = in.data();
    NodeRecord rec;
    rec.parent = NodeId{get_le64(p + 0)};
    rec.left = NodeId{get_le64(p + 8)};
    rec.right = NodeId{get_le64(p + 16)};
    rec.hotness = static_cast<std::int64_t>(get_le64(p + 24));
    std::memcpy(rec.digest.data(), p + 32, rec.digest.size());
    std::memcpy(rec.iv.data(), p + 64, rec.iv.size());
    rec.flags = 0;
    for (int i = 0; i < 4; ++i) {
        rec.flags |= std::uint32_t{p[76 + i]} << (8 * i);
    }
    return rec;
}

UntrustedStore::UntrustedStore(StoreLayout layout, int data_fd, int meta_fd)
    : layout_(std::move(layout)), data_fd_(data_fd), meta_fd_(meta_fd)
{
}

UntrustedStore UntrustedStore::create(const StoreLayout& layout, bool force)
{
    if (layout.n_blocks == 0 || layout.block_size == 0 || layout.max_nodes == 0) {
        throw UsageError("store layout must have blocks, block size and nodes");
    }
    if (layout.data_path == layout.meta_path) {
        throw UsageError("data and metadata must be separate files");
    }
    if (!force && (std::filesystem::exists(layout.data_path) ||
                   std::filesystem::exists(layout.meta_path))) {
        throw UsageError("refusing to overwrite existing image (use --force)");
    }
    // Truncate to zero first so re-initialization yields an all-zero image.
    int data_fd = open_file(layout.data_path, O_RDWR | O_CREAT | O_TRUNC);
    int meta_fd = -1;
    try {
        meta_fd = open_file(layout.meta_path, O_RDWR | O_CREAT | O_TRUNC);
        size_file(data_fd, layout.data_path, layout.data_file_size());
        size_file(meta_fd, layout.meta_path, layout.meta_file_size());
    } catch (...) {
        ::close(data_fd);
        if (meta_fd >= 0) {
            ::close(meta_fd);
        }
        throw;
    }
    return UntrustedStore(layout, data_fd, meta_fd);
}

UntrustedStore UntrustedStore::open(const StoreLayout& layout)
{
    int data_fd = open_file(layout.data_path, O_RDWR);
    int meta_fd = -1;
    try {
        meta_fd = open_file(layout.meta_path, O_RDWR);
        struct stat st {};
        if (::fstat(data_fd, &st) != 0 ||
            static_cast<std::uint64_t>(st.st_size) != layout.data_file_size()) {
            throw UsageError("data file " + layout.data_path.string() +
                             " does not match the configured capacity");
        }
        if (::fstat(meta_fd, &st) != 0 ||
            static_cast<std::uint64_t>(st.st_size) != layout.meta_file_size()) {
            throw UsageError("metadata file " + layout.meta_path.string() +
                             " does not match the configured tree");
        }
    } catch (...) {
        ::close(data_fd);
        if (meta_fd >= 0) {
            ::close(meta_fd);
        }
        throw;
    }
    return UntrustedStore(layout, data_fd, meta_fd);
}

UntrustedStore::UntrustedStore(UntrustedStore&& other) noexcept
    : layout_(std::move(other.layout_)),
      data_fd_(std::exchange(other.data_fd_, -1)),
      meta_fd_(std::exchange(other.meta_fd_, -1)),
      latency_(other.latency_),
      tamper_enabled_(other.tamper_enabled_),
      stats_(other.stats_)
{
}

UntrustedStore& UntrustedStore::operator=(UntrustedStore&& other) noexcept
{
    if (this != &other) {
        if (data_fd_ >= 0) {
            ::close(data_fd_);
        }
        if (meta_fd_ >= 0) {
            ::close(meta_fd_);
        }
        layout_ = std::move(other.layout_);
        data_fd_ = std::exchange(other.data_fd_, -1);
        meta_fd_ = std::exchange(other.meta_fd_, -1);
        latency_ = other.latency_;
        tamper_enabled_ = other.tamper_enabled_;
        stats_ = other.stats_;
    }
    return *this;
}

UntrustedStore::~UntrustedStore()
{
    if (data_fd_ >= 0) {
        ::close(data_fd_);
    }
    if (meta_fd_ >= 0) {
        ::close(meta_fd_);
    }
}

void UntrustedStore::check_block(BlockId block) const
{
    if (block.value >= layout_.n_blocks) {
        throw RangeError("block " + std::to_string(block.value) + " out of range");
    }
}

void UntrustedStore::check_node(NodeId node, std::uint64_t count) const
{
    if (node.value >= layout_.max_nodes || count > layout_.max_nodes - node.value) {
        throw RangeError("node " + std::to_string(node.value) + " out of range");
    }
}

void UntrustedStore::read_at(int fd, std::uint8_t* buf, std::size_t len,
                             std::uint64_t off) const
{
    std::size_t done = 0;
    while (done < len) {
        ssize_t n = ::pread(fd, buf + done, len - done, static_cast<off_t>(off + done));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw IoError("pread: " + errno_text());
        }
        if (n == 0) {
            throw IoError("pread: unexpected end of file");
        }
        done += static_cast<std::size_t>(n);
    }
}

void UntrustedStore::write_at(int fd, const std::uint8_t* buf, std::size_t len,
                              std::uint64_t off)
{
    std::size_t done = 0;
    while (done < len) {
        ssize_t n = ::pwrite(fd, buf + done, len - done, static_cast<off_t>(off + done));
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw IoError("pwrite: " + errno_text());
        }
        done += static_cast<std::size_t>(n);
    }
}

void UntrustedStore::device_delay() const
{
    if (latency_.count() <= 0) {
        return;
    }
    auto until = std::chrono::steady_clock::now() + latency_;
    while (std::chrono::steady_clock::now() < until) {
    }
}

std::vector<std::uint8_t> UntrustedStore::read_block_raw(BlockId block)
{
    check_block(block);
    std::vector<std::uint8_t> buf(layout_.block_size);
    read_at(data_fd_, buf.data(), buf.size(), block_offset(block));
    device_delay();
    ++stats_.data_reads;
    return buf;
}

void UntrustedStore::write_block_raw(BlockId block, std::span<const std::uint8_t> ciphertext)
{
    check_block(block);
    if (ciphertext.size() != layout_.block_size) {
        throw UsageError("ciphertext must be exactly one block");
    }
    write_at(data_fd_, ciphertext.data(), ciphertext.size(), block_offset(block));
    device_delay();
    ++stats_.data_writes;
}

NodeRecord UntrustedStore::read_node(NodeId node)
{
    check_node(node);
    std::array<std::uint8_t, NodeRecord::kSize> buf{};
    read_at(meta_fd_, buf.data(), buf.size(), node_offset(node));
    ++stats_.meta_reads;
    return NodeRecord::decode(buf);
}

void UntrustedStore::write_node(NodeId node, const NodeRecord& rec)
{
    check_node(node);
    std::array<std::uint8_t, NodeRecord::kSize> buf{};
    rec.encode(buf);
    write_at(meta_fd_, buf.data(), buf.size(), node_offset(node));
    ++stats_.meta_writes;
}

std::vector<NodeRecord> UntrustedStore::read_nodes(NodeId first, std::uint64_t count,
                                                  bool counted)
{
    check_node(first, count);
    std::vector<NodeRecord> out;
    out.reserve(count);
    constexpr std::uint64_t kChunk = 8192;
    std::vector<std::uint8_t> buf;
    for (std::uint64_t done = 0; done < count; done += kChunk) {
        std::uint64_t n = std::min(kChunk, count - done);
        buf.resize(n * NodeRecord::kSize);
        read_at(meta_fd_, buf.data(), buf.size(), node_offset(NodeId{first.value + done}));
        for (std::uint64_t i = 0; i < n; ++i) {
            out.push_back(NodeRecord::decode(
                std::span<const std::uint8_t, NodeRecord::kSize>(buf.data() + i * NodeRecord::kSize,
                                                                 NodeRecord::kSize)));
        }
    }
    if (counted) {
        stats_.meta_reads += count;
    }
    return out;
}

void UntrustedStore::write_nodes(NodeId first, std::span<const NodeRecord> recs)
{
    check_node(first, recs.size());
    constexpr std::size_t kChunk = 8192;
    std::vector<std::uint8_t> buf;
    for (std::size_t done = 0; done < recs.size(); done += kChunk) {
        std::size_t n = std::min(kChunk, recs.size() - done);
        buf.resize(n * NodeRecord::kSize);
        for (std::size_t i = 0; i < n; ++i) {
            recs[done + i].encode(std::span<std::uint8_t, NodeRecord::kSize>(
                buf.data() + i * NodeRecord::kSize, NodeRecord::kSize));
        }
        write_at(meta_fd_, buf.data(), buf.size(), node_offset(NodeId{first.value + done}));
    }
    stats_.meta_writes += recs.size();
}

std::vector<std::uint8_t> UntrustedStore::record(Region region, std::uint64_t offset,
                                                 std::uint64_t length)
{
    if (!tamper_enabled_) {
        throw UsageError("tamper hooks are disabled");
    }
    std::uint64_t limit = region == Region::data ? layout_.data_file_size()
                                                 : layout_.meta_file_size();
    if (offset > limit || length > limit - offset) {
        throw RangeError("snapshot range outside the image");
    }
    std::vector<std::uint8_t> out(length);
    read_at(fd_for(region), out.data(), out.size(), offset);
    return out;
}

void UntrustedStore::tamper(Region region, std::uint64_t offset, const Mutation& mutation)
{
    if (!tamper_enabled_) {
        throw UsageError("tamper hooks are disabled");
    }
    std::uint64_t limit = region == Region::data ? layout_.data_file_size()
                                                 : layout_.meta_file_size();
    int fd = fd_for(region);
    if (const auto* flip = std::get_if<FlipBit>(&mutation)) {
        if (offset >= limit || flip->bit > 7) {
            throw RangeError("tamper offset outside the image");
        }
        std::uint8_t byte = 0;
        read_at(fd, &byte, 1, offset);
        byte ^= static_cast<std::uint8_t>(1u << flip->bit);
        write_at(fd, &byte, 1, offset);
        return;
    }
    const auto& bytes = std::holds_alternative<Overwrite>(mutation)
                            ? std::get<Overwrite>(mutation).bytes
                            : std::get<RestoreSnapshot>(mutation).bytes;
    if (offset > limit || bytes.size() > limit - offset) {
        throw RangeError("tamper range outside the image");
    }
    write_at(fd, bytes.data(), bytes.size(), offset);
}

void UntrustedStore::flush()
{
    if (::fdatasync(data_fd_) != 0 || ::fdatasync(meta_fd_) != 0) {
        throw IoError("fdatasync: " + errno_text());
    }
}

} // namespace dmt
