#include "ws3d/nn/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "ws3d/error.hpp"
#include "ws3d/kitti_io.hpp"

namespace ws3d::nn {

namespace {

constexpr char kMagic[8] = {'W', 'S', '3', 'D', 'C', 'K', 'P', 'T'};

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::string_view s) {
        for (char c : s) out.push_back(static_cast<std::byte>(c));
    }
    std::vector<std::byte> out;

private:
    void put(std::uint64_t v, int n) {
        for (int k = 0; k < n; ++k) out.push_back(static_cast<std::byte>((v >> (8 * k)) & 0xffu));
    }
};

class Reader {
public:
    explicit Reader(std::span<const std::byte> b) : b_(b) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > b_.size()) {
            throw MalformedInput(fmt::format("checkpoint truncated at byte {}", pos_), 0, pos_);
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(b_[pos_ + k])) << (8 * k);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::byte> b_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(std::string_view(kMagic, 8));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.meta.size()));
    w.bytes(ckpt.meta);
    w.u32(static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& a : ckpt.arrays) {
        w.u32(static_cast<std::uint32_t>(a.name.size()));
        w.bytes(a.name);
        w.u32(static_cast<std::uint32_t>(a.shape.size()));
        for (auto d : a.shape) w.u64(d);
        for (double v : a.values) w.f64(v);
    }
    return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
    Reader r(bytes);
    if (r.str(8) != std::string_view(kMagic, 8)) throw MalformedInput("not a checkpoint file (bad magic)", 0, 0);
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        throw MalformedInput(fmt::format("unsupported checkpoint version {}", version), 0, 8);
    }
    Checkpoint ckpt;
    ckpt.meta = r.str(r.u32());
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = r.str(r.u32());
        const auto ndim = r.u32();
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            a.shape.push_back(static_cast<std::size_t>(r.u64()));
            n *= a.shape.back();
        }
        a.values.resize(n);
        for (auto& v : a.values) v = r.f64();
        ckpt.arrays.push_back(std::move(a));
    }
    if (!r.done()) throw MalformedInput("trailing bytes after checkpoint payload", 0);
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    kitti::write_text_file_atomic(
        path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string raw = kitti::read_text_file(path);
    return decode_checkpoint(std::as_bytes(std::span<const char>(raw.data(), raw.size())));
}

Checkpoint to_checkpoint(std::span<ParamTensor* const> params, std::string meta) {
    Checkpoint c;
    c.meta = std::move(meta);
    for (const ParamTensor* p : params) {
        NamedArray a;
        a.name = p->name;
        a.shape = p->shape;
        a.values.assign(p->value.data(), p->value.data() + p->value.size());
        c.arrays.push_back(std::move(a));
    }
    return c;
}

void restore(std::span<ParamTensor* const> params, const Checkpoint& ckpt, const std::string& prefix) {
    std::unordered_map<std::string, const NamedArray*> by_name;
    for (const auto& a : ckpt.arrays) by_name[a.name] = &a;
    for (ParamTensor* p : params) {
        auto it = by_name.find(prefix + p->name);
        if (it == by_name.end()) throw Error("checkpoint has no array named '" + prefix + p->name + "'");
        const NamedArray& a = *it->second;
        if (a.shape != p->shape) throw ShapeError("checkpoint array '" + a.name + "' has a different shape");
        std::memcpy(p->value.data(), a.values.data(), a.values.size() * sizeof(double));
    }
}

}  // namespace ws3d::nn
