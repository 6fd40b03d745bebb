#include "bioseq/num/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bioseq::num {

namespace {

constexpr char kMagic[4] = {'B', 'M', 'C', 'K'};

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::f32:
        case DType::i32: return 4;
        case DType::i64: return 8;
    }
    throw std::runtime_error("checkpoint: unknown dtype");
}

template <class U, class T>
std::vector<std::uint8_t> encode(std::span<const T> values) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(values.size() * sizeof(T));
    for (T v : values) put_le<U>(bytes, std::bit_cast<U>(v));
    return bytes;
}

template <class U, class T>
std::vector<T> decode(const CheckpointEntry& e, DType expected, const std::string& name) {
    if (e.dtype != expected) throw std::runtime_error("checkpoint: entry '" + name + "' has unexpected dtype");
    std::vector<T> out(e.bytes.size() / sizeof(T));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<T>(get_le<U>(e.bytes.data() + i * sizeof(T)));
    return out;
}

class Reader {
public:
    Reader(std::vector<std::uint8_t> data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > data_.size()) throw std::runtime_error("checkpoint: truncated file " + path_);
        const std::uint8_t* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <class U>
    U read() {
        return get_le<U>(take(sizeof(U)));
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::vector<std::uint8_t> data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put_f32(const std::string& name, const std::vector<std::size_t>& shape, std::span<const float> values) {
    CheckpointEntry e;
    e.dtype = DType::f32;
    std::size_t n = 1;
    for (auto d : shape) {
        e.shape.push_back(d);
        n *= d;
    }
    if (n != values.size()) throw std::invalid_argument("checkpoint: shape/value mismatch for '" + name + "'");
    e.bytes = encode<std::uint32_t>(values);
    entries_[name] = std::move(e);
}

void Checkpoint::put_i32(const std::string& name, std::span<const std::int32_t> values) {
    CheckpointEntry e;
    e.dtype = DType::i32;
    e.shape = {values.size()};
    e.bytes = encode<std::uint32_t>(values);
    entries_[name] = std::move(e);
}

void Checkpoint::put_i64(const std::string& name, std::span<const std::int64_t> values) {
    CheckpointEntry e;
    e.dtype = DType::i64;
    e.shape = {values.size()};
    e.bytes = encode<std::uint64_t>(values);
    entries_[name] = std::move(e);
}

const CheckpointEntry& Checkpoint::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::runtime_error("checkpoint: missing entry '" + name + "'");
    return it->second;
}

std::vector<std::size_t> Checkpoint::shape(const std::string& name) const {
    const auto& e = entry(name);
    return {e.shape.begin(), e.shape.end()};
}

std::vector<float> Checkpoint::get_f32(const std::string& name) const {
    return decode<std::uint32_t, float>(entry(name), DType::f32, name);
}

std::vector<std::int32_t> Checkpoint::get_i32(const std::string& name) const {
    return decode<std::uint32_t, std::int32_t>(entry(name), DType::i32, name);
}

std::vector<std::int64_t> Checkpoint::get_i64(const std::string& name) const {
    return decode<std::uint64_t, std::int64_t>(entry(name), DType::i64, name);
}

std::vector<std::string> Checkpoint::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

std::filesystem::path Checkpoint::sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".json");
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, e] : entries_) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<std::uint8_t>(e.dtype));
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) put_le<std::uint64_t>(out, d);
        put_le<std::uint64_t>(out, e.bytes.size());
        out.insert(out.end(), e.bytes.begin(), e.bytes.end());
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    std::ofstream side(sidecar_path(path));
    if (!side) throw std::runtime_error("checkpoint: cannot write " + sidecar_path(path).string());
    side << config_.dump(2) << '\n';
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(std::move(data), path.string());
    if (std::memcmp(r.take(4), kMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic in " + path.string());
    const auto version = r.read<std::uint32_t>();
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) + " in " + path.string());
    }
    Checkpoint ckpt;
    const auto count = r.read<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.read<std::uint32_t>();
        const auto* np = r.take(name_len);
        std::string name(reinterpret_cast<const char*>(np), name_len);
        CheckpointEntry e;
        const auto dt = r.read<std::uint8_t>();
        if (dt > static_cast<std::uint8_t>(DType::i64)) throw std::runtime_error("checkpoint: unknown dtype for '" + name + "'");
        e.dtype = static_cast<DType>(dt);
        const auto ndim = r.read<std::uint32_t>();
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            e.shape.push_back(r.read<std::uint64_t>());
            n *= e.shape.back();
        }
        const auto nbytes = r.read<std::uint64_t>();
        if (nbytes != n * dtype_size(e.dtype)) throw std::runtime_error("checkpoint: size mismatch for '" + name + "'");
        const auto* bp = r.take(nbytes);
        e.bytes.assign(bp, bp + nbytes);
        ckpt.entries_[name] = std::move(e);
    }
    if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes in " + path.string());
    if (std::ifstream side(sidecar_path(path)); side) ckpt.config_ = nlohmann::json::parse(side);
    return ckpt;
}

bool Checkpoint::operator==(const Checkpoint& other) const {
    if (entries_.size() != other.entries_.size() || config_ != other.config_) return false;
    for (const auto& [name, e] : entries_) {
        auto it = other.entries_.find(name);
        if (it == other.entries_.end()) return false;
        if (e.dtype != it->second.dtype || e.shape != it->second.shape || e.bytes != it->second.bytes) return false;
    }
    return true;
}

}  // namespace bioseq::num
