#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace bioseq::num {

enum class DType : std::uint8_t { f32 = 0, i32 = 1, i64 = 2 };

struct CheckpointEntry {
    DType dtype = DType::f32;
    std::vector<std::uint64_t> shape;
    std::vector<std::uint8_t> bytes;  // little-endian element data
};

// Named tensor container persisted as
//   "BMCK" | u32 version | u32 count | count x entry
//   entry = u32 name_len | name | u8 dtype | u32 ndim | u64 dims[ndim] | u64 nbytes | data
// with all integers little-endian, plus a JSON sidecar "<path>.json" holding
// the config. Round-trips are bit-exact.
class Checkpoint {
public:
    static constexpr std::uint32_t kVersion = 1;

    void put_f32(const std::string& name, const std::vector<std::size_t>& shape, std::span<const float> values);
    void put_i32(const std::string& name, std::span<const std::int32_t> values);
    void put_i64(const std::string& name, std::span<const std::int64_t> values);
    void put_i64(const std::string& name, std::initializer_list<std::int64_t> values) {
        put_i64(name, std::span<const std::int64_t>(values.begin(), values.size()));
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    const CheckpointEntry& entry(const std::string& name) const;
    std::vector<std::size_t> shape(const std::string& name) const;
    std::vector<float> get_f32(const std::string& name) const;
    std::vector<std::int32_t> get_i32(const std::string& name) const;
    std::vector<std::int64_t> get_i64(const std::string& name) const;
    std::vector<std::string> names() const;

    nlohmann::json& config() { return config_; }
    const nlohmann::json& config() const { return config_; }

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    static std::filesystem::path sidecar_path(const std::filesystem::path& path);

    bool operator==(const Checkpoint& other) const;

private:
    std::map<std::string, CheckpointEntry> entries_;
    nlohmann::json config_ = nlohmann::json::object();
};

}  // namespace bioseq::num
