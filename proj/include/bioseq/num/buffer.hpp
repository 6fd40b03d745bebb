#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

namespace bioseq::num {

// Owning float array whose allocation is reported to the active
// AllocationAccountant (if any). All tensor storage and kernel scratch that
// scales with sequence length goes through this type.
class Buffer {
public:
    Buffer() = default;
    explicit Buffer(std::size_t n, float fill = 0.0f);
    Buffer(std::span<const float> values);
    ~Buffer();

    Buffer(const Buffer& other);
    Buffer& operator=(const Buffer& other);
    Buffer(Buffer&& other) noexcept;
    Buffer& operator=(Buffer&& other) noexcept;

    float* data() { return data_.get(); }
    const float* data() const { return data_.get(); }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    std::span<float> span() { return {data_.get(), size_}; }
    std::span<const float> span() const { return {data_.get(), size_}; }

    void fill(float v);

private:
    void release();

    std::unique_ptr<float[]> data_;
    std::size_t size_ = 0;
    std::uint64_t scope_serial_ = 0;
};

}  // namespace bioseq::num
