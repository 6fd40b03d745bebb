#include "bioseq/num/buffer.hpp"

#include <algorithm>

#include "bioseq/num/accountant.hpp"

namespace bioseq::num {

Buffer::Buffer(std::size_t n, float fill) : data_(n ? new float[n] : nullptr), size_(n) {
    std::fill_n(data_.get(), n, fill);
    if (auto* acc = AccountantScope::active(); acc != nullptr && n > 0) {
        acc->on_alloc(n * sizeof(float));
        scope_serial_ = AccountantScope::active_serial();
    }
}

Buffer::Buffer(std::span<const float> values) : Buffer(values.size()) {
    std::copy(values.begin(), values.end(), data_.get());
}

Buffer::~Buffer() { release(); }

Buffer::Buffer(const Buffer& other) : Buffer(other.span()) {}

Buffer& Buffer::operator=(const Buffer& other) {
    if (this != &other) {
        Buffer tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

Buffer::Buffer(Buffer&& other) noexcept
    : data_(std::move(other.data_)), size_(other.size_), scope_serial_(other.scope_serial_) {
    other.size_ = 0;
    other.scope_serial_ = 0;
}

Buffer& Buffer::operator=(Buffer&& other) noexcept {
    if (this != &other) {
        release();
        data_ = std::move(other.data_);
        size_ = other.size_;
        scope_serial_ = other.scope_serial_;
        other.size_ = 0;
        other.scope_serial_ = 0;
    }
    return *this;
}

void Buffer::fill(float v) { std::fill_n(data_.get(), size_, v); }

void Buffer::release() {
    if (scope_serial_ != 0 && scope_serial_ == AccountantScope::active_serial()) {
        AccountantScope::active()->on_free(size_ * sizeof(float));
    }
    data_.reset();
    size_ = 0;
    scope_serial_ = 0;
}

}  // namespace bioseq::num
