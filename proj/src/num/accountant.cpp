#include "bioseq/num/accountant.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

namespace bioseq::num {

namespace {

std::atomic<std::uint64_t> g_next_serial{1};

struct ThreadScope {
    AllocationAccountant* accountant = nullptr;
    std::uint64_t serial = 0;
};

thread_local ThreadScope t_scope;

std::size_t round_up(std::size_t v, std::size_t to) { return (v + to - 1) / to * to; }

}  // namespace

void AllocationAccountant::on_alloc(std::size_t bytes) {
    stats_.current_bytes += bytes;
    stats_.peak_allocated_bytes = std::max(stats_.peak_allocated_bytes, stats_.current_bytes);
    pool_in_use_ += round_up(bytes, kBlockBytes);
    stats_.peak_reserved_bytes =
        std::max(stats_.peak_reserved_bytes, round_up(pool_in_use_, kSlabBytes));
}

void AllocationAccountant::on_free(std::size_t bytes) {
    stats_.current_bytes -= std::min(bytes, stats_.current_bytes);
    pool_in_use_ -= std::min(round_up(bytes, kBlockBytes), pool_in_use_);
}

void AllocationAccountant::reset() {
    stats_ = {};
    pool_in_use_ = 0;
}

AccountantScope::AccountantScope() : serial_(g_next_serial.fetch_add(1)) {
    if (t_scope.accountant != nullptr) {
        throw std::logic_error("accountant scopes cannot be nested");
    }
    t_scope = {&accountant_, serial_};
}

AccountantScope::~AccountantScope() { t_scope = {}; }

AllocationAccountant* AccountantScope::active() { return t_scope.accountant; }

std::uint64_t AccountantScope::active_serial() { return t_scope.serial; }

}  // namespace bioseq::num
