#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

namespace bioseq::num {

// Peak/current byte counters captured by an accountant scope.
struct MemoryStats {
    std::size_t current_bytes = 0;
    std::size_t peak_allocated_bytes = 0;
    std::size_t peak_reserved_bytes = 0;
};

// Host-memory stand-in for a caching device allocator. Allocated bytes are
// counted exactly; the reserved pool rounds each block to kBlockBytes and
// grows in kSlabBytes slabs that are never returned inside a scope.
class AllocationAccountant {
public:
    static constexpr std::size_t kBlockBytes = 512;
    static constexpr std::size_t kSlabBytes = std::size_t{1} << 20;

    void on_alloc(std::size_t bytes);
    void on_free(std::size_t bytes);
    void reset();

    const MemoryStats& stats() const { return stats_; }

private:
    MemoryStats stats_;
    std::size_t pool_in_use_ = 0;
};

// Activates an accountant for the calling thread. Every Buffer allocated while
// the scope is active is charged to it; frees are credited only for buffers
// that were charged. Scopes do not nest.
class AccountantScope {
public:
    AccountantScope();
    ~AccountantScope();
    AccountantScope(const AccountantScope&) = delete;
    AccountantScope& operator=(const AccountantScope&) = delete;

    const MemoryStats& stats() const { return accountant_.stats(); }

    // Non-null while a scope is active on this thread.
    static AllocationAccountant* active();
    static std::uint64_t active_serial();

private:
    AllocationAccountant accountant_;
    std::uint64_t serial_;
};

template <class F>
auto accountant_scope(F&& f) {
    AccountantScope scope;
    auto result = std::forward<F>(f)();
    return std::pair{std::move(result), scope.stats()};
}

}  // namespace bioseq::num
