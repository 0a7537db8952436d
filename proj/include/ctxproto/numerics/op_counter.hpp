#pragma once

#include <cstdint>

namespace ctxproto::numerics {

struct OpCounts {
  std::uint64_t mul_adds = 0;
  std::uint64_t elementwise = 0;
};

// Collects kernel operation counts on the current thread while alive. Scopes
// nest; an inner scope does not forward its counts to the outer one. Kernel
// outputs never depend on whether a counter is active.
class ScopedOpCounter {
 public:
  ScopedOpCounter();
  ~ScopedOpCounter();
  ScopedOpCounter(const ScopedOpCounter&) = delete;
  ScopedOpCounter& operator=(const ScopedOpCounter&) = delete;

  const OpCounts& counts() const noexcept { return counts_; }

 private:
  OpCounts counts_;
  ScopedOpCounter* previous_;
};

namespace detail {
void record_mul_adds(std::uint64_t n) noexcept;
void record_elementwise(std::uint64_t n) noexcept;
}  // namespace detail

}  // namespace ctxproto::numerics
