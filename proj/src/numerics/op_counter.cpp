#include "ctxproto/numerics/op_counter.hpp"

namespace ctxproto::numerics {

namespace {
thread_local ScopedOpCounter* active_counter = nullptr;
thread_local OpCounts* active_counts = nullptr;
}  // namespace

ScopedOpCounter::ScopedOpCounter() : previous_(active_counter) {
  active_counter = this;
  active_counts = &counts_;
}

ScopedOpCounter::~ScopedOpCounter() {
  active_counter = previous_;
  active_counts = previous_ ? &previous_->counts_ : nullptr;
}

namespace detail {

void record_mul_adds(std::uint64_t n) noexcept {
  if (active_counts) active_counts->mul_adds += n;
}

void record_elementwise(std::uint64_t n) noexcept {
  if (active_counts) active_counts->elementwise += n;
}

}  // namespace detail
}  // namespace ctxproto::numerics
