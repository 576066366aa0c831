#pragma once

#include <cstddef>
#include <functional>

namespace fedgan {

// Runs fn(0) .. fn(count - 1) on up to `threads` workers and rethrows the
// exception of the lowest failing index. Callers keep any order-dependent
// side effects (sending, summing) outside fn.
void parallel_for(std::size_t threads, std::size_t count,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fedgan
