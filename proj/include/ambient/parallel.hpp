#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ambient {

enum class ExecPolicy { serial, parallel };

// Splits [0, count) into num_chunks contiguous ranges and runs
// body(chunk_index, begin, end) for each. The chunking is a function of
// (count, num_chunks) only, never of the thread count, so results that are
// accumulated per chunk and then combined in chunk order are identical under
// both policies.
template <typename Body>
void for_each_chunk(ExecPolicy policy, std::size_t count, std::size_t num_chunks,
                    Body&& body) {
  if (num_chunks == 0) num_chunks = 1;
  if (num_chunks > count && count > 0) num_chunks = count;
  if (count == 0) return;
  const std::size_t base = count / num_chunks;
  const std::size_t rem = count % num_chunks;
  auto chunk_range = [&](std::size_t c) {
    std::size_t begin = c * base + (c < rem ? c : rem);
    std::size_t len = base + (c < rem ? 1 : 0);
    return std::pair<std::size_t, std::size_t>{begin, begin + len};
  };
  if (policy == ExecPolicy::serial) {
    for (std::size_t c = 0; c < num_chunks; ++c) {
      auto [b, e] = chunk_range(c);
      body(c, b, e);
    }
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (long c = 0; c < static_cast<long>(num_chunks); ++c) {
      auto [b, e] = chunk_range(static_cast<std::size_t>(c));
      body(static_cast<std::size_t>(c), b, e);
    }
#else
    for (std::size_t c = 0; c < num_chunks; ++c) {
      auto [b, e] = chunk_range(c);
      body(c, b, e);
    }
#endif
  }
}

// Default chunk count for batch kernels. Fixed so that chunked reductions are
// reproducible regardless of OMP_NUM_THREADS.
inline constexpr std::size_t kDefaultChunks = 16;

}  // namespace ambient
