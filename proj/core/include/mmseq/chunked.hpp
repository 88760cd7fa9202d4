#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mmseq {

// Size of chunk `c` when `total` draws are split into `chunks` near-equal parts.
constexpr std::size_t chunk_size(std::size_t total, std::size_t chunks, std::size_t c) noexcept {
  return total / chunks + (c < total % chunks ? 1 : 0);
}

// Runs body(c) for c in [0, chunks) on up to `threads` workers. Each chunk
// must write only its own partial result; callers reduce partials in chunk
// order afterwards, so the outcome does not depend on scheduling. The first
// exception (by chunk index) is rethrown.
template <class Body>
void run_chunks(std::size_t chunks, std::size_t threads, Body&& body) {
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = threads < chunks ? threads : chunks;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) {
          try {
            body(c);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace mmseq
