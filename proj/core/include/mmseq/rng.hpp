#pragma once

#include <cstdint>
#include <random>

namespace mmseq {

using Engine = std::mt19937_64;

// Deterministic 64-bit seed for stream `stream` of sub-stream `substream`
// under `master`. Independent of call order, so chunked estimators can hand
// out streams by position.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t substream = 0) noexcept;

inline Engine make_engine(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t substream = 0) {
  return Engine(derive_seed(master, stream, substream));
}

}  // namespace mmseq
