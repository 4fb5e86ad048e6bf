#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace asymgraph {

/// Dense product index in [0, num_nodes).
using NodeId = std::uint32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

enum class RelationKind : std::uint8_t { CoPurchase, CoView };
enum class Direction : std::uint8_t { Out, In };

inline const char* relation_tag(RelationKind kind) {
  return kind == RelationKind::CoPurchase ? "cp" : "cv";
}

// Error hierarchy. The CLI maps each class to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration values (exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite activations, gradients or losses (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// SplitMix64 finalizer; used to derive independent per-purpose seeds from one root seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t root, Parts... parts) {
  std::uint64_t s = mix_seed(root);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(parts))), ...);
  return s;
}

/// Process-wide worker count. 1 means strictly sequential.
inline std::size_t& thread_count() {
  static std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return n;
}

/// Runs fn(begin, end) over contiguous chunks of [0, n). Callers must only write
/// disjoint outputs per index so results do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_chunk = 64) {
  const std::size_t workers = std::min(thread_count(), (n + min_chunk - 1) / std::max<std::size_t>(1, min_chunk));
  if (workers <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
}

}  // namespace asymgraph
