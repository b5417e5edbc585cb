#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dmsuc {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Error type for all contract violations (bad ids, malformed files, ...).
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <typename... Args>
[[noreturn]] inline void fail(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  throw Error(os.str());
}

template <typename... Args>
inline void require(bool cond, Args&&... args) {
  if (!cond) fail(std::forward<Args>(args)...);
}

/// One violated invariant, with enough context to locate it.
struct ValidationIssue {
  std::string code;     // short machine-readable tag, e.g. "edge_prob_sum"
  std::string message;  // human-readable description
};

/// Report-style result: violations are the payload, not exceptions.
struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }

  void add(std::string code, std::string message) {
    issues.push_back({std::move(code), std::move(message)});
  }

  std::string to_string() const {
    std::ostringstream os;
    for (const auto& i : issues) os << "[" << i.code << "] " << i.message << "\n";
    return os.str();
  }
};

// --- deterministic RNG helpers ------------------------------------------
//
// All library-side randomness flows through an explicit uint64 seed so two
// runs with the same configuration are byte-identical.  Bounded draws use
// rejection sampling instead of std::uniform_int_distribution, whose output
// is implementation-defined.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and two indices.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s ^= (a + 0x9e3779b97f4a7c15ULL) * 0xff51afd7ed558ccdULL;
  h ^= splitmix64(s);
  s ^= (b + 0xc4ceb9fe1a85ec53ULL) * 0xc2b2ae3d27d4eb4fULL;
  h ^= splitmix64(s);
  return h ? h : 0x1234567890abcdefULL;
}

/// Uniform draw in [0, n) via Lemire rejection; portable across platforms.
template <typename Rng>
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) fail("uniform_below: empty range");
  while (true) {
    std::uint64_t x = rng();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    std::uint64_t low = static_cast<std::uint64_t>(m);
    if (low < n) {
      std::uint64_t threshold = (0ULL - n) % n;
      if (low < threshold) continue;
    }
    return static_cast<std::uint64_t>(m >> 64);
  }
}

/// Uniform double in [0, 1) with 53 random bits.
template <typename Rng>
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// --- small parallel helper ----------------------------------------------

/// Runs fn(i) for i in [0, count) on up to `jobs` threads.  The work items
/// must be independent; exceptions are rethrown on the caller thread.
inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (jobs <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace dmsuc
