// Shared primitives: small-vector math on runtime dimension, deterministic
// RNG, stable summation, the finite-or-infinite scalar used by scaling laws,
// and the block-parallel helper that all energy loops funnel through.
#ifndef NLHG_COMMON_HPP
#define NLHG_COMMON_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nlhg {

using Index = std::int64_t;

// Spatial dimensions are runtime values but bounded so coordinate scratch
// can live on the stack.
inline constexpr int kMaxDim = 4;

using Coord = std::array<double, kMaxDim>;
using MultiIndex = std::array<Index, kMaxDim>;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// ---------------------------------------------------------------------------
// m-vector helpers (flat double spans, m components)

inline double dot_m(const double* a, const double* b, int m) {
  double s = 0;
  for (int c = 0; c < m; ++c) s += a[c] * b[c];
  return s;
}

inline double norm_sq_m(const double* a, int m) { return dot_m(a, a, m); }

inline double norm_m(const double* a, int m) { return std::sqrt(norm_sq_m(a, m)); }

// ---------------------------------------------------------------------------
// Finite-or-infinite scalar (used for the scaling-law limits alpha, beta).

struct ExtReal {
  double v = 0;
  bool infinite = false;

  static ExtReal of(double x) { return ExtReal{x, false}; }
  static ExtReal infinity() { return ExtReal{0, true}; }
  bool is_inf() const { return infinite; }
  bool is_zero() const { return !infinite && v == 0; }
  double value() const {
    require(!infinite, "ExtReal: value() on infinite");
    return v;
  }
};

// Feasible-or-not energy value; +infinity is this variant, never a float
// sentinel.
struct EnergyResult {
  bool feasible = true;
  double value = 0;

  static EnergyResult of(double v) { return EnergyResult{true, v}; }
  static EnergyResult infeasible() { return EnergyResult{false, 0}; }
};

// ---------------------------------------------------------------------------
// Deterministic RNG: xoshiro256++ seeded via splitmix64. Distribution code is
// hand-rolled so results do not depend on the standard library.

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) {
      x += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      word = z ^ (z >> 31);
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // in [0,1)
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0;
    while (u1 <= 0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  Index uniform_index(Index lo, Index hi_inclusive) {
    const auto span = static_cast<std::uint64_t>(hi_inclusive - lo + 1);
    return lo + static_cast<Index>(next() % span);
  }

  // Uniform direction on the unit sphere in R^m.
  void unit_vector(int m, double* out) {
    double n2 = 0;
    do {
      n2 = 0;
      for (int c = 0; c < m; ++c) {
        out[c] = normal();
        n2 += out[c] * out[c];
      }
    } while (n2 < 1e-24);
    const double inv = 1.0 / std::sqrt(n2);
    for (int c = 0; c < m; ++c) out[c] *= inv;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Pairwise summation: order-stable and accurate for long nonnegative sums.

inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) {
  return pairwise_sum(x.data(), x.size());
}

// ---------------------------------------------------------------------------
// Worker-count knob. Energy loops split work into contiguous blocks and merge
// results in block order, so a fixed setting gives bit-identical runs.

inline std::atomic<int>& worker_count() {
  static std::atomic<int> n{1};
  return n;
}

inline void set_worker_count(int n) {
  worker_count().store(n < 1 ? 1 : n);
}

// Runs fn(block) for block in [0, nblocks). Blocks are distributed over
// workers as contiguous ranges; fn must only touch per-block state.
template <class Fn>
void parallel_blocks(int nblocks, Fn&& fn) {
  const int workers = std::min<int>(worker_count().load(), nblocks);
  if (workers <= 1) {
    for (int b = 0; b < nblocks; ++b) fn(b);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(static_cast<long long>(nblocks) * w / workers);
    const int hi =
        static_cast<int>(static_cast<long long>(nblocks) * (w + 1) / workers);
    pool.emplace_back([lo, hi, &fn] {
      for (int b = lo; b < hi; ++b) fn(b);
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Repr-exact double formatting shared by CSV output and manifests.

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace nlhg

#endif  // NLHG_COMMON_HPP
