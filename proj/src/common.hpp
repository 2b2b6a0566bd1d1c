#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace afuw {

using cplx = std::complex<double>;

/*---------------------------------- errors ---------------------------------*/

struct BudgetError : std::runtime_error {
  double estimated_count;
  explicit BudgetError(const std::string& what, double est)
      : std::runtime_error(what), estimated_count(est) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/*--------------------------------- interval --------------------------------*/

// Half-open interval [lo, hi). Empty when hi <= lo.
struct Interval {
  double lo = 0.0, hi = 0.0;
  double length() const { return hi > lo ? hi - lo : 0.0; }
  bool empty() const { return hi <= lo; }
  bool contains(double x) const { return x >= lo && x < hi; }
  Interval clip(const Interval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
  }
  double mid() const { return 0.5 * (lo + hi); }
};

inline Interval intersect(const Interval& a, const Interval& b) { return a.clip(b); }

/*----------------------------------- rng -----------------------------------*/

// splitmix64, used to derive independent substream seeds from (seed, stream).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(0xabcdef1234567890ULL + stream));
}

/*-------------------------------- parallelism ------------------------------*/

inline int& thread_budget() {
  static int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

// Deterministic parallel loop: [0,n) split into contiguous chunks, one thread
// per chunk, workers write only their own indices.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int nt = std::min<std::size_t>(thread_budget(), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  std::size_t chunk = (n + nt - 1) / nt;
  std::exception_ptr err = nullptr;
  std::mutex* mu = new std::mutex;
  for (int t = 0; t < nt; ++t) {
    std::size_t a = t * chunk, b = std::min(n, a + chunk);
    pool.emplace_back([a, b, &fn, &err, mu]() {
      try {
        for (std::size_t i = a; i < b; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(*mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  delete mu;
  if (err) std::rethrow_exception(err);
}

/*-------------------------------- quadrature -------------------------------*/

// 8-point Gauss-Legendre nodes/weights on [-1,1].
inline const std::array<double, 8>& gl8_nodes() {
  static const std::array<double, 8> x = {
      -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
      -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
      0.7966664774136267,  0.9602898564975363};
  return x;
}
inline const std::array<double, 8>& gl8_weights() {
  static const std::array<double, 8> w = {
      0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
      0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
      0.2223810344533745, 0.1012285362903763};
  return w;
}

template <class F>
double gl8(double a, double b, F&& f) {
  if (b <= a) return 0.0;
  double c = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
  const auto& xs = gl8_nodes();
  const auto& ws = gl8_weights();
  for (int i = 0; i < 8; ++i) s += ws[i] * f(c + h * xs[i]);
  return s * h;
}

template <class F>
cplx gl8c(double a, double b, F&& f) {
  if (b <= a) return {0.0, 0.0};
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  cplx s = 0.0;
  const auto& xs = gl8_nodes();
  const auto& ws = gl8_weights();
  for (int i = 0; i < 8; ++i) s += ws[i] * f(c + h * xs[i]);
  return s * h;
}

/*---------------------------------- misc -----------------------------------*/

inline double wrap_angle(double a) {  // to (-pi, pi]
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

// Monotone bisection solve f(x)=target on [lo,hi]; f increasing or decreasing.
// Absolute tolerance on x.
template <class F>
double bisect(F&& f, double lo, double hi, double target, double xtol = 1e-14) {
  double flo = f(lo) - target, fhi = f(hi) - target;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw NumericsError("bisect: target not bracketed");
  for (int it = 0; it < 200 && hi - lo > xtol; ++it) {
    double m = 0.5 * (lo + hi);
    double fm = f(m) - target;
    if (fm == 0.0) return m;
    if ((fm > 0) == (fhi > 0)) {
      hi = m;
      fhi = fm;
    } else {
      lo = m;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

inline double sqr(double x) { return x * x; }

}  // namespace afuw
