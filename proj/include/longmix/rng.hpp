#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace longmix {

// Stream tags.  Every consumer of randomness owns a tag so that streams keyed
// by (seed, tag, id_a, id_b) never collide across modules.
namespace rngtag {
inline constexpr std::uint32_t kInit = 1;      // sampler initialization
inline constexpr std::uint32_t kAlloc = 2;     // allocation updates, id_a = subject
inline constexpr std::uint32_t kWeights = 3;   // weight updates
inline constexpr std::uint32_t kMixture = 4;   // mean/covariance updates, id_a = component
inline constexpr std::uint32_t kHyper = 5;     // hyper-scale updates
inline constexpr std::uint32_t kRanef = 6;     // random-effect updates, id_a = subject
inline constexpr std::uint32_t kGlmm = 7;      // GLMM parameter updates, id_a = marker
inline constexpr std::uint32_t kMargLik = 8;   // Monte Carlo marginal likelihood
inline constexpr std::uint32_t kSim = 9;       // data simulation, id_a = subject
inline constexpr std::uint32_t kRescale = 10;  // covariance rescaling, id_a = component
}  // namespace rngtag

// Counter-based generator (Philox 4x32-10).  A stream is identified by the
// 64-bit seed (the key) and three 32-bit ids placed in the counter; the
// remaining counter word enumerates blocks within the stream.  Streams with
// distinct (seed, tag, id_a, id_b) are independent, which is what makes
// multi-threaded sweeps reproducible: each work item draws from its own
// stream no matter which thread runs it.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t tag, std::uint32_t id_a = 0,
            std::uint32_t id_b = 0)
      : pos_(4), have_cached_(false), cached_(0.0) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    ctr_[0] = 0;
    ctr_[1] = tag;
    ctr_[2] = id_a;
    ctr_[3] = id_b;
  }

  std::uint32_t raw32() {
    if (pos_ >= 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t raw64() {
    std::uint64_t lo = raw32();
    std::uint64_t hi = raw32();
    return (hi << 32) | lo;
  }

  // Strictly inside (0,1): safe to pass to log().
  double uniform() {
    return (static_cast<double>(raw64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia-Tsang; shape > 0, rate > 0.
  double gamma(double shape, double rate = 1.0) {
    assert(shape > 0.0 && rate > 0.0);
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v / rate;
      }
    }
  }

  double chi_square(double df) { return gamma(0.5 * df, 0.5); }

  bool bernoulli(double p) { return uniform() < p; }

  // Inversion by multiplication for small means, PTRS otherwise.
  long poisson(double lambda) {
    assert(lambda >= 0.0);
    if (lambda == 0.0) return 0;
    if (lambda < 10.0) {
      double limit = std::exp(-lambda);
      double prod = 1.0;
      long k = -1;
      do {
        prod *= uniform();
        ++k;
      } while (prod > limit);
      return k;
    }
    // Hormann's transformed rejection with squeeze.
    double b = 0.931 + 2.53 * std::sqrt(lambda);
    double a = -0.059 + 0.02483 * b;
    double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      double u = uniform() - 0.5;
      double v = uniform();
      double us = 0.5 - std::abs(u);
      double kd = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<long>(kd);
      if (kd < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
          kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0)) {
        return static_cast<long>(kd);
      }
    }
  }

  // Draw an index with probability weights[j] / total (weights unnormalized).
  int categorical(const double* weights, int n, double total) {
    double u = uniform() * total;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      acc += weights[j];
      if (u < acc) return j;
    }
    return n - 1;  // guards against accumulated round-off
  }

  std::vector<double> dirichlet(const std::vector<double>& conc) {
    std::vector<double> out(conc.size());
    double total = 0.0;
    for (std::size_t j = 0; j < conc.size(); ++j) {
      out[j] = gamma(conc[j]);
      total += out[j];
    }
    for (double& v : out) v /= total;
    return out;
  }

 private:
  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t* hi,
                      std::uint32_t* lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    *hi = static_cast<std::uint32_t>(p >> 32);
    *lo = static_cast<std::uint32_t>(p);
  }

  void refill() {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    std::uint32_t c0 = ctr_[0], c1 = ctr_[1], c2 = ctr_[2], c3 = ctr_[3];
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(kM0, c0, &hi0, &lo0);
      mulhilo(kM1, c2, &hi1, &lo1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += kW0;
      k1 += kW1;
    }
    buf_[0] = c0;
    buf_[1] = c1;
    buf_[2] = c2;
    buf_[3] = c3;
    ++ctr_[0];  // next block of this stream
    pos_ = 0;
  }

  std::uint32_t key_[2];
  std::uint32_t ctr_[4];
  std::uint32_t buf_[4];
  int pos_;
  bool have_cached_;
  double cached_;
};

}  // namespace longmix
