#pragma once

#include <cstdint>
#include <vector>

#include "stavc/tensor.hpp"

namespace stavc {

// pmf floor matching the 16-bit coder precision; bits() never exceeds 16 bits
// per symbol and the quantized frequency tables never assign less than 1/2^16.
inline constexpr double kPmfFloor = 1.0 / 65536.0;
inline constexpr double kInvLn2 = 1.4426950408889634074;
// conditional Gaussian scales are floored here for coder stability
inline constexpr double kMinCodeScale = 0.04;

// Training-time quantization proxy: z + U(-0.5, 0.5), gradient passes through.
Tensor quantize_train(const Tensor& z_mean, RandomSource& rng);
// Eval/coding quantization: round half away from zero, detached.
Tensor quantize_eval(const Tensor& z_mean);

// Integer-bin Gaussian entropy model, pmf(k) = Phi((k+.5-m)/s) - Phi((k-.5-m)/s).
struct DiscretizedGaussian {
  Tensor mean;
  Tensor scale;  // > 0 everywhere
};

// pmf/bits evaluated at (possibly continuous, noise-proxy) positions z.
// Differentiable w.r.t. z, mean and scale.
Tensor pmf(const DiscretizedGaussian& prior, const Tensor& z);
Tensor bits(const DiscretizedGaussian& prior, const Tensor& z);

double normal_cdf_scalar(double x);
double gaussian_pmf_scalar(int64_t k, double mean, double scale);

// Per-channel learned monotone cumulative: four layers of three hidden units,
// positive weights via softplus, gated tanh nonlinearities, sigmoid output.
// Used as the prior over hyper-latents.
struct FactorizedPrior {
  int64_t channels = 0;
  // raw (pre-softplus / pre-tanh) parameters
  Tensor w1, b1, a1;  // [C,3], layer 1 maps scalar -> 3
  Tensor w2, b2, a2;  // [C,3,3], [C,3], [C,3]
  Tensor w3, b3, a3;
  Tensor w4, b4;      // [C,3], [C,1], layer 4 maps 3 -> scalar

  static FactorizedPrior init(int64_t channels);

  // x: [N,C,H,W]; elementwise per-channel CDF. Differentiable w.r.t. x and
  // all parameters.
  Tensor cdf(const Tensor& x) const;
  Tensor pmf_at(const Tensor& z) const;   // cdf(z+.5) - cdf(z-.5)
  Tensor bits(const Tensor& z) const;     // -log2(max(pmf, floor))

  double cdf_scalar(int64_t channel, double x) const;

  std::vector<std::pair<const char*, Tensor>> named_parameters() const;
};

// 16-bit frequency table over the inclusive symbol range [lo, hi]; all
// frequencies positive, total exactly 2^16. Built deterministically from the
// real-valued pmf by the largest-remainder method, so encoder and decoder
// derive identical tables from identical model outputs.
struct FreqTable {
  int64_t lo = 0;
  int64_t hi = -1;
  std::vector<uint32_t> freq;
  std::vector<uint32_t> cum;  // size()+1 entries, cum.back() == 65536

  int64_t size() const { return hi - lo + 1; }
  bool contains(int64_t s) const { return s >= lo && s <= hi; }
};

inline constexpr uint32_t kFreqTotalBits = 16;
inline constexpr uint32_t kFreqTotal = 1u << kFreqTotalBits;
inline constexpr int64_t kMaxSupport = 1 << 15;

FreqTable quantize_pmf(const std::vector<double>& pmf, int64_t lo);

// pmf over [lo, hi] with the tail mass outside the range folded into the two
// edge symbols (sums to 1 exactly up to rounding).
std::vector<double> gaussian_pmf_folded(double mean, double scale, int64_t lo, int64_t hi);
std::vector<double> factorized_pmf_folded(const FactorizedPrior& prior, int64_t channel,
                                          int64_t lo, int64_t hi);

FreqTable gaussian_freq_table(double mean, double scale, int64_t lo, int64_t hi);

}  // namespace stavc
