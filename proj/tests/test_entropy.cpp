#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "stavc/entropy.hpp"

using namespace stavc;

TEST_CASE("quantize_train noise window and gradient") {
  RandomSource rng(101);
  Tensor z = Tensor::rand_uniform({512}, rng, -4, 4, true);
  RandomSource noise(5);
  Tensor zt = quantize_train(z, noise);
  for (size_t i = 0; i < zt.values().size(); ++i) {
    double d = zt.values()[i] - z.values()[i];
    CHECK(d >= -0.5);
    CHECK(d < 0.5);
  }
  sum(zt).backward();
  for (double g : z.grad()) CHECK(g == 1.0);
}

TEST_CASE("quantize_eval rounds half away from zero") {
  Tensor z = Tensor::from_data({5}, {0.5, -0.5, 0.49, -0.49, 2.5});
  CHECK(quantize_eval(z).values() == std::vector<double>{1, -1, 0, 0, 3});
}

TEST_CASE("discretized gaussian pmf values") {
  // standard normal, center bin, against quadrature
  double ref = oracles::normal_cdf_quadrature(0.5) - oracles::normal_cdf_quadrature(-0.5);
  CHECK(gaussian_pmf_scalar(0, 0.0, 1.0) == doctest::Approx(ref).epsilon(1e-9));
  CHECK(gaussian_pmf_scalar(0, 0.0, 1.0) == doctest::Approx(0.38292).epsilon(1e-4));

  DiscretizedGaussian g{Tensor::zeros({1}), Tensor::full({1}, 1.0)};
  CHECK(pmf(g, Tensor::zeros({1})).item() == doctest::Approx(0.3829249225).epsilon(1e-9));

  // bits grow roughly like log2(scale) for wide scales
  double prev_bits = 0.0;
  for (double s : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    DiscretizedGaussian gs{Tensor::zeros({1}), Tensor::full({1}, s)};
    double b = bits(gs, Tensor::zeros({1})).item();
    CHECK(b > prev_bits);
    prev_bits = b;
  }
}

TEST_CASE("gaussian pmf normalizes over wide support") {
  for (double s : {0.04, 0.5, 1.0, 8.0}) {
    double total = 0.0;
    for (int64_t k = -64; k <= 64; ++k) total += gaussian_pmf_scalar(k, 0.3, s);
    CHECK(std::fabs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("folded pmfs sum to one exactly") {
  auto p = gaussian_pmf_folded(0.7, 3.0, -4, 5);
  double t = 0.0;
  for (double v : p) t += v;
  CHECK(std::fabs(t - 1.0) < 1e-12);

  FactorizedPrior fp = FactorizedPrior::init(2);
  auto p2 = factorized_pmf_folded(fp, 1, -6, 6);
  t = 0.0;
  for (double v : p2) t += v;
  CHECK(std::fabs(t - 1.0) < 1e-12);
}

TEST_CASE("gaussian bits gradients vs finite differences") {
  RandomSource rng(103);
  Tensor z = Tensor::rand_uniform({2, 3, 2, 2}, rng, -2, 2, true);
  Tensor mu = Tensor::rand_uniform({2, 3, 2, 2}, rng, -1, 1, true);
  Tensor sc = Tensor::rand_uniform({2, 3, 2, 2}, rng, 0.3, 2.0, true);
  auto loss = [&] { return sum(bits(DiscretizedGaussian{mu, sc}, z)); };
  CHECK(oracles::grad_max_rel_err(z, loss) < 1e-4);
  CHECK(oracles::grad_max_rel_err(mu, loss) < 1e-4);
  CHECK(oracles::grad_max_rel_err(sc, loss) < 1e-4);
}

TEST_CASE("factorized prior cdf properties") {
  FactorizedPrior fp = FactorizedPrior::init(3);

  // strictly increasing, sensible limits
  for (int64_t c = 0; c < 3; ++c) {
    double prev = -1.0;
    for (double x = -40; x <= 40; x += 0.5) {
      double v = fp.cdf_scalar(c, x);
      CHECK(v > prev);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
    CHECK(fp.cdf_scalar(c, -200.0) < 1e-4);
    CHECK(fp.cdf_scalar(c, 200.0) > 1.0 - 1e-4);
  }

  // tensor path agrees with scalar path bit-for-bit
  RandomSource rng(107);
  Tensor x = Tensor::rand_uniform({2, 3, 4, 4}, rng, -5, 5);
  Tensor c = fp.cdf(x);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t e = 0; e < 16; ++e) {
        int64_t i = (n * 3 + ch) * 16 + e;
        CHECK(c.values()[i] == fp.cdf_scalar(ch, x.values()[i]));
      }
}

TEST_CASE("factorized prior bits gradients vs finite differences") {
  FactorizedPrior fp = FactorizedPrior::init(2);
  RandomSource rng(109);
  Tensor z = Tensor::rand_uniform({1, 2, 3, 3}, rng, -3, 3, true);
  auto loss = [&] { return sum(fp.bits(z)); };
  CHECK(oracles::grad_max_rel_err(z, loss) < 1e-4);
  for (auto& [name, p] : fp.named_parameters()) {
    CAPTURE(name);
    Tensor t = p;
    CHECK(oracles::grad_max_rel_err(t, loss) < 1e-4);
  }
}

TEST_CASE("pmf quantization to 16-bit frequencies") {
  FreqTable t = quantize_pmf({0.5, 0.25, 0.25}, -1);
  CHECK(t.lo == -1);
  CHECK(t.hi == 1);
  CHECK(t.freq == std::vector<uint32_t>{32768, 16384, 16384});
  CHECK(t.cum.back() == kFreqTotal);

  // tiny probabilities still get at least one count
  FreqTable t2 = quantize_pmf({1e-12, 1.0 - 2e-12, 1e-12}, 0);
  CHECK(t2.freq[0] == 1);
  CHECK(t2.freq[2] == 1);
  CHECK(t2.cum.back() == kFreqTotal);

  // deterministic: same input twice, same table
  std::vector<double> pmf;
  RandomSource rng(113);
  for (int i = 0; i < 40; ++i) pmf.push_back(rng.uniform(0.01, 1.0));
  FreqTable a = quantize_pmf(pmf, -20);
  FreqTable b = quantize_pmf(pmf, -20);
  CHECK(a.freq == b.freq);

  CHECK_THROWS_AS(quantize_pmf({}, 0), CodecError);
}

TEST_CASE("gaussian frequency tables cover the folded mass") {
  FreqTable t = gaussian_freq_table(0.2, 0.7, -5, 5);
  CHECK(t.size() == 11);
  uint32_t total = 0;
  for (uint32_t f : t.freq) {
    CHECK(f >= 1);
    total += f;
  }
  CHECK(total == kFreqTotal);
}
