#include "stavc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stavc {

using detail::TensorNode;

Tensor quantize_train(const Tensor& z_mean, RandomSource& rng) {
  return add_uniform_noise(z_mean, rng);
}

Tensor quantize_eval(const Tensor& z_mean) { return round_half_away(z_mean); }

double normal_cdf_scalar(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

double gaussian_pmf_scalar(int64_t k, double mean, double scale) {
  double kk = static_cast<double>(k);
  return normal_cdf_scalar((kk + 0.5 - mean) / scale) -
         normal_cdf_scalar((kk - 0.5 - mean) / scale);
}

Tensor pmf(const DiscretizedGaussian& prior, const Tensor& z) {
  Tensor hi = normal_cdf((z - prior.mean + 0.5) / prior.scale);
  Tensor lo = normal_cdf((z - prior.mean - 0.5) / prior.scale);
  return hi - lo;
}

Tensor bits(const DiscretizedGaussian& prior, const Tensor& z) {
  return neg(log(clamp_min(pmf(prior, z), kPmfFloor))) * kInvLn2;
}

// ---------------------------------------------------------------------------
// factorized prior
// ---------------------------------------------------------------------------

namespace {

constexpr int kH = 3;  // hidden units per layer

inline double softplus_s(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid_s(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// per-channel transformed parameters
struct FpChan {
  double W1[kH], B1[kH], A1[kH];
  double W2[kH * kH], B2[kH], A2[kH];
  double W3[kH * kH], B3[kH], A3[kH];
  double W4[kH], B4;
};

FpChan load_chan(const FactorizedPrior& p, int64_t c) {
  FpChan f;
  const auto& w1 = p.w1.values();
  const auto& b1 = p.b1.values();
  const auto& a1 = p.a1.values();
  const auto& w2 = p.w2.values();
  const auto& b2 = p.b2.values();
  const auto& a2 = p.a2.values();
  const auto& w3 = p.w3.values();
  const auto& b3 = p.b3.values();
  const auto& a3 = p.a3.values();
  const auto& w4 = p.w4.values();
  const auto& b4 = p.b4.values();
  for (int i = 0; i < kH; ++i) {
    f.W1[i] = softplus_s(w1[c * kH + i]);
    f.B1[i] = b1[c * kH + i];
    f.A1[i] = std::tanh(a1[c * kH + i]);
    f.B2[i] = b2[c * kH + i];
    f.A2[i] = std::tanh(a2[c * kH + i]);
    f.B3[i] = b3[c * kH + i];
    f.A3[i] = std::tanh(a3[c * kH + i]);
    f.W4[i] = softplus_s(w4[c * kH + i]);
  }
  for (int i = 0; i < kH * kH; ++i) {
    f.W2[i] = softplus_s(w2[c * kH * kH + i]);
    f.W3[i] = softplus_s(w3[c * kH * kH + i]);
  }
  f.B4 = b4[c];
  return f;
}

struct FpTrace {
  double h1[kH], t1[kH], g1[kH];
  double h2[kH], t2[kH], g2[kH];
  double h3[kH], t3[kH], g3[kH];
  double h4;
};

inline double fp_forward(const FpChan& f, double x, FpTrace& tr) {
  for (int i = 0; i < kH; ++i) {
    tr.h1[i] = f.W1[i] * x + f.B1[i];
    tr.t1[i] = std::tanh(tr.h1[i]);
    tr.g1[i] = tr.h1[i] + f.A1[i] * tr.t1[i];
  }
  for (int i = 0; i < kH; ++i) {
    double s = f.B2[i];
    for (int j = 0; j < kH; ++j) s += f.W2[i * kH + j] * tr.g1[j];
    tr.h2[i] = s;
    tr.t2[i] = std::tanh(s);
    tr.g2[i] = s + f.A2[i] * tr.t2[i];
  }
  for (int i = 0; i < kH; ++i) {
    double s = f.B3[i];
    for (int j = 0; j < kH; ++j) s += f.W3[i * kH + j] * tr.g2[j];
    tr.h3[i] = s;
    tr.t3[i] = std::tanh(s);
    tr.g3[i] = s + f.A3[i] * tr.t3[i];
  }
  double s = f.B4;
  for (int j = 0; j < kH; ++j) s += f.W4[j] * tr.g3[j];
  tr.h4 = s;
  return sigmoid_s(s);
}

}  // namespace

FactorizedPrior FactorizedPrior::init(int64_t channels) {
  FactorizedPrior p;
  p.channels = channels;
  auto fill = [&](Shape s, double v) { return Tensor::full(std::move(s), v, true); };
  // layer slopes multiply to roughly 1/10 at zero input
  double w_fan1 = std::log(std::expm1(0.5623));
  double w_fan3 = std::log(std::expm1(0.5623 / kH));
  p.w1 = fill({channels, kH}, w_fan1);
  p.b1 = Tensor::zeros({channels, kH}, true);
  for (int64_t c = 0; c < channels; ++c)
    for (int i = 0; i < kH; ++i) p.b1.values()[c * kH + i] = static_cast<double>(i - 1);
  p.a1 = Tensor::zeros({channels, kH}, true);
  p.w2 = fill({channels, kH, kH}, w_fan3);
  p.b2 = Tensor::zeros({channels, kH}, true);
  p.a2 = Tensor::zeros({channels, kH}, true);
  p.w3 = fill({channels, kH, kH}, w_fan3);
  p.b3 = Tensor::zeros({channels, kH}, true);
  p.a3 = Tensor::zeros({channels, kH}, true);
  p.w4 = fill({channels, kH}, w_fan3);
  p.b4 = Tensor::zeros({channels, 1}, true);
  return p;
}

std::vector<std::pair<const char*, Tensor>> FactorizedPrior::named_parameters() const {
  return {{"w1", w1}, {"b1", b1}, {"a1", a1}, {"w2", w2}, {"b2", b2}, {"a2", a2},
          {"w3", w3}, {"b3", b3}, {"a3", a3}, {"w4", w4}, {"b4", b4}};
}

double FactorizedPrior::cdf_scalar(int64_t channel, double x) const {
  if (channel < 0 || channel >= channels) throw UsageError("factorized prior channel out of range");
  FpChan f = load_chan(*this, channel);
  FpTrace tr;
  return fp_forward(f, x, tr);
}

Tensor FactorizedPrior::cdf(const Tensor& x) const {
  const Shape& s = x.shape();
  if (s.size() != 4) throw DimensionError("factorized cdf expects [N,C,H,W]");
  if (s[1] != channels) throw DimensionError("factorized cdf channel mismatch");
  int64_t N = s[0], C = s[1], plane = s[2] * s[3];
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  std::vector<FpChan> chans(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) chans[c] = load_chan(*this, c);
  FpTrace tr;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const FpChan& f = chans[c];
      const double* xi = xv.data() + (n * C + c) * plane;
      double* oi = out.data() + (n * C + c) * plane;
      for (int64_t e = 0; e < plane; ++e) oi[e] = fp_forward(f, xi[e], tr);
    }

  std::vector<Tensor> parents = {x,  w1, b1, a1, w2, b2, a2, w3, b3, a3, w4, b4};
  std::vector<std::shared_ptr<TensorNode>> pn;
  for (auto& p : parents) pn.push_back(p.node());
  FactorizedPrior self_copy = *this;  // shares nodes, keeps raw param access alive
  return detail::make_custom_op(
      s, std::move(out), parents,
      [pn, self_copy, N, C, plane](TensorNode& self) {
        auto& px = *pn[0];
        bool need_x = px.requires_grad;
        bool need_p = false;
        for (size_t i = 1; i < pn.size(); ++i) need_p = need_p || pn[i]->requires_grad;
        if (!need_x && !need_p) return;
        for (auto& p : pn)
          if (p->requires_grad) p->ensure_grad();

        const auto& w1v = self_copy.w1.values();
        const auto& w2v = self_copy.w2.values();
        const auto& w3v = self_copy.w3.values();
        const auto& w4v = self_copy.w4.values();

        std::vector<FpChan> chans(static_cast<size_t>(C));
        for (int64_t c = 0; c < C; ++c) chans[c] = load_chan(self_copy, c);

        FpTrace tr;
        for (int64_t n = 0; n < N; ++n)
          for (int64_t c = 0; c < C; ++c) {
            const FpChan& f = chans[c];
            const double* xi = px.val.data() + (n * C + c) * plane;
            const double* gi = self.grad.data() + (n * C + c) * plane;
            const double* yi = self.val.data() + (n * C + c) * plane;
            for (int64_t e = 0; e < plane; ++e) {
              double go = gi[e];
              if (go == 0.0) continue;
              double x = xi[e];
              fp_forward(f, x, tr);
              double y = yi[e];
              double d4 = go * y * (1.0 - y);
              if (pn[11]->requires_grad) pn[11]->grad[c] += d4;  // b4
              double dg3[kH], dh3[kH], dg2[kH], dh2[kH], dg1[kH], dh1[kH];
              for (int i = 0; i < kH; ++i) {
                dg3[i] = d4 * f.W4[i];
                if (pn[10]->requires_grad)
                  pn[10]->grad[c * kH + i] += d4 * sigmoid_s(w4v[c * kH + i]) * tr.g3[i];
              }
              for (int i = 0; i < kH; ++i) {
                dh3[i] = dg3[i] * (1.0 + f.A3[i] * (1.0 - tr.t3[i] * tr.t3[i]));
                if (pn[9]->requires_grad) {
                  double A = f.A3[i];
                  pn[9]->grad[c * kH + i] += dg3[i] * (1.0 - A * A) * tr.t3[i];
                }
                if (pn[8]->requires_grad) pn[8]->grad[c * kH + i] += dh3[i];  // b3
              }
              for (int j = 0; j < kH; ++j) {
                double s = 0.0;
                for (int i = 0; i < kH; ++i) {
                  s += dh3[i] * f.W3[i * kH + j];
                  if (pn[7]->requires_grad)
                    pn[7]->grad[c * kH * kH + i * kH + j] +=
                        dh3[i] * sigmoid_s(w3v[c * kH * kH + i * kH + j]) * tr.g2[j];
                }
                dg2[j] = s;
              }
              for (int i = 0; i < kH; ++i) {
                dh2[i] = dg2[i] * (1.0 + f.A2[i] * (1.0 - tr.t2[i] * tr.t2[i]));
                if (pn[6]->requires_grad) {
                  double A = f.A2[i];
                  pn[6]->grad[c * kH + i] += dg2[i] * (1.0 - A * A) * tr.t2[i];
                }
                if (pn[5]->requires_grad) pn[5]->grad[c * kH + i] += dh2[i];  // b2
              }
              for (int j = 0; j < kH; ++j) {
                double s = 0.0;
                for (int i = 0; i < kH; ++i) {
                  s += dh2[i] * f.W2[i * kH + j];
                  if (pn[4]->requires_grad)
                    pn[4]->grad[c * kH * kH + i * kH + j] +=
                        dh2[i] * sigmoid_s(w2v[c * kH * kH + i * kH + j]) * tr.g1[j];
                }
                dg1[j] = s;
              }
              double dx = 0.0;
              for (int i = 0; i < kH; ++i) {
                dh1[i] = dg1[i] * (1.0 + f.A1[i] * (1.0 - tr.t1[i] * tr.t1[i]));
                if (pn[3]->requires_grad) {
                  double A = f.A1[i];
                  pn[3]->grad[c * kH + i] += dg1[i] * (1.0 - A * A) * tr.t1[i];
                }
                if (pn[2]->requires_grad) pn[2]->grad[c * kH + i] += dh1[i];  // b1
                if (pn[1]->requires_grad)
                  pn[1]->grad[c * kH + i] += dh1[i] * sigmoid_s(w1v[c * kH + i]) * x;
                dx += dh1[i] * f.W1[i];
              }
              if (need_x) px.grad[(n * C + c) * plane + e] += dx;
            }
          }
      },
      "factorized_cdf");
}

Tensor FactorizedPrior::pmf_at(const Tensor& z) const { return cdf(z + 0.5) - cdf(z - 0.5); }

Tensor FactorizedPrior::bits(const Tensor& z) const {
  return neg(log(clamp_min(pmf_at(z), kPmfFloor))) * kInvLn2;
}

// ---------------------------------------------------------------------------
// frequency tables
// ---------------------------------------------------------------------------

FreqTable quantize_pmf(const std::vector<double>& pmf, int64_t lo) {
  int64_t n = static_cast<int64_t>(pmf.size());
  if (n < 1) throw CodecError("empty pmf");
  if (n > kMaxSupport) throw CodecError("coder support too wide");
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0)) throw CodecError("negative or NaN pmf entry");
    total += p;
  }
  if (total <= 0.0) throw CodecError("pmf sums to zero");

  std::vector<int64_t> f(static_cast<size_t>(n));
  std::vector<double> rem(static_cast<size_t>(n));
  int64_t sum = 0;
  for (int64_t i = 0; i < n; ++i) {
    double t = pmf[i] / total * static_cast<double>(kFreqTotal);
    int64_t fl = static_cast<int64_t>(std::floor(t));
    rem[i] = t - static_cast<double>(fl);
    f[i] = std::max<int64_t>(1, fl);
    sum += f[i];
  }
  int64_t diff = static_cast<int64_t>(kFreqTotal) - sum;
  if (diff > 0) {
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int64_t a, int64_t b) { return rem[a] > rem[b]; });
    int64_t k = 0;
    while (diff > 0) {
      f[order[k % n]] += 1;
      --diff;
      ++k;
    }
  }
  while (diff < 0) {
    // shrink the largest bins (first occurrence wins) until the total fits
    int64_t best = 0;
    for (int64_t i = 1; i < n; ++i)
      if (f[i] > f[best]) best = i;
    if (f[best] <= 1) throw CodecError("cannot fit pmf into 16-bit frequencies");
    f[best] -= 1;
    ++diff;
  }

  FreqTable t;
  t.lo = lo;
  t.hi = lo + n - 1;
  t.freq.resize(static_cast<size_t>(n));
  t.cum.resize(static_cast<size_t>(n) + 1);
  uint32_t c = 0;
  for (int64_t i = 0; i < n; ++i) {
    t.freq[i] = static_cast<uint32_t>(f[i]);
    t.cum[i] = c;
    c += t.freq[i];
  }
  t.cum[n] = c;
  if (c != kFreqTotal) throw CodecError("frequency table total mismatch");
  return t;
}

std::vector<double> gaussian_pmf_folded(double mean, double scale, int64_t lo, int64_t hi) {
  if (hi < lo) throw CodecError("empty symbol range");
  int64_t n = hi - lo + 1;
  std::vector<double> p(static_cast<size_t>(n));
  if (n == 1) {
    p[0] = 1.0;
    return p;
  }
  for (int64_t k = lo; k <= hi; ++k) {
    double d;
    if (k == lo)
      d = normal_cdf_scalar((static_cast<double>(k) + 0.5 - mean) / scale);
    else if (k == hi)
      d = 1.0 - normal_cdf_scalar((static_cast<double>(k) - 0.5 - mean) / scale);
    else
      d = gaussian_pmf_scalar(k, mean, scale);
    p[k - lo] = d;
  }
  return p;
}

std::vector<double> factorized_pmf_folded(const FactorizedPrior& prior, int64_t channel,
                                          int64_t lo, int64_t hi) {
  if (hi < lo) throw CodecError("empty symbol range");
  int64_t n = hi - lo + 1;
  std::vector<double> p(static_cast<size_t>(n));
  if (n == 1) {
    p[0] = 1.0;
    return p;
  }
  for (int64_t k = lo; k <= hi; ++k) {
    double d;
    if (k == lo)
      d = prior.cdf_scalar(channel, static_cast<double>(k) + 0.5);
    else if (k == hi)
      d = 1.0 - prior.cdf_scalar(channel, static_cast<double>(k) - 0.5);
    else
      d = prior.cdf_scalar(channel, static_cast<double>(k) + 0.5) -
          prior.cdf_scalar(channel, static_cast<double>(k) - 0.5);
    p[k - lo] = std::max(d, 0.0);
  }
  return p;
}

FreqTable gaussian_freq_table(double mean, double scale, int64_t lo, int64_t hi) {
  return quantize_pmf(gaussian_pmf_folded(mean, scale, lo, hi), lo);
}

}  // namespace stavc
