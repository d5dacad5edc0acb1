#include "stavc/nets.hpp"

#include <cmath>

namespace stavc {

void ParamStore::insert(const std::string& name, Tensor t) {
  if (index_.count(name)) throw UsageError("duplicate parameter name: " + name);
  index_[name] = items_.size();
  items_.push_back({name, std::move(t)});
}

Tensor ParamStore::create_conv_weight(const std::string& name, Shape shape, int64_t fan_in,
                                      RandomSource& rng) {
  double limit = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor t = Tensor::rand_uniform(std::move(shape), rng, -limit, limit, true);
  insert(name, t);
  return t;
}

Tensor ParamStore::create_zeros(const std::string& name, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  insert(name, t);
  return t;
}

void ParamStore::adopt(const std::string& name, Tensor t) {
  t.set_requires_grad(true);
  insert(name, std::move(t));
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter: " + name);
  return items_[it->second].tensor;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter: " + name);
  return items_[it->second].tensor;
}

int64_t ParamStore::total_count() const {
  int64_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

ConvLayer make_conv(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int k,
                    int stride, RandomSource& rng, bool zero_init) {
  ConvLayer l;
  l.stride = stride;
  l.pad = k / 2;
  l.transposed = false;
  if (zero_init)
    l.w = ps.create_zeros(name + ".w", {out_ch, in_ch, k, k});
  else
    l.w = ps.create_conv_weight(name + ".w", {out_ch, in_ch, k, k},
                                static_cast<int64_t>(in_ch) * k * k, rng);
  l.b = ps.create_zeros(name + ".b", {out_ch});
  return l;
}

ConvLayer make_deconv(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int k,
                      int stride, RandomSource& rng, bool zero_init) {
  ConvLayer l;
  l.stride = stride;
  l.pad = k / 2;
  l.transposed = true;
  if (zero_init)
    l.w = ps.create_zeros(name + ".w", {in_ch, out_ch, k, k});
  else
    l.w = ps.create_conv_weight(name + ".w", {in_ch, out_ch, k, k},
                                static_cast<int64_t>(in_ch) * k * k, rng);
  l.b = ps.create_zeros(name + ".b", {out_ch});
  return l;
}

Tensor ConvStack::forward(const Tensor& x) const {
  if (layers.empty()) throw UsageError("empty conv stack");
  Tensor h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = leaky_relu(h, 0.2);
  }
  return h;
}

}  // namespace stavc
