#pragma once

#include <map>
#include <string>
#include <vector>

#include "stavc/tensor.hpp"

namespace stavc {

// A learned tensor with its path inside the model. Names are unique per model
// and drive checkpoint serialization.
struct Parameter {
  std::string name;
  Tensor tensor;
};

class ParamStore {
 public:
  // U(-limit, limit) init with limit = sqrt(1/fan_in)
  Tensor create_conv_weight(const std::string& name, Shape shape, int64_t fan_in,
                            RandomSource& rng);
  Tensor create_zeros(const std::string& name, Shape shape);
  void adopt(const std::string& name, Tensor t);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<Parameter>& items() const { return items_; }
  std::vector<Parameter>& items() { return items_; }
  int64_t total_count() const;

 private:
  void insert(const std::string& name, Tensor t);
  std::vector<Parameter> items_;
  std::map<std::string, size_t> index_;
};

struct ConvLayer {
  Tensor w, b;
  int stride = 1;
  int pad = 0;
  bool transposed = false;

  Tensor forward(const Tensor& x) const {
    return transposed ? conv2d_transpose(x, w, b, stride, pad) : conv2d(x, w, b, stride, pad);
  }
};

ConvLayer make_conv(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int k,
                    int stride, RandomSource& rng, bool zero_init = false);
ConvLayer make_deconv(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int k,
                      int stride, RandomSource& rng, bool zero_init = false);

// Layers with leaky_relu(0.2) between them, nothing after the last.
struct ConvStack {
  std::vector<ConvLayer> layers;
  Tensor forward(const Tensor& x) const;
};

}  // namespace stavc
