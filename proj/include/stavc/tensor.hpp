#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "stavc/error.hpp"
#include "stavc/random.hpp"

namespace stavc {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;  // empty until needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;  // accumulates self.grad into parents

  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }
};

bool grad_mode_enabled();
bool finite_checks_enabled();
void set_finite_checks(bool on);

}  // namespace detail

// Disables tape recording in scope (eval / codec paths).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense row-major double tensor participating in a reverse-mode tape.
// Cheap to copy (shared node). Values are written through values() only
// during construction/setup; ops treat inputs as immutable.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v);
  static Tensor rand_uniform(Shape shape, RandomSource& rng, double lo, double hi,
                             bool requires_grad = false);
  static Tensor rand_normal(Shape shape, RandomSource& rng, double mean, double stddev,
                            bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  size_t ndim() const { return shape().size(); }
  int64_t dim(size_t i) const;
  int64_t numel() const;
  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool rg);

  std::vector<double>& values();
  const std::vector<double>& values() const;
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<double>& grad() const;
  std::vector<double>& grad_mut();
  void zero_grad();

  double item() const;  // scalar tensors only
  double value_at(std::initializer_list<int64_t> idx) const;

  // Same values, no tape history / no grad requirement.
  Tensor detach() const;
  Tensor clone_values() const { return detach(); }

  // Reverse-mode pass from a scalar loss. Grads of everything reachable are
  // overwritten (zeroed first, then accumulated within this single pass).
  void backward();

  std::shared_ptr<detail::TensorNode> node() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> n);

 private:
  std::shared_ptr<detail::TensorNode> impl_;
};

// ---- elementwise (broadcasting, numpy alignment rules) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator+(double a, const Tensor& b) { return add(b, a); }
inline Tensor operator-(const Tensor& a, double b) { return add(a, -b); }
inline Tensor operator-(double a, const Tensor& b) { return sub(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }

// ---- unary ----
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor normal_cdf(const Tensor& x);       // standard normal CDF, d/dx = pdf
Tensor clamp_min(const Tensor& x, double lo);
Tensor square(const Tensor& x);

// ---- reductions ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// ---- structure ----
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat_channels(const std::vector<Tensor>& xs);        // dim 1 of [N,C,H,W]
Tensor narrow_channels(const Tensor& x, int64_t start, int64_t len);
Tensor narrow_hw(const Tensor& x, int64_t h0, int64_t h, int64_t w0, int64_t w);
Tensor stack_batch(const std::vector<Tensor>& frames);        // k x [C,H,W] -> [k,C,H,W]
Tensor select_batch(const Tensor& x, int64_t n);              // [N,C,H,W] -> [C,H,W]

// ---- convolution ([N,C,H,W]; weight [Cout,Cin,kh,kw] / transpose [Cin,Cout,kh,kw]) ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
// output_padding < 0 selects the default stride-1, which makes a /s encoder
// block and the matching xs decoder block exact spatial inverses.
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                        int padding, int output_padding = -1);

// ---- resampling ([N,C,H,W] or [C,H,W]) ----
Tensor avg_pool2x(const Tensor& x);
Tensor upsample_bilinear2x(const Tensor& x);

// ---- quantization proxies ----
Tensor add_uniform_noise(const Tensor& x, RandomSource& rng);  // U(-0.5,0.5), grad = identity
Tensor round_half_away(const Tensor& x);                       // detached integers

// epsilon below which div() reports a numeric error
inline constexpr double kDivEpsilon = 1e-12;

namespace detail {
void check_all_finite(const std::vector<double>& v, const char* op);
// Builds a tape node for ops implemented outside the tensor core. The
// backward fn reads self.grad and accumulates into the parent nodes' grads.
Tensor make_custom_op(Shape shape, std::vector<double> val, const std::vector<Tensor>& parents,
                      std::function<void(TensorNode&)> bwd, const char* opname);
}

}  // namespace stavc
