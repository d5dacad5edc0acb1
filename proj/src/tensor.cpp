#include "stavc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "stavc/parallel.hpp"

namespace stavc {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string r = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
bool g_finite_checks = true;
}  // namespace

bool grad_mode_enabled() { return g_grad_enabled; }
bool finite_checks_enabled() { return g_finite_checks; }
void set_finite_checks(bool on) { g_finite_checks = on; }

void check_all_finite(const std::vector<double>& v, const char* op) {
  if (!g_finite_checks) return;
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

}  // namespace detail

NoGradGuard::NoGradGuard() : prev_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = prev_; }

using detail::TensorNode;

Tensor Tensor::wrap(std::shared_ptr<TensorNode> n) {
  Tensor t;
  t.impl_ = std::move(n);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<TensorNode>();
  int64_t cnt = shape_numel(shape);
  if (cnt < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
  n->shape = std::move(shape);
  n->val.assign(static_cast<size_t>(cnt), value);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw DimensionError("data size " + std::to_string(values.size()) + " does not match shape " +
                         shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = std::move(values);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

Tensor Tensor::rand_uniform(Shape shape, RandomSource& rng, double lo, double hi,
                            bool requires_grad) {
  int64_t cnt = shape_numel(shape);
  std::vector<double> v(static_cast<size_t>(cnt));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return from_data(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::rand_normal(Shape shape, RandomSource& rng, double mean, double stddev,
                           bool requires_grad) {
  int64_t cnt = shape_numel(shape);
  std::vector<double> v(static_cast<size_t>(cnt));
  for (auto& x : v) x = mean + stddev * rng.normal();
  return from_data(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw UsageError("operation on undefined tensor");
  return impl_->shape;
}

int64_t Tensor::dim(size_t i) const {
  const Shape& s = shape();
  if (i >= s.size()) throw DimensionError("dim index out of range");
  return s[i];
}

int64_t Tensor::numel() const { return shape_numel(shape()); }

Tensor& Tensor::set_requires_grad(bool rg) {
  if (!impl_) throw UsageError("operation on undefined tensor");
  if (impl_->backward_fn) throw UsageError("requires_grad can only be toggled on leaf tensors");
  impl_->requires_grad = rg;
  return *this;
}

std::vector<double>& Tensor::values() {
  if (!impl_) throw UsageError("operation on undefined tensor");
  return impl_->val;
}

const std::vector<double>& Tensor::values() const {
  if (!impl_) throw UsageError("operation on undefined tensor");
  return impl_->val;
}

const std::vector<double>& Tensor::grad() const {
  if (!impl_ || impl_->grad.empty()) throw UsageError("tensor has no gradient");
  return impl_->grad;
}

std::vector<double>& Tensor::grad_mut() {
  if (!impl_) throw UsageError("operation on undefined tensor");
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() requires a one-element tensor");
  return values()[0];
}

double Tensor::value_at(std::initializer_list<int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) throw DimensionError("index rank mismatch");
  int64_t off = 0;
  size_t d = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= s[d]) throw DimensionError("index out of range");
    off = off * s[d] + i;
    ++d;
  }
  return values()[static_cast<size_t>(off)];
}

Tensor Tensor::detach() const {
  if (!impl_) throw UsageError("operation on undefined tensor");
  auto n = std::make_shared<TensorNode>();
  n->shape = impl_->shape;
  n->val = impl_->val;
  return wrap(std::move(n));
}

void Tensor::backward() {
  if (!impl_) throw UsageError("operation on undefined tensor");
  if (numel() != 1) throw UsageError("backward requires a scalar loss");
  if (!impl_->requires_grad)
    throw UsageError("loss is not connected to any tensor requiring gradients");

  // Iterative post-order DFS: parents appear before children, so reverse
  // iteration visits each node only after all its consumers.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.push_back({impl_.get(), 0});
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->parents.size()) {
      TensorNode* p = top.first->parents[top.second++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(top.first);
      stack.pop_back();
    }
  }
  for (TensorNode* n : order) {
    n->ensure_grad();
    std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  impl_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

// ---------------------------------------------------------------------------
// op plumbing
// ---------------------------------------------------------------------------

namespace {

Tensor make_op(Shape shape, std::vector<double> val, const std::vector<Tensor>& parents,
               std::function<void(TensorNode&)> bwd, const char* opname) {
  detail::check_all_finite(val, opname);
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->val = std::move(val);
  bool rg = false;
  if (detail::grad_mode_enabled()) {
    for (const auto& p : parents) rg = rg || p.requires_grad();
  }
  n->requires_grad = rg;
  if (rg) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(bwd);
  }
  return Tensor::wrap(std::move(n));
}

void add_into(TensorNode& p, const std::vector<double>& g) {
  p.ensure_grad();
  const size_t n = g.size();
  double* dst = p.grad.data();
  const double* src = g.data();
  for (size_t i = 0; i < n; ++i) dst[i] += src[i];
}

// ---- broadcasting ----

Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    if (da != db && da != 1 && db != 1)
      throw DimensionError("shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcast-compatible");
    out[i] = std::max(da, db);
  }
  return out;
}

// Calls f(flat_out, flat_a, flat_b) for every element of the broadcast shape.
template <class F>
void bcast_walk(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  size_t nd = out.size();
  std::vector<int64_t> sa(nd, 0), sb(nd, 0), idx(nd, 0);
  int64_t stride = 1;
  for (size_t i = a.size(); i-- > 0;) {
    size_t o = i + (nd - a.size());
    sa[o] = (a[i] == 1) ? 0 : stride;
    stride *= a[i];
  }
  stride = 1;
  for (size_t i = b.size(); i-- > 0;) {
    size_t o = i + (nd - b.size());
    sb[o] = (b[i] == 1) ? 0 : stride;
    stride *= b[i];
  }
  int64_t total = shape_numel(out);
  int64_t ia = 0, ib = 0;
  for (int64_t o = 0; o < total; ++o) {
    f(o, ia, ib);
    for (size_t d = nd; d-- > 0;) {
      idx[d]++;
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const auto& av = a.values();
  const auto& bv = b.values();

  auto apply = [op](double x, double y) {
    switch (op) {
      case BinOp::Add: return x + y;
      case BinOp::Sub: return x - y;
      case BinOp::Mul: return x * y;
      case BinOp::Div: return x / y;
    }
    return 0.0;
  };

  if (op == BinOp::Div) {
    for (double d : bv) {
      if (std::fabs(d) < kDivEpsilon)
        throw NumericError("division by value smaller than epsilon");
    }
  }

  if (sa == sb) {
    size_t n = av.size();
    std::vector<double> out(n);
    switch (op) {
      case BinOp::Add: for (size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i]; break;
      case BinOp::Sub: for (size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i]; break;
      case BinOp::Mul: for (size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i]; break;
      case BinOp::Div: for (size_t i = 0; i < n; ++i) out[i] = av[i] / bv[i]; break;
    }
    auto pa = a.node();
    auto pb = b.node();
    return make_op(sa, std::move(out), {a, b},
                   [pa, pb, op](TensorNode& self) {
                     const auto& g = self.grad;
                     size_t n = g.size();
                     if (pa->requires_grad) {
                       pa->ensure_grad();
                       double* da = pa->grad.data();
                       switch (op) {
                         case BinOp::Add:
                         case BinOp::Sub:
                           for (size_t i = 0; i < n; ++i) da[i] += g[i];
                           break;
                         case BinOp::Mul:
                           for (size_t i = 0; i < n; ++i) da[i] += g[i] * pb->val[i];
                           break;
                         case BinOp::Div:
                           for (size_t i = 0; i < n; ++i) da[i] += g[i] / pb->val[i];
                           break;
                       }
                     }
                     if (pb->requires_grad) {
                       pb->ensure_grad();
                       double* db = pb->grad.data();
                       switch (op) {
                         case BinOp::Add:
                           for (size_t i = 0; i < n; ++i) db[i] += g[i];
                           break;
                         case BinOp::Sub:
                           for (size_t i = 0; i < n; ++i) db[i] -= g[i];
                           break;
                         case BinOp::Mul:
                           for (size_t i = 0; i < n; ++i) db[i] += g[i] * pa->val[i];
                           break;
                         case BinOp::Div:
                           for (size_t i = 0; i < n; ++i)
                             db[i] -= g[i] * pa->val[i] / (pb->val[i] * pb->val[i]);
                           break;
                       }
                     }
                   },
                   name);
  }

  Shape so = broadcast_shape(sa, sb);
  std::vector<double> out(static_cast<size_t>(shape_numel(so)));
  bcast_walk(so, sa, sb,
             [&](int64_t o, int64_t ia, int64_t ib) { out[o] = apply(av[ia], bv[ib]); });
  auto pa = a.node();
  auto pb = b.node();
  Shape cap_sa = sa, cap_sb = sb, cap_so = so;
  return make_op(so, std::move(out), {a, b},
                 [pa, pb, op, cap_sa, cap_sb, cap_so](TensorNode& self) {
                   const auto& g = self.grad;
                   bool ga = pa->requires_grad, gb = pb->requires_grad;
                   if (ga) pa->ensure_grad();
                   if (gb) pb->ensure_grad();
                   bcast_walk(cap_so, cap_sa, cap_sb, [&](int64_t o, int64_t ia, int64_t ib) {
                     double go = g[o];
                     switch (op) {
                       case BinOp::Add:
                         if (ga) pa->grad[ia] += go;
                         if (gb) pb->grad[ib] += go;
                         break;
                       case BinOp::Sub:
                         if (ga) pa->grad[ia] += go;
                         if (gb) pb->grad[ib] -= go;
                         break;
                       case BinOp::Mul:
                         if (ga) pa->grad[ia] += go * pb->val[ib];
                         if (gb) pb->grad[ib] += go * pa->val[ia];
                         break;
                       case BinOp::Div:
                         if (ga) pa->grad[ia] += go / pb->val[ib];
                         if (gb) pb->grad[ib] -= go * pa->val[ia] / (pb->val[ib] * pb->val[ib]);
                         break;
                     }
                   });
                 },
                 name);
}

template <class FwdFn, class DerivFn>
Tensor unary_op(const Tensor& x, const char* name, FwdFn fwd, DerivFn deriv) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  auto px = x.node();
  return make_op(x.shape(), std::move(out), {x},
                 [px, deriv](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   const auto& g = self.grad;
                   for (size_t i = 0; i < g.size(); ++i)
                     px->grad[i] += g[i] * deriv(px->val[i], self.val[i]);
                 },
                 name);
}

}  // namespace

namespace detail {
Tensor make_custom_op(Shape shape, std::vector<double> val, const std::vector<Tensor>& parents,
                      std::function<void(TensorNode&)> bwd, const char* opname) {
  return make_op(std::move(shape), std::move(val), parents, std::move(bwd), opname);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Div, "div"); }

Tensor add(const Tensor& a, double b) {
  return unary_op(a, "add_scalar", [b](double x) { return x + b; },
                  [](double, double) { return 1.0; });
}

Tensor sub(double a, const Tensor& b) {
  return unary_op(b, "rsub_scalar", [a](double x) { return a - x; },
                  [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, double b) {
  return unary_op(a, "mul_scalar", [b](double x) { return x * b; },
                  [b](double, double) { return b; });
}

Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor exp(const Tensor& x) {
  return unary_op(x, "exp", [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(x, "log", [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(x, "tanh", [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor softplus(const Tensor& x) {
  // log(1+e^x) with overflow-safe branch
  return unary_op(x, "softplus",
                  [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
                  [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(x, "sigmoid",
                  [](double v) {
                    return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                  : std::exp(v) / (1.0 + std::exp(v));
                  },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_op(x, "relu", [](double v) { return v > 0 ? v : 0.0; },
                  [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary_op(x, "leaky_relu", [slope](double v) { return v > 0 ? v : slope * v; },
                  [slope](double v, double) { return v > 0 ? 1.0 : slope; });
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Tensor normal_cdf(const Tensor& x) {
  return unary_op(x, "normal_cdf",
                  [](double v) { return 0.5 * std::erfc(-v * kInvSqrt2); },
                  [](double v, double) { return kInvSqrt2Pi * std::exp(-0.5 * v * v); });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary_op(x, "clamp_min", [lo](double v) { return v < lo ? lo : v; },
                  [lo](double v, double) { return v < lo ? 0.0 : 1.0; });
}

Tensor square(const Tensor& x) {
  return unary_op(x, "square", [](double v) { return v * v; },
                  [](double v, double) { return 2.0 * v; });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
  const auto& xv = x.values();
  double s = 0.0;
  for (double v : xv) s += v;
  auto px = x.node();
  return make_op({1}, {s}, {x},
                 [px](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   double g = self.grad[0];
                   for (auto& d : px->grad) d += g;
                 },
                 "sum");
}

Tensor mean(const Tensor& x) {
  const auto& xv = x.values();
  double s = 0.0;
  for (double v : xv) s += v;
  double inv = xv.empty() ? 0.0 : 1.0 / static_cast<double>(xv.size());
  auto px = x.node();
  return make_op({1}, {s * inv}, {x},
                 [px, inv](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   double g = self.grad[0] * inv;
                   for (auto& d : px->grad) d += g;
                 },
                 "mean");
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    throw DimensionError("reshape from " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                         " changes element count");
  auto px = x.node();
  std::vector<double> v = x.values();
  return make_op(std::move(new_shape), std::move(v), {x},
                 [px](TensorNode& self) {
                   if (!px->requires_grad) return;
                   add_into(*px, self.grad);
                 },
                 "reshape");
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw UsageError("concat_channels on empty list");
  const Shape& s0 = xs[0].shape();
  if (s0.size() != 4) throw DimensionError("concat_channels expects [N,C,H,W] tensors");
  int64_t N = s0[0], H = s0[2], W = s0[3];
  int64_t Ctot = 0;
  for (const auto& x : xs) {
    const Shape& s = x.shape();
    if (s.size() != 4 || s[0] != N || s[2] != H || s[3] != W)
      throw DimensionError("concat_channels operands disagree on N/H/W");
    Ctot += s[1];
  }
  std::vector<double> out(static_cast<size_t>(N * Ctot * H * W));
  int64_t plane = H * W;
  int64_t cofs = 0;
  for (const auto& x : xs) {
    int64_t C = x.dim(1);
    const auto& xv = x.values();
    for (int64_t n = 0; n < N; ++n) {
      std::memcpy(out.data() + (n * Ctot + cofs) * plane, xv.data() + n * C * plane,
                  sizeof(double) * static_cast<size_t>(C * plane));
    }
    cofs += C;
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  std::vector<int64_t> chans;
  for (const auto& x : xs) {
    nodes.push_back(x.node());
    chans.push_back(x.dim(1));
  }
  return make_op({N, Ctot, H, W}, std::move(out), xs,
                 [nodes, chans, N, Ctot, plane](TensorNode& self) {
                   int64_t cofs = 0;
                   for (size_t k = 0; k < nodes.size(); ++k) {
                     auto& p = *nodes[k];
                     int64_t C = chans[k];
                     if (p.requires_grad) {
                       p.ensure_grad();
                       for (int64_t n = 0; n < N; ++n) {
                         const double* g = self.grad.data() + (n * Ctot + cofs) * plane;
                         double* d = p.grad.data() + n * C * plane;
                         for (int64_t i = 0; i < C * plane; ++i) d[i] += g[i];
                       }
                     }
                     cofs += C;
                   }
                 },
                 "concat_channels");
}

Tensor narrow_channels(const Tensor& x, int64_t start, int64_t len) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw DimensionError("narrow_channels expects [N,C,H,W]");
  if (start < 0 || len <= 0 || start + len > s[1])
    throw DimensionError("narrow_channels range out of bounds");
  int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  int64_t plane = H * W;
  std::vector<double> out(static_cast<size_t>(N * len * plane));
  const auto& xv = x.values();
  for (int64_t n = 0; n < N; ++n)
    std::memcpy(out.data() + n * len * plane, xv.data() + (n * C + start) * plane,
                sizeof(double) * static_cast<size_t>(len * plane));
  auto px = x.node();
  return make_op({N, len, H, W}, std::move(out), {x},
                 [px, start, len, N, C, plane](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   for (int64_t n = 0; n < N; ++n) {
                     const double* g = self.grad.data() + n * len * plane;
                     double* d = px->grad.data() + (n * C + start) * plane;
                     for (int64_t i = 0; i < len * plane; ++i) d[i] += g[i];
                   }
                 },
                 "narrow_channels");
}

Tensor narrow_hw(const Tensor& x, int64_t h0, int64_t h, int64_t w0, int64_t w) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw DimensionError("narrow_hw expects [N,C,H,W]");
  int64_t N = s[0], C = s[1], H = s[2], W = s[3];
  if (h0 < 0 || w0 < 0 || h <= 0 || w <= 0 || h0 + h > H || w0 + w > W)
    throw DimensionError("narrow_hw range out of bounds");
  std::vector<double> out(static_cast<size_t>(N * C * h * w));
  const auto& xv = x.values();
  for (int64_t nc = 0; nc < N * C; ++nc)
    for (int64_t i = 0; i < h; ++i)
      std::memcpy(out.data() + (nc * h + i) * w, xv.data() + (nc * H + h0 + i) * W + w0,
                  sizeof(double) * static_cast<size_t>(w));
  auto px = x.node();
  return make_op({N, C, h, w}, std::move(out), {x},
                 [px, h0, w0, h, w, N, C, H, W](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   for (int64_t nc = 0; nc < N * C; ++nc)
                     for (int64_t i = 0; i < h; ++i) {
                       const double* g = self.grad.data() + (nc * h + i) * w;
                       double* d = px->grad.data() + (nc * H + h0 + i) * W + w0;
                       for (int64_t j = 0; j < w; ++j) d[j] += g[j];
                     }
                 },
                 "narrow_hw");
}

Tensor stack_batch(const std::vector<Tensor>& frames) {
  if (frames.empty()) throw UsageError("stack_batch on empty list");
  const Shape& s0 = frames[0].shape();
  if (s0.size() != 3) throw DimensionError("stack_batch expects [C,H,W] tensors");
  for (const auto& f : frames)
    if (f.shape() != s0) throw DimensionError("stack_batch operands disagree on shape");
  int64_t per = shape_numel(s0);
  int64_t B = static_cast<int64_t>(frames.size());
  std::vector<double> out(static_cast<size_t>(B * per));
  for (int64_t b = 0; b < B; ++b)
    std::memcpy(out.data() + b * per, frames[b].values().data(),
                sizeof(double) * static_cast<size_t>(per));
  std::vector<std::shared_ptr<TensorNode>> nodes;
  for (const auto& f : frames) nodes.push_back(f.node());
  return make_op({B, s0[0], s0[1], s0[2]}, std::move(out), frames,
                 [nodes, per](TensorNode& self) {
                   for (size_t b = 0; b < nodes.size(); ++b) {
                     auto& p = *nodes[b];
                     if (!p.requires_grad) continue;
                     p.ensure_grad();
                     const double* g = self.grad.data() + static_cast<int64_t>(b) * per;
                     for (int64_t i = 0; i < per; ++i) p.grad[i] += g[i];
                   }
                 },
                 "stack_batch");
}

Tensor select_batch(const Tensor& x, int64_t n) {
  const Shape& s = x.shape();
  if (s.size() != 4) throw DimensionError("select_batch expects [N,C,H,W]");
  if (n < 0 || n >= s[0]) throw DimensionError("batch index out of range");
  int64_t per = s[1] * s[2] * s[3];
  std::vector<double> out(x.values().begin() + n * per, x.values().begin() + (n + 1) * per);
  auto px = x.node();
  return make_op({s[1], s[2], s[3]}, std::move(out), {x},
                 [px, n, per](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   double* d = px->grad.data() + n * per;
                   for (int64_t i = 0; i < per; ++i) d[i] += self.grad[i];
                 },
                 "select_batch");
}

// ---------------------------------------------------------------------------
// GEMM kernels (row-major, accumulate into C)
// ---------------------------------------------------------------------------

namespace {

constexpr double kParallelGemmFlops = 2.0e6;

// 4x8 register-tiled panel: C[i..i+MR, j0..j0+8) += A * B. The A element for
// tile row r at depth k sits at a[r*rs + k*ks], which covers both the
// row-major (rs=lda, ks=1) and transposed (rs=1, ks=lda) layouts.
template <int MR>
inline void panel8(int64_t K, int64_t N, const double* a, int64_t rs, int64_t ks, const double* B,
                   int64_t j0, double* C, int64_t i, int64_t ldc) {
  double acc[MR][8] = {};
  const double* bp = B + j0;
  const double* ap = a;
  for (int64_t k = 0; k < K; ++k, bp += N, ap += ks) {
    double x[MR];
    for (int r = 0; r < MR; ++r) x[r] = ap[r * rs];
    for (int u = 0; u < 8; ++u) {
      double b = bp[u];
      for (int r = 0; r < MR; ++r) acc[r][u] += x[r] * b;
    }
  }
  for (int r = 0; r < MR; ++r) {
    double* o = C + (i + r) * ldc + j0;
    for (int u = 0; u < 8; ++u) o[u] += acc[r][u];
  }
}

template <int MR>
inline void panel_cols(int64_t K, int64_t N, const double* a, int64_t rs, int64_t ks,
                       const double* B, int64_t j, double* C, int64_t i, int64_t ldc) {
  double acc[MR] = {};
  const double* bp = B + j;
  const double* ap = a;
  for (int64_t k = 0; k < K; ++k, bp += N, ap += ks) {
    double b = *bp;
    for (int r = 0; r < MR; ++r) acc[r] += ap[r * rs] * b;
  }
  for (int r = 0; r < MR; ++r) C[(i + r) * ldc + j] += acc[r];
}

template <int MR>
inline void gemm_rows(int64_t i, int64_t N, int64_t K, const double* a, int64_t rs, int64_t ks,
                      const double* B, double* C, int64_t ldc) {
  int64_t j = 0;
  for (; j + 8 <= N; j += 8) panel8<MR>(K, N, a, rs, ks, B, j, C, i, ldc);
  for (; j < N; ++j) panel_cols<MR>(K, N, a, rs, ks, B, j, C, i, ldc);
}

void gemm_strided(int64_t M, int64_t N, int64_t K, const double* A, int64_t rs, int64_t ks,
                  const double* B, double* C) {
  auto rows = [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; i += 4) {
      const double* a = A + i * rs;
      switch (std::min<int64_t>(4, i1 - i)) {
        case 4: gemm_rows<4>(i, N, K, a, rs, ks, B, C, N); break;
        case 3: gemm_rows<3>(i, N, K, a, rs, ks, B, C, N); break;
        case 2: gemm_rows<2>(i, N, K, a, rs, ks, B, C, N); break;
        case 1: gemm_rows<1>(i, N, K, a, rs, ks, B, C, N); break;
      }
    }
  };
  double flops = 2.0 * static_cast<double>(M) * static_cast<double>(N) * static_cast<double>(K);
  if (flops < kParallelGemmFlops || worker_threads() == 1) {
    rows(0, M);
  } else {
    int64_t blocks = (M + 3) / 4;
    parallel_for(blocks, [&](int64_t b0, int64_t b1) {
      rows(b0 * 4, std::min<int64_t>(M, b1 * 4));
    });
  }
}

// C[M,N] += A[M,K] * B[K,N]
void dgemm_nn(int64_t M, int64_t N, int64_t K, const double* A, const double* B, double* C) {
  gemm_strided(M, N, K, A, K, 1, B, C);
}

// C[M,N] += A^T * B where A is stored [K,M]
void dgemm_tn(int64_t M, int64_t N, int64_t K, const double* A, const double* B, double* C) {
  gemm_strided(M, N, K, A, 1, M, B, C);
}

// dst[N,M] = src[M,N], blocked
void transpose_mat(int64_t M, int64_t N, const double* src, double* dst) {
  constexpr int64_t T = 32;
  for (int64_t i0 = 0; i0 < M; i0 += T)
    for (int64_t j0 = 0; j0 < N; j0 += T) {
      int64_t i1 = std::min(M, i0 + T), j1 = std::min(N, j0 + T);
      for (int64_t i = i0; i < i1; ++i)
        for (int64_t j = j0; j < j1; ++j) dst[j * M + i] = src[i * N + j];
    }
}

void im2col(const double* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t Hout, int64_t Wout, double* cols) {
  int64_t P = Hout * Wout;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        double* row = cols + ((c * kh + ki) * kw + kj) * P;
        for (int64_t oy = 0; oy < Hout; ++oy) {
          int64_t iy = oy * stride - pad + ki;
          double* r = row + oy * Wout;
          if (iy < 0 || iy >= H) {
            std::fill(r, r + Wout, 0.0);
            continue;
          }
          const double* xr = x + (c * H + iy) * W;
          for (int64_t ox = 0; ox < Wout; ++ox) {
            int64_t ix = ox * stride - pad + kj;
            r[ox] = (ix >= 0 && ix < W) ? xr[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_acc(const double* cols, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t Hout, int64_t Wout, double* x) {
  int64_t P = Hout * Wout;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const double* row = cols + ((c * kh + ki) * kw + kj) * P;
        for (int64_t oy = 0; oy < Hout; ++oy) {
          int64_t iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= H) continue;
          double* xr = x + (c * H + iy) * W;
          const double* r = row + oy * Wout;
          for (int64_t ox = 0; ox < Wout; ++ox) {
            int64_t ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < W) xr[ix] += r[ox];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4) throw DimensionError("conv2d input must be [N,C,H,W]");
  if (ws.size() != 4) throw DimensionError("conv2d weight must be [K,C,kh,kw]");
  if (stride < 1) throw DimensionError("conv2d stride must be >= 1");
  int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  int64_t Cout = ws[0], Cw = ws[1], kh = ws[2], kw = ws[3];
  if (kh % 2 == 0 || kw % 2 == 0) throw DimensionError("conv2d kernel extents must be odd");
  if (Cw != C)
    throw DimensionError("conv2d channel mismatch: input " + std::to_string(C) + " vs weight " +
                         std::to_string(Cw));
  if (b.shape() != Shape{Cout}) throw DimensionError("conv2d bias must be [K]");
  int64_t Hout = (H + 2 * padding - kh) / stride + 1;
  int64_t Wout = (W + 2 * padding - kw) / stride + 1;
  if (Hout < 1 || Wout < 1) throw DimensionError("conv2d output would be empty");
  if (H + 2 * padding < kh || W + 2 * padding < kw)
    throw DimensionError("conv2d kernel larger than padded input");

  int64_t Kc = C * kh * kw;
  int64_t P = Hout * Wout;
  std::vector<double> out(static_cast<size_t>(N * Cout * P), 0.0);
  {
    std::vector<double> cols(static_cast<size_t>(Kc * P));
    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    for (int64_t n = 0; n < N; ++n) {
      im2col(xv.data() + n * C * H * W, C, H, W, kh, kw, stride, padding, Hout, Wout, cols.data());
      double* on = out.data() + n * Cout * P;
      dgemm_nn(Cout, P, Kc, wv.data(), cols.data(), on);
      for (int64_t co = 0; co < Cout; ++co) {
        double bias = bv[co];
        double* r = on + co * P;
        for (int64_t p = 0; p < P; ++p) r[p] += bias;
      }
    }
  }

  auto px = x.node();
  auto pw = w.node();
  auto pb = b.node();
  int64_t s = stride, pd = padding;
  return make_op({N, Cout, Hout, Wout}, std::move(out), {x, w, b},
                 [px, pw, pb, N, C, H, W, Cout, kh, kw, s, pd, Hout, Wout](TensorNode& self) {
                   int64_t Kc = C * kh * kw;
                   int64_t P = Hout * Wout;
                   const auto& g = self.grad;
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     for (int64_t n = 0; n < N; ++n)
                       for (int64_t co = 0; co < Cout; ++co) {
                         const double* r = g.data() + (n * Cout + co) * P;
                         double s2 = 0.0;
                         for (int64_t p = 0; p < P; ++p) s2 += r[p];
                         pb->grad[co] += s2;
                       }
                   }
                   bool need_w = pw->requires_grad;
                   bool need_x = px->requires_grad;
                   if (!need_w && !need_x) return;
                   if (need_w) pw->ensure_grad();
                   if (need_x) px->ensure_grad();
                   std::vector<double> cols(static_cast<size_t>(Kc * P));
                   std::vector<double> colsT;
                   if (need_w) colsT.resize(static_cast<size_t>(Kc * P));
                   std::vector<double> dcols;
                   if (need_x) dcols.resize(static_cast<size_t>(Kc * P));
                   for (int64_t n = 0; n < N; ++n) {
                     const double* gn = g.data() + n * Cout * P;
                     if (need_w) {
                       im2col(px->val.data() + n * C * H * W, C, H, W, kh, kw, s, pd, Hout, Wout,
                              cols.data());
                       transpose_mat(Kc, P, cols.data(), colsT.data());
                       // dW[Cout,Kc] += dY[Cout,P] * cols^T[P,Kc]
                       dgemm_nn(Cout, Kc, P, gn, colsT.data(), pw->grad.data());
                     }
                     if (need_x) {
                       std::fill(dcols.begin(), dcols.end(), 0.0);
                       dgemm_tn(Kc, P, Cout, pw->val.data(), gn, dcols.data());
                       col2im_acc(dcols.data(), C, H, W, kh, kw, s, pd, Hout, Wout,
                                  px->grad.data() + n * C * H * W);
                     }
                   }
                 },
                 "conv2d");
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                        int padding, int output_padding) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 4) throw DimensionError("conv2d_transpose input must be [N,C,H,W]");
  if (ws.size() != 4) throw DimensionError("conv2d_transpose weight must be [C,K,kh,kw]");
  if (stride < 1) throw DimensionError("conv2d_transpose stride must be >= 1");
  if (output_padding < 0) output_padding = stride - 1;
  if (output_padding >= stride)
    throw DimensionError("conv2d_transpose output_padding must be < stride");
  int64_t N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  int64_t Cw = ws[0], Cout = ws[1], kh = ws[2], kw = ws[3];
  if (kh % 2 == 0 || kw % 2 == 0) throw DimensionError("conv2d_transpose kernel extents must be odd");
  if (Cw != C) throw DimensionError("conv2d_transpose channel mismatch");
  if (b.shape() != Shape{Cout}) throw DimensionError("conv2d_transpose bias must be [K]");
  int64_t Hout = (H - 1) * stride - 2 * padding + kh + output_padding;
  int64_t Wout = (W - 1) * stride - 2 * padding + kw + output_padding;
  if (Hout < 1 || Wout < 1) throw DimensionError("conv2d_transpose output would be empty");

  int64_t Q = Cout * kh * kw;
  int64_t Pin = H * W;
  std::vector<double> out(static_cast<size_t>(N * Cout * Hout * Wout), 0.0);
  {
    std::vector<double> tmp(static_cast<size_t>(Q * Pin));
    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    for (int64_t n = 0; n < N; ++n) {
      std::fill(tmp.begin(), tmp.end(), 0.0);
      // tmp[Q,Pin] = W^T[Q,C] * x_n[C,Pin]
      dgemm_tn(Q, Pin, C, wv.data(), xv.data() + n * C * Pin, tmp.data());
      double* on = out.data() + n * Cout * Hout * Wout;
      // scatter: out[co, iy*s-p+ki, ix*s-p+kj] += tmp[(co,ki,kj), (iy,ix)]
      col2im_acc(tmp.data(), Cout, Hout, Wout, kh, kw, stride, padding, H, W, on);
      for (int64_t co = 0; co < Cout; ++co) {
        double bias = bv[co];
        double* r = on + co * Hout * Wout;
        for (int64_t p = 0; p < Hout * Wout; ++p) r[p] += bias;
      }
    }
  }

  auto px = x.node();
  auto pw = w.node();
  auto pb = b.node();
  int64_t s = stride, pd = padding;
  return make_op({N, Cout, Hout, Wout}, std::move(out), {x, w, b},
                 [px, pw, pb, N, C, H, W, Cout, kh, kw, s, pd, Hout, Wout](TensorNode& self) {
                   int64_t Q = Cout * kh * kw;
                   int64_t Pin = H * W;
                   const auto& g = self.grad;
                   int64_t Pout = Hout * Wout;
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     for (int64_t n = 0; n < N; ++n)
                       for (int64_t co = 0; co < Cout; ++co) {
                         const double* r = g.data() + (n * Cout + co) * Pout;
                         double s2 = 0.0;
                         for (int64_t p = 0; p < Pout; ++p) s2 += r[p];
                         pb->grad[co] += s2;
                       }
                   }
                   bool need_w = pw->requires_grad;
                   bool need_x = px->requires_grad;
                   if (!need_w && !need_x) return;
                   if (need_w) pw->ensure_grad();
                   if (need_x) px->ensure_grad();
                   std::vector<double> dtmp(static_cast<size_t>(Q * Pin));
                   std::vector<double> dtmpT;
                   if (need_w) dtmpT.resize(static_cast<size_t>(Q * Pin));
                   for (int64_t n = 0; n < N; ++n) {
                     // dtmp = im2col(gout) gathered back to input positions
                     im2col(g.data() + n * Cout * Pout, Cout, Hout, Wout, kh, kw, s, pd, H, W,
                            dtmp.data());
                     if (need_x) {
                       // dx[C,Pin] += W[C,Q] * dtmp[Q,Pin]
                       dgemm_nn(C, Pin, Q, pw->val.data(), dtmp.data(),
                                px->grad.data() + n * C * Pin);
                     }
                     if (need_w) {
                       // dW[C,Q] += x_n[C,Pin] * dtmp^T[Pin,Q]
                       transpose_mat(Q, Pin, dtmp.data(), dtmpT.data());
                       dgemm_nn(C, Q, Pin, px->val.data() + n * C * Pin, dtmpT.data(),
                                pw->grad.data());
                     }
                   }
                 },
                 "conv2d_transpose");
}

// ---------------------------------------------------------------------------
// resampling
// ---------------------------------------------------------------------------

namespace {

// Treats [..,H,W] as rows of planes.
void plane_view(const Shape& s, int64_t& planes, int64_t& H, int64_t& W, const char* op) {
  if (s.size() < 2) throw DimensionError(std::string(op) + " expects at least 2-D input");
  H = s[s.size() - 2];
  W = s[s.size() - 1];
  planes = 1;
  for (size_t i = 0; i + 2 < s.size(); ++i) planes *= s[i];
}

}  // namespace

Tensor avg_pool2x(const Tensor& x) {
  int64_t planes, H, W;
  plane_view(x.shape(), planes, H, W, "avg_pool2x");
  if (H < 2 || W < 2) throw DimensionError("avg_pool2x needs H,W >= 2");
  if (H % 2 != 0 || W % 2 != 0) throw DimensionError("avg_pool2x needs even H,W");
  int64_t Ho = H / 2, Wo = W / 2;
  Shape os = x.shape();
  os[os.size() - 2] = Ho;
  os[os.size() - 1] = Wo;
  std::vector<double> out(static_cast<size_t>(planes * Ho * Wo));
  const auto& xv = x.values();
  for (int64_t p = 0; p < planes; ++p) {
    const double* in = xv.data() + p * H * W;
    double* o = out.data() + p * Ho * Wo;
    for (int64_t i = 0; i < Ho; ++i)
      for (int64_t j = 0; j < Wo; ++j) {
        const double* r0 = in + (2 * i) * W + 2 * j;
        const double* r1 = r0 + W;
        o[i * Wo + j] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  }
  auto px = x.node();
  return make_op(std::move(os), std::move(out), {x},
                 [px, planes, H, W, Ho, Wo](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   for (int64_t p = 0; p < planes; ++p) {
                     const double* g = self.grad.data() + p * Ho * Wo;
                     double* d = px->grad.data() + p * H * W;
                     for (int64_t i = 0; i < Ho; ++i)
                       for (int64_t j = 0; j < Wo; ++j) {
                         double q = 0.25 * g[i * Wo + j];
                         double* r0 = d + (2 * i) * W + 2 * j;
                         double* r1 = r0 + W;
                         r0[0] += q;
                         r0[1] += q;
                         r1[0] += q;
                         r1[1] += q;
                       }
                   }
                 },
                 "avg_pool2x");
}

namespace {

// Exact-doubling bilinear: out[2k] = 0.25 in[k-1] + 0.75 in[k],
// out[2k+1] = 0.75 in[k] + 0.25 in[k+1], edges clamped.
inline void up2_taps(int64_t o, int64_t n, int64_t& i0, int64_t& i1, double& w0, double& w1) {
  int64_t k = o >> 1;
  if ((o & 1) == 0) {
    i0 = k > 0 ? k - 1 : 0;
    i1 = k;
    w0 = 0.25;
    w1 = 0.75;
  } else {
    i0 = k;
    i1 = k + 1 < n ? k + 1 : n - 1;
    w0 = 0.75;
    w1 = 0.25;
  }
}

}  // namespace

Tensor upsample_bilinear2x(const Tensor& x) {
  int64_t planes, H, W;
  plane_view(x.shape(), planes, H, W, "upsample_bilinear2x");
  int64_t Ho = H * 2, Wo = W * 2;
  Shape os = x.shape();
  os[os.size() - 2] = Ho;
  os[os.size() - 1] = Wo;
  std::vector<double> out(static_cast<size_t>(planes * Ho * Wo));
  const auto& xv = x.values();
  for (int64_t p = 0; p < planes; ++p) {
    const double* in = xv.data() + p * H * W;
    double* o = out.data() + p * Ho * Wo;
    for (int64_t oy = 0; oy < Ho; ++oy) {
      int64_t y0, y1;
      double wy0, wy1;
      up2_taps(oy, H, y0, y1, wy0, wy1);
      const double* r0 = in + y0 * W;
      const double* r1 = in + y1 * W;
      double* orow = o + oy * Wo;
      for (int64_t ox = 0; ox < Wo; ++ox) {
        int64_t x0, x1;
        double wx0, wx1;
        up2_taps(ox, W, x0, x1, wx0, wx1);
        orow[ox] = wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
      }
    }
  }
  auto px = x.node();
  return make_op(std::move(os), std::move(out), {x},
                 [px, planes, H, W, Ho, Wo](TensorNode& self) {
                   if (!px->requires_grad) return;
                   px->ensure_grad();
                   for (int64_t p = 0; p < planes; ++p) {
                     const double* g = self.grad.data() + p * Ho * Wo;
                     double* d = px->grad.data() + p * H * W;
                     for (int64_t oy = 0; oy < Ho; ++oy) {
                       int64_t y0, y1;
                       double wy0, wy1;
                       up2_taps(oy, H, y0, y1, wy0, wy1);
                       for (int64_t ox = 0; ox < Wo; ++ox) {
                         int64_t x0, x1;
                         double wx0, wx1;
                         up2_taps(ox, W, x0, x1, wx0, wx1);
                         double go = g[oy * Wo + ox];
                         d[y0 * W + x0] += wy0 * wx0 * go;
                         d[y0 * W + x1] += wy0 * wx1 * go;
                         d[y1 * W + x0] += wy1 * wx0 * go;
                         d[y1 * W + x1] += wy1 * wx1 * go;
                       }
                     }
                   }
                 },
                 "upsample_bilinear2x");
}

// ---------------------------------------------------------------------------
// quantization proxies
// ---------------------------------------------------------------------------

Tensor add_uniform_noise(const Tensor& x, RandomSource& rng) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + (rng.uniform() - 0.5);
  auto px = x.node();
  return make_op(x.shape(), std::move(out), {x},
                 [px](TensorNode& self) {
                   if (!px->requires_grad) return;
                   add_into(*px, self.grad);
                 },
                 "add_uniform_noise");
}

Tensor round_half_away(const Tensor& x) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = std::round(xv[i]);
  detail::check_all_finite(out, "round_half_away");
  return Tensor::from_data(x.shape(), std::move(out));
}

}  // namespace stavc
