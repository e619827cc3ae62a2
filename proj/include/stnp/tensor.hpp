#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "stnp/common.hpp"

namespace stnp {

class Tape;

struct TensorData {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  // Tape linkage; node ids are only meaningful while tape_id matches the
  // tape that assigned them.
  std::uint64_t tape_id = 0;
  long node = -1;
};

// Dense row-major 64-bit tensor with value semantics over a shared payload.
// Ops record onto the thread-local active Tape when any input requires
// gradients; without an active tape they are plain eager math.
class Tensor {
 public:
  Tensor() : data_(std::make_shared<TensorData>()) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from(Shape shape, std::vector<double> values);
  // Leaf with requires_grad set; the unit every ParamStore entry is made of.
  static Tensor param(Shape shape, std::vector<double> values);
  static Tensor eye(long n);

  const Shape& shape() const { return data_->shape; }
  long ndim() const { return static_cast<long>(data_->shape.size()); }
  long size() const { return numel(data_->shape); }
  long dim(long i) const { return data_->shape[static_cast<size_t>(i)]; }

  const std::vector<double>& values() const { return data_->values; }
  std::vector<double>& values() { return data_->values; }

  double value() const;               // scalar accessor
  double at(long i) const { return data_->values[static_cast<size_t>(i)]; }
  double at(long i, long j) const {
    return data_->values[static_cast<size_t>(i * dim(1) + j)];
  }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool v) { data_->requires_grad = v; }

  bool defined() const { return !data_->shape.empty() || !data_->values.empty(); }

  std::shared_ptr<TensorData>& payload() { return data_; }
  const std::shared_ptr<TensorData>& payload() const { return data_; }

 private:
  std::shared_ptr<TensorData> data_;
};

// Reverse-mode tape. Records one node per primitive op in execution order
// (which is a topological order); backward() sweeps it once in reverse.
class Tape {
 public:
  using BackwardFn =
      std::function<void(const std::vector<double>& gout,
                         const std::vector<std::vector<double>*>& pgrads)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // RAII activation; ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  // Registers `out` as the result of an op over `parents`. Parents that
  // require gradients are given leaf nodes on first sight.
  void record(Tensor& out, const std::vector<Tensor>& parents, BackwardFn fn);

  // Reverse sweep from a scalar loss. A loss that never touched this tape is
  // a constant: the sweep is a no-op and all gradients stay zero.
  void backward(const Tensor& loss);

  // Gradient of the loss w.r.t. `t` (zeros if it never received one).
  std::vector<double> grad(const Tensor& t) const;
  bool on_tape(const Tensor& t) const;

  std::uint64_t id() const { return id_; }
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<long> parents;
    BackwardFn backward;
    long size = 0;
  };

  long ensure_node(const Tensor& t);

  std::uint64_t id_;
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// ---- pointwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
inline Tensor operator/(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }

// ---- reductions (axis = -1 reduces everything to a scalar) ----
Tensor sum(const Tensor& a, long axis = -1);
Tensor mean(const Tensor& a, long axis = -1);
Tensor max(const Tensor& a, long axis = -1);
Tensor log_sum_exp(const Tensor& a, long axis = -1);

// ---- linear algebra / structure ----
// x: [F_in] or [B, F_in]; weight: [F_in, F_out]; bias: [F_out] or empty.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, long axis);
Tensor select(const Tensor& a, long index);  // scalar a[index] from a vector

// input: [C_in, L]; kernels: [C_out, C_in, K] (K odd); bias: [C_out] or
// empty; zero padding. Cross-correlation, the CNN convention.
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              long padding);

// Solves A x = b for symmetric positive definite A via Cholesky.
// A: [n, n]; b: [n] or [n, m]. Throws NumericalError when the
// factorization fails (callers own jitter escalation).
Tensor cholesky_solve(const Tensor& A, const Tensor& b);

// ---- optimizer ----
struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// Per-parameter moments keyed by name; t advances once per adam_step call.
struct AdamState {
  AdamConfig config;
  std::unordered_map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      moments;
  long t = 0;
};

// Bias-corrected Adam with decoupled weight decay:
// theta -= lr * (mhat / (sqrt(vhat) + eps) + wd * theta).
void adam_update(std::vector<double>& theta, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, long t,
                 const AdamConfig& config);

// Updates every parameter present in `grads` that requires gradients;
// frozen tensors are left untouched (no decay applied).
void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, std::vector<double>>& grads,
               AdamState& state);

}  // namespace stnp
