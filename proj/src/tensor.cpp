#include "stnp/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

namespace stnp {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajorMatrix>;
using MutMap = Eigen::Map<RowMajorMatrix>;

thread_local Tape* g_active_tape = nullptr;

std::atomic<std::uint64_t> g_tape_counter{1};

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  Shape out;
  size_t ra = a.size(), rb = b.size();
  size_t r = std::max(ra, rb);
  out.resize(r);
  for (size_t i = 0; i < r; ++i) {
    long da = i < r - ra ? 1 : a[i - (r - ra)];
    long db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " are not broadcast-compatible at dim " +
                       std::to_string(i));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Linear-index map from output positions into a (possibly broadcast) input.
std::shared_ptr<std::vector<long>> index_map(const Shape& in, const Shape& out) {
  long n = numel(out);
  auto map = std::make_shared<std::vector<long>>(static_cast<size_t>(n));
  size_t r = out.size(), ri = in.size();
  std::vector<long> in_strides(r, 0);
  long stride = 1;
  for (size_t i = ri; i-- > 0;) {
    size_t oi = i + (r - ri);
    in_strides[oi] = (in[i] == 1) ? 0 : stride;
    stride *= in[i];
  }
  std::vector<long> idx(r, 0);
  for (long lin = 0; lin < n; ++lin) {
    long pos = 0;
    for (size_t i = 0; i < r; ++i) pos += idx[i] * in_strides[i];
    (*map)[static_cast<size_t>(lin)] = pos;
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < out[i]) break;
      idx[i] = 0;
    }
  }
  return map;
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void maybe_record(Tensor& out, const std::vector<Tensor>& parents,
                  Tape::BackwardFn fn) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  out.set_requires_grad(rg);
  Tape* tape = Tape::active();
  if (tape && rg) tape->record(out, parents, std::move(fn));
}

using ScalarFn = double (*)(double, double);

Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, ScalarFn f,
                 ScalarFn dfa, ScalarFn dfb) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  Tensor out = Tensor::zeros(out_shape);
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  const long n = out.size();

  if (same_shape(a.shape(), out_shape) && same_shape(b.shape(), out_shape)) {
    for (long i = 0; i < n; ++i) ov[i] = f(av[i], bv[i]);
    auto pa = a.payload();
    auto pb = b.payload();
    maybe_record(out, {a, b},
                 [pa, pb, dfa, dfb, n](const std::vector<double>& g,
                                       const std::vector<std::vector<double>*>& pg) {
                   for (long i = 0; i < n; ++i) {
                     double x = pa->values[i], y = pb->values[i];
                     if (pg[0]) (*pg[0])[i] += dfa(x, y) * g[i];
                     if (pg[1]) (*pg[1])[i] += dfb(x, y) * g[i];
                   }
                 });
    return out;
  }

  auto ma = index_map(a.shape(), out_shape);
  auto mb = index_map(b.shape(), out_shape);
  for (long i = 0; i < n; ++i) ov[i] = f(av[(*ma)[i]], bv[(*mb)[i]]);
  auto pa = a.payload();
  auto pb = b.payload();
  maybe_record(out, {a, b},
               [pa, pb, ma, mb, dfa, dfb, n](
                   const std::vector<double>& g,
                   const std::vector<std::vector<double>*>& pg) {
                 for (long i = 0; i < n; ++i) {
                   double x = pa->values[(*ma)[i]], y = pb->values[(*mb)[i]];
                   if (pg[0]) (*pg[0])[(*ma)[i]] += dfa(x, y) * g[i];
                   if (pg[1]) (*pg[1])[(*mb)[i]] += dfb(x, y) * g[i];
                 }
               });
  return out;
}

using UnaryFn = double (*)(double);
using UnaryGradFn = double (*)(double, double);  // (x, y=f(x)) -> df/dx

Tensor unary_op(const Tensor& a, UnaryFn f, UnaryGradFn df) {
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  const long n = a.size();
  for (long i = 0; i < n; ++i) ov[i] = f(av[i]);
  auto pa = a.payload();
  auto po = out.payload();
  maybe_record(out, {a},
               [pa, po, df, n](const std::vector<double>& g,
                               const std::vector<std::vector<double>*>& pg) {
                 if (!pg[0]) return;
                 for (long i = 0; i < n; ++i)
                   (*pg[0])[i] += df(pa->values[i], po->values[i]) * g[i];
               });
  return out;
}

struct AxisSplit {
  long outer, reduce, inner;
};

AxisSplit split_axis(const Shape& shape, long axis, const char* op) {
  if (shape.empty())
    throw ShapeError(std::string(op) + ": cannot reduce a scalar");
  long r = static_cast<long>(shape.size());
  if (axis < 0 || axis >= r)
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  AxisSplit s{1, shape[static_cast<size_t>(axis)], 1};
  for (long i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
  for (long i = axis + 1; i < r; ++i) s.inner *= shape[static_cast<size_t>(i)];
  if (s.reduce == 0)
    throw ShapeError(std::string(op) + ": empty reduction axis");
  return s;
}

Shape drop_axis(const Shape& shape, long axis) {
  Shape out;
  for (long i = 0; i < static_cast<long>(shape.size()); ++i)
    if (i != axis) out.push_back(shape[static_cast<size_t>(i)]);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape) {
  Tensor t;
  long n = numel(shape);
  if (n < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
  t.data_->shape = std::move(shape);
  t.data_->values.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.data_->shape = {};
  t.data_->values = {value};
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (numel(shape) != static_cast<long>(values.size()))
    throw ShapeError("from: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(shape));
  Tensor t;
  t.data_->shape = std::move(shape);
  t.data_->values = std::move(values);
  return t;
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

Tensor Tensor::eye(long n) {
  Tensor t = zeros({n, n});
  for (long i = 0; i < n; ++i) t.values()[static_cast<size_t>(i * n + i)] = 1.0;
  return t;
}

double Tensor::value() const {
  if (size() != 1)
    throw ShapeError("value(): tensor of shape " + shape_str(shape()) +
                     " is not a scalar");
  return data_->values[0];
}

// ------------------------------------------------------------------ Tape

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

long Tape::ensure_node(const Tensor& t) {
  auto& d = *t.payload();
  if (d.tape_id == id_ && d.node >= 0) return d.node;
  if (!d.requires_grad) return -1;
  // leaf: placeholder node with no backward
  long id = static_cast<long>(nodes_.size());
  nodes_.push_back(Node{{}, nullptr, numel(d.shape)});
  const_cast<TensorData&>(d).tape_id = id_;
  const_cast<TensorData&>(d).node = id;
  return id;
}

void Tape::record(Tensor& out, const std::vector<Tensor>& parents,
                  BackwardFn fn) {
  std::vector<long> parent_ids;
  parent_ids.reserve(parents.size());
  for (const auto& p : parents) parent_ids.push_back(ensure_node(p));
  long id = static_cast<long>(nodes_.size());
  nodes_.push_back(Node{std::move(parent_ids), std::move(fn), out.size()});
  out.payload()->tape_id = id_;
  out.payload()->node = id;
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(loss.shape()));
  grads_.assign(nodes_.size(), {});
  if (!on_tape(loss)) return;  // constant loss: all gradients are zero
  grads_[static_cast<size_t>(loss.payload()->node)] = {1.0};
  for (size_t i = nodes_.size(); i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || grads_[i].empty()) continue;
    std::vector<std::vector<double>*> pgrads;
    pgrads.reserve(node.parents.size());
    for (long p : node.parents) {
      if (p < 0) {
        pgrads.push_back(nullptr);
        continue;
      }
      auto& buf = grads_[static_cast<size_t>(p)];
      if (buf.empty())
        buf.assign(static_cast<size_t>(nodes_[static_cast<size_t>(p)].size), 0.0);
      pgrads.push_back(&buf);
    }
    node.backward(grads_[i], pgrads);
  }
}

bool Tape::on_tape(const Tensor& t) const {
  return t.payload()->tape_id == id_ && t.payload()->node >= 0;
}

std::vector<double> Tape::grad(const Tensor& t) const {
  if (on_tape(t)) {
    const auto& buf = grads_[static_cast<size_t>(t.payload()->node)];
    if (!buf.empty()) return buf;
  }
  return std::vector<double>(static_cast<size_t>(t.size()), 0.0);
}

// ------------------------------------------------------------- pointwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.values())
    if (y == 0.0) throw DomainError("div: division by zero");
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values())
    if (x <= 0.0) throw DomainError("log: non-positive argument");
  return unary_op(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor cos(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.values())
    if (x < 0.0) throw DomainError("sqrt: negative argument");
  return unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        if (x > 30.0) return x;
        if (x < -30.0) return std::exp(x);
        return std::log1p(std::exp(x));
      },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

// ------------------------------------------------------------ reductions

namespace {

enum class ReduceKind { Sum, Mean, Max, LogSumExp };

Tensor reduce_all(const Tensor& a, ReduceKind kind, const char* name) {
  const long n = a.size();
  if (n == 0) throw ShapeError(std::string(name) + ": empty tensor");
  const auto& av = a.values();
  double result = 0.0;
  long arg = 0;
  switch (kind) {
    case ReduceKind::Sum:
    case ReduceKind::Mean: {
      for (long i = 0; i < n; ++i) result += av[i];
      if (kind == ReduceKind::Mean) result /= static_cast<double>(n);
      break;
    }
    case ReduceKind::Max: {
      result = av[0];
      for (long i = 1; i < n; ++i)
        if (av[i] > result) {
          result = av[i];
          arg = i;
        }
      break;
    }
    case ReduceKind::LogSumExp: {
      double m = av[0];
      for (long i = 1; i < n; ++i) m = std::max(m, av[i]);
      double s = 0.0;
      for (long i = 0; i < n; ++i) s += std::exp(av[i] - m);
      result = m + std::log(s);
      break;
    }
  }
  Tensor out = Tensor::scalar(result);
  auto pa = a.payload();
  auto po = out.payload();
  maybe_record(out, {a},
               [pa, po, kind, n, arg](const std::vector<double>& g,
                                      const std::vector<std::vector<double>*>& pg) {
                 if (!pg[0]) return;
                 double go = g[0];
                 switch (kind) {
                   case ReduceKind::Sum:
                     for (long i = 0; i < n; ++i) (*pg[0])[i] += go;
                     break;
                   case ReduceKind::Mean:
                     for (long i = 0; i < n; ++i)
                       (*pg[0])[i] += go / static_cast<double>(n);
                     break;
                   case ReduceKind::Max:
                     (*pg[0])[arg] += go;
                     break;
                   case ReduceKind::LogSumExp: {
                     double y = po->values[0];
                     for (long i = 0; i < n; ++i)
                       (*pg[0])[i] += go * std::exp(pa->values[i] - y);
                     break;
                   }
                 }
               });
  return out;
}

Tensor reduce_axis(const Tensor& a, long axis, ReduceKind kind,
                   const char* name) {
  if (axis < 0) return reduce_all(a, kind, name);
  AxisSplit s = split_axis(a.shape(), axis, name);
  Shape out_shape = drop_axis(a.shape(), axis);
  Tensor out = Tensor::zeros(out_shape);
  const auto& av = a.values();
  auto& ov = out.values();
  auto args = std::make_shared<std::vector<long>>();
  if (kind == ReduceKind::Max)
    args->assign(static_cast<size_t>(s.outer * s.inner), 0);

  for (long o = 0; o < s.outer; ++o) {
    for (long in = 0; in < s.inner; ++in) {
      const long base = o * s.reduce * s.inner + in;
      double acc;
      switch (kind) {
        case ReduceKind::Sum:
        case ReduceKind::Mean: {
          acc = 0.0;
          for (long r = 0; r < s.reduce; ++r) acc += av[base + r * s.inner];
          if (kind == ReduceKind::Mean) acc /= static_cast<double>(s.reduce);
          break;
        }
        case ReduceKind::Max: {
          acc = av[base];
          long am = 0;
          for (long r = 1; r < s.reduce; ++r)
            if (av[base + r * s.inner] > acc) {
              acc = av[base + r * s.inner];
              am = r;
            }
          (*args)[static_cast<size_t>(o * s.inner + in)] = am;
          break;
        }
        case ReduceKind::LogSumExp: {
          double m = av[base];
          for (long r = 1; r < s.reduce; ++r)
            m = std::max(m, av[base + r * s.inner]);
          double sum = 0.0;
          for (long r = 0; r < s.reduce; ++r)
            sum += std::exp(av[base + r * s.inner] - m);
          acc = m + std::log(sum);
          break;
        }
      }
      ov[static_cast<size_t>(o * s.inner + in)] = acc;
    }
  }
  auto pa = a.payload();
  auto po = out.payload();
  maybe_record(
      out, {a},
      [pa, po, s, kind, args](const std::vector<double>& g,
                              const std::vector<std::vector<double>*>& pg) {
        if (!pg[0]) return;
        for (long o = 0; o < s.outer; ++o) {
          for (long in = 0; in < s.inner; ++in) {
            const long base = o * s.reduce * s.inner + in;
            const long oi = o * s.inner + in;
            const double go = g[static_cast<size_t>(oi)];
            switch (kind) {
              case ReduceKind::Sum:
                for (long r = 0; r < s.reduce; ++r)
                  (*pg[0])[base + r * s.inner] += go;
                break;
              case ReduceKind::Mean:
                for (long r = 0; r < s.reduce; ++r)
                  (*pg[0])[base + r * s.inner] +=
                      go / static_cast<double>(s.reduce);
                break;
              case ReduceKind::Max:
                (*pg[0])[base + (*args)[static_cast<size_t>(oi)] * s.inner] += go;
                break;
              case ReduceKind::LogSumExp: {
                const double y = po->values[static_cast<size_t>(oi)];
                for (long r = 0; r < s.reduce; ++r)
                  (*pg[0])[base + r * s.inner] +=
                      go * std::exp(pa->values[base + r * s.inner] - y);
                break;
              }
            }
          }
        }
      });
  return out;
}

}  // namespace

Tensor sum(const Tensor& a, long axis) {
  return reduce_axis(a, axis, ReduceKind::Sum, "sum");
}
Tensor mean(const Tensor& a, long axis) {
  return reduce_axis(a, axis, ReduceKind::Mean, "mean");
}
Tensor max(const Tensor& a, long axis) {
  return reduce_axis(a, axis, ReduceKind::Max, "max");
}
Tensor log_sum_exp(const Tensor& a, long axis) {
  return reduce_axis(a, axis, ReduceKind::LogSumExp, "log_sum_exp");
}

// --------------------------------------------------- structure / linalg

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  Tensor out = Tensor::from(std::move(shape), a.values());
  const long n = a.size();
  maybe_record(out, {a},
               [n](const std::vector<double>& g,
                   const std::vector<std::vector<double>*>& pg) {
                 if (!pg[0]) return;
                 for (long i = 0; i < n; ++i) (*pg[0])[i] += g[i];
               });
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("transpose: expected rank-2 tensor");
  const long r = a.dim(0), c = a.dim(1);
  Tensor out = Tensor::zeros({c, r});
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j)
      out.values()[static_cast<size_t>(j * r + i)] = a.at(i, j);
  maybe_record(out, {a},
               [r, c](const std::vector<double>& g,
                      const std::vector<std::vector<double>*>& pg) {
                 if (!pg[0]) return;
                 for (long i = 0; i < r; ++i)
                   for (long j = 0; j < c; ++j)
                     (*pg[0])[i * c + j] += g[static_cast<size_t>(j * r + i)];
               });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw ShapeError("matmul: expected rank-2 tensors, got " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const long n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out = Tensor::zeros({n, m});
  ConstMap A(a.values().data(), n, k);
  ConstMap B(b.values().data(), k, m);
  MutMap(out.values().data(), n, m) = A * B;
  auto pa = a.payload();
  auto pb = b.payload();
  maybe_record(out, {a, b},
               [pa, pb, n, k, m](const std::vector<double>& g,
                                 const std::vector<std::vector<double>*>& pg) {
                 ConstMap G(g.data(), n, m);
                 if (pg[0]) {
                   ConstMap B(pb->values.data(), k, m);
                   MutMap(pg[0]->data(), n, k).noalias() += G * B.transpose();
                 }
                 if (pg[1]) {
                   ConstMap A(pa->values.data(), n, k);
                   MutMap(pg[1]->data(), k, m).noalias() += A.transpose() * G;
                 }
               });
  return out;
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.ndim() != 2)
    throw ShapeError("affine: weight must be rank-2, got " +
                     shape_str(weight.shape()));
  const long fin = weight.dim(0), fout = weight.dim(1);
  const bool vector_input = x.ndim() == 1;
  if (x.ndim() != 1 && x.ndim() != 2)
    throw ShapeError("affine: input must be rank-1 or rank-2, got " +
                     shape_str(x.shape()));
  const long batch = vector_input ? 1 : x.dim(0);
  const long xin = vector_input ? x.dim(0) : x.dim(1);
  if (xin != fin)
    throw ShapeError("affine: input feature dim " + std::to_string(xin) +
                     " does not match weight rows " + std::to_string(fin));
  const bool has_bias = bias.defined() && bias.size() > 0;
  if (has_bias && (bias.ndim() != 1 || bias.dim(0) != fout))
    throw ShapeError("affine: bias shape " + shape_str(bias.shape()) +
                     " does not match weight cols " + std::to_string(fout));

  Tensor out = Tensor::zeros(vector_input ? Shape{fout} : Shape{batch, fout});
  ConstMap X(x.values().data(), batch, fin);
  ConstMap W(weight.values().data(), fin, fout);
  MutMap O(out.values().data(), batch, fout);
  O.noalias() = X * W;
  if (has_bias) {
    Eigen::Map<const Eigen::RowVectorXd> b(bias.values().data(), fout);
    O.rowwise() += b;
  }
  auto px = x.payload();
  auto pw = weight.payload();
  std::vector<Tensor> parents = {x, weight};
  if (has_bias) parents.push_back(bias);
  maybe_record(out, parents,
               [px, pw, batch, fin, fout, has_bias](
                   const std::vector<double>& g,
                   const std::vector<std::vector<double>*>& pg) {
                 ConstMap G(g.data(), batch, fout);
                 if (pg[0]) {
                   ConstMap W(pw->values.data(), fin, fout);
                   MutMap(pg[0]->data(), batch, fin).noalias() +=
                       G * W.transpose();
                 }
                 if (pg[1]) {
                   ConstMap X(px->values.data(), batch, fin);
                   MutMap(pg[1]->data(), fin, fout).noalias() +=
                       X.transpose() * G;
                 }
                 if (has_bias && pg[2]) {
                   Eigen::Map<Eigen::RowVectorXd> gb(pg[2]->data(), fout);
                   gb += G.colwise().sum();
                 }
               });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, long axis) {
  if (parts.empty()) throw ShapeError("concat: no tensors given");
  const Shape& first = parts[0].shape();
  const long rank = static_cast<long>(first.size());
  if (axis < 0 || axis >= rank)
    throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  long axis_total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != rank)
      throw ShapeError("concat: rank mismatch between parts");
    for (long d = 0; d < rank; ++d)
      if (d != axis && p.dim(d) != first[static_cast<size_t>(d)])
        throw ShapeError("concat: non-axis dim " + std::to_string(d) +
                         " mismatch");
    axis_total += p.dim(axis);
  }
  out_shape[static_cast<size_t>(axis)] = axis_total;
  Tensor out = Tensor::zeros(out_shape);

  long outer = 1, inner = 1;
  for (long d = 0; d < axis; ++d) outer *= first[static_cast<size_t>(d)];
  for (long d = axis + 1; d < rank; ++d) inner *= first[static_cast<size_t>(d)];

  std::vector<long> axis_dims, offsets;
  long off = 0;
  for (const auto& p : parts) {
    axis_dims.push_back(p.dim(axis));
    offsets.push_back(off);
    off += p.dim(axis);
  }
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& pv = parts[pi].values();
    const long ad = axis_dims[pi];
    for (long o = 0; o < outer; ++o) {
      const double* src = pv.data() + o * ad * inner;
      double* dst =
          out.values().data() + (o * axis_total + offsets[pi]) * inner;
      std::copy(src, src + ad * inner, dst);
    }
  }
  maybe_record(out, parts,
               [outer, inner, axis_total, axis_dims, offsets](
                   const std::vector<double>& g,
                   const std::vector<std::vector<double>*>& pg) {
                 for (size_t pi = 0; pi < axis_dims.size(); ++pi) {
                   if (!pg[pi]) continue;
                   const long ad = axis_dims[pi];
                   for (long o = 0; o < outer; ++o) {
                     const double* src =
                         g.data() + (o * axis_total + offsets[pi]) * inner;
                     double* dst = pg[pi]->data() + o * ad * inner;
                     for (long i = 0; i < ad * inner; ++i) dst[i] += src[i];
                   }
                 }
               });
  return out;
}

Tensor select(const Tensor& a, long index) {
  if (a.ndim() != 1)
    throw ShapeError("select: expected rank-1 tensor, got " +
                     shape_str(a.shape()));
  if (index < 0 || index >= a.dim(0))
    throw ShapeError("select: index " + std::to_string(index) +
                     " out of range [0," + std::to_string(a.dim(0)) + ")");
  Tensor out = Tensor::scalar(a.at(index));
  maybe_record(out, {a},
               [index](const std::vector<double>& g,
                       const std::vector<std::vector<double>*>& pg) {
                 if (pg[0]) (*pg[0])[static_cast<size_t>(index)] += g[0];
               });
  return out;
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              long padding) {
  if (input.ndim() != 2)
    throw ShapeError("conv1d: input must be [C_in, L], got " +
                     shape_str(input.shape()));
  if (kernels.ndim() != 3)
    throw ShapeError("conv1d: kernels must be [C_out, C_in, K], got " +
                     shape_str(kernels.shape()));
  const long cin = input.dim(0), len = input.dim(1);
  const long cout = kernels.dim(0), kcin = kernels.dim(1), k = kernels.dim(2);
  if (kcin != cin)
    throw ShapeError("conv1d: kernel C_in " + std::to_string(kcin) +
                     " does not match input C_in " + std::to_string(cin));
  if (k % 2 == 0) throw ShapeError("conv1d: kernel width must be odd");
  if (padding < 0) throw ShapeError("conv1d: negative padding");
  const long lout = len + 2 * padding - k + 1;
  if (lout < 1)
    throw ShapeError("conv1d: output length " + std::to_string(lout) +
                     " < 1 for L=" + std::to_string(len) +
                     " K=" + std::to_string(k) +
                     " pad=" + std::to_string(padding));
  const bool has_bias = bias.defined() && bias.size() > 0;
  if (has_bias && (bias.ndim() != 1 || bias.dim(0) != cout))
    throw ShapeError("conv1d: bias shape " + shape_str(bias.shape()) +
                     " does not match C_out " + std::to_string(cout));

  Tensor out = Tensor::zeros({cout, lout});
  const double* x = input.values().data();
  const double* w = kernels.values().data();
  double* y = out.values().data();
  for (long oc = 0; oc < cout; ++oc) {
    double* yrow = y + oc * lout;
    if (has_bias) {
      const double b = bias.values()[static_cast<size_t>(oc)];
      for (long p = 0; p < lout; ++p) yrow[p] = b;
    }
    for (long ic = 0; ic < cin; ++ic) {
      const double* xrow = x + ic * len;
      const double* wrow = w + (oc * cin + ic) * k;
      for (long t = 0; t < k; ++t) {
        const double wv = wrow[t];
        if (wv == 0.0) continue;
        const long p0 = std::max<long>(0, padding - t);
        const long p1 = std::min<long>(lout - 1, len - 1 - t + padding);
        const double* xs = xrow + p0 + t - padding;
        for (long p = p0; p <= p1; ++p) yrow[p] += wv * xs[p - p0];
      }
    }
  }

  auto px = input.payload();
  auto pw = kernels.payload();
  std::vector<Tensor> parents = {input, kernels};
  if (has_bias) parents.push_back(bias);
  maybe_record(
      out, parents,
      [px, pw, cin, len, cout, k, padding, lout, has_bias](
          const std::vector<double>& g,
          const std::vector<std::vector<double>*>& pg) {
        const double* x = px->values.data();
        const double* w = pw->values.data();
        for (long oc = 0; oc < cout; ++oc) {
          const double* grow = g.data() + oc * lout;
          for (long ic = 0; ic < cin; ++ic) {
            const double* xrow = x + ic * len;
            const double* wrow = w + (oc * cin + ic) * k;
            for (long t = 0; t < k; ++t) {
              const long p0 = std::max<long>(0, padding - t);
              const long p1 = std::min<long>(lout - 1, len - 1 - t + padding);
              if (p1 < p0) continue;
              if (pg[0]) {
                double* gx = pg[0]->data() + ic * len + p0 + t - padding;
                const double wv = wrow[t];
                for (long p = p0; p <= p1; ++p) gx[p - p0] += wv * grow[p];
              }
              if (pg[1]) {
                const double* xs = xrow + p0 + t - padding;
                double acc = 0.0;
                for (long p = p0; p <= p1; ++p) acc += xs[p - p0] * grow[p];
                (*pg[1])[(oc * cin + ic) * k + t] += acc;
              }
            }
          }
          if (has_bias && pg[2]) {
            double acc = 0.0;
            for (long p = 0; p < lout; ++p) acc += grow[p];
            (*pg[2])[static_cast<size_t>(oc)] += acc;
          }
        }
      });
  return out;
}

Tensor cholesky_solve(const Tensor& A, const Tensor& b) {
  if (A.ndim() != 2 || A.dim(0) != A.dim(1))
    throw ShapeError("cholesky_solve: A must be square, got " +
                     shape_str(A.shape()));
  const long n = A.dim(0);
  const bool vec = b.ndim() == 1;
  if (!vec && b.ndim() != 2)
    throw ShapeError("cholesky_solve: b must be rank-1 or rank-2");
  const long m = vec ? 1 : b.dim(1);
  if (b.dim(0) != n)
    throw ShapeError("cholesky_solve: b rows " + std::to_string(b.dim(0)) +
                     " do not match A size " + std::to_string(n));

  ConstMap Am(A.values().data(), n, n);
  auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(Am);
  if (llt->info() != Eigen::Success)
    throw NumericalError("cholesky_solve: factorization failed (matrix not "
                         "positive definite)");
  ConstMap B(b.values().data(), n, m);
  Tensor out = Tensor::zeros(b.shape());
  MutMap X(out.values().data(), n, m);
  X = llt->solve(B);

  auto po = out.payload();
  maybe_record(out, {A, b},
               [llt, po, n, m](const std::vector<double>& g,
                               const std::vector<std::vector<double>*>& pg) {
                 ConstMap G(g.data(), n, m);
                 Eigen::MatrixXd gb = llt->solve(G);
                 if (pg[1]) MutMap(pg[1]->data(), n, m) += gb;
                 if (pg[0]) {
                   ConstMap X(po->values.data(), n, m);
                   MutMap(pg[0]->data(), n, n).noalias() -= gb * X.transpose();
                 }
               });
  return out;
}

// -------------------------------------------------------------- optimizer

void adam_update(std::vector<double>& theta, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, long t,
                 const AdamConfig& config) {
  if (theta.size() != grad.size())
    throw ShapeError("adam_update: parameter/gradient size mismatch");
  if (m.size() != theta.size()) m.assign(theta.size(), 0.0);
  if (v.size() != theta.size()) v.assign(theta.size(), 0.0);
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (size_t i = 0; i < theta.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= config.lr * (mhat / (std::sqrt(vhat) + config.eps) +
                             config.weight_decay * theta[i]);
  }
}

void adam_step(std::map<std::string, Tensor>& params,
               const std::map<std::string, std::vector<double>>& grads,
               AdamState& state) {
  ++state.t;
  for (auto& [name, tensor] : params) {
    if (!tensor.requires_grad()) continue;
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    auto& [m, v] = state.moments[name];
    adam_update(tensor.values(), it->second, m, v, state.t, state.config);
  }
}

}  // namespace stnp
