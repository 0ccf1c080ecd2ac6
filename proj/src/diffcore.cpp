// SPDX-License-Identifier: Apache-2.0
#include "divgen/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace divgen {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// ---- Tensor ----

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw DimensionError("tensor shape " + shape_str(shape_) + " does not hold " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::row(std::vector<double> v) {
  Shape s{1, v.size()};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::column(std::vector<double> v) {
  Shape s{v.size(), 1};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not rank-2, shape " + shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not rank-2, shape " + shape_str(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ContractError("item() on non-scalar tensor of shape " + shape_str(shape_));
  }
  return values_[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return values_[r * cols() + c];
}

// ---- Graph plumbing ----

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Graph::reset() {
  nodes_.clear();
  param_to_node_.clear();
  ++epoch_;
}

Tensor Graph::param(int param_id, const Tensor& value) {
  if (param_to_node_.count(param_id)) {
    throw ContractError("param id " + std::to_string(param_id) +
                        " watched twice in one pass");
  }
  Node n;
  n.op = Op::kLeaf;
  n.shape = value.shape();
  n.out = value.values();
  n.param_id = param_id;
  int id = push(std::move(n));
  param_to_node_.emplace(param_id, id);

  Tensor t = value;
  t.graph_ = this;
  t.node_ = id;
  t.epoch_ = epoch_;
  return t;
}

Tensor Graph::constant(const Tensor& value) {
  Node n;
  n.op = Op::kConstant;
  n.shape = value.shape();
  n.out = value.values();
  int id = push(std::move(n));

  Tensor t = value;
  t.graph_ = this;
  t.node_ = id;
  t.epoch_ = epoch_;
  return t;
}

// ---- Op recording ----

struct OpBuilder {
  using Op = Graph::Op;
  using Node = Graph::Node;

  static void check_live(const Tensor& t) {
    if (t.tracked() && t.epoch_ != t.graph_->epoch()) {
      throw ContractError("tensor is stale: its graph was reset by backward()");
    }
  }

  static Graph* graph_of(const Tensor& a, const Tensor& b) {
    check_live(a);
    check_live(b);
    if (a.tracked() && b.tracked() && a.graph_ != b.graph_) {
      throw ContractError("operands belong to different graphs");
    }
    return a.tracked() ? a.graph_ : (b.tracked() ? b.graph_ : nullptr);
  }

  static Graph* graph_of(const Tensor& a) {
    check_live(a);
    return a.graph_;
  }

  static int intern(Graph* g, const Tensor& t) {
    if (t.tracked()) return t.node_;
    Node n;
    n.op = Op::kConstant;
    n.shape = t.shape_;
    n.out = t.values_;
    return g->push(std::move(n));
  }

  static Tensor emit(Graph* g, Op op, const Tensor& a, const Tensor& b,
                     int axis, Shape shape, std::vector<double> out) {
    Tensor r(std::move(shape), std::move(out));
    if (!g) return r;
    Node n;
    n.op = op;
    n.a = intern(g, a);
    n.b = intern(g, b);
    n.axis = axis;
    n.shape = r.shape_;
    n.out = r.values_;
    r.node_ = g->push(std::move(n));
    r.graph_ = g;
    r.epoch_ = g->epoch();
    return r;
  }

  static Tensor emit(Graph* g, Op op, const Tensor& a, int axis, Shape shape,
                     std::vector<double> out) {
    Tensor r(std::move(shape), std::move(out));
    if (!g) return r;
    Node n;
    n.op = op;
    n.a = intern(g, a);
    n.axis = axis;
    n.shape = r.shape_;
    n.out = r.values_;
    r.node_ = g->push(std::move(n));
    r.graph_ = g;
    r.epoch_ = g->epoch();
    return r;
  }
};

namespace {

using Op = OpBuilder::Op;

double bval(const std::vector<double>& v, std::size_t i) {
  return v.size() == 1 ? v[0] : v[i];
}

void check_elementwise(const Tensor& a, const Tensor& b, const char* name) {
  if (a.is_scalar() || b.is_scalar()) return;
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(name) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " are incompatible");
  }
}

Shape broadcast_shape(const Tensor& a, const Tensor& b) {
  return a.is_scalar() ? b.shape() : a.shape();
}

Tensor binary_op(Op op, const char* name, const Tensor& a, const Tensor& b,
                 double (*f)(double, double)) {
  check_elementwise(a, b, name);
  Shape shape = broadcast_shape(a, b);
  std::size_t n = shape_size(shape);
  std::vector<double> out(n);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(bval(av, i), bval(bv, i));
  return OpBuilder::emit(OpBuilder::graph_of(a, b), op, a, b, -1,
                         std::move(shape), std::move(out));
}

Tensor unary_op(Op op, const Tensor& t, double (*f)(double)) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = f(t.at(i));
  return OpBuilder::emit(OpBuilder::graph_of(t), op, t, -1, t.shape(),
                         std::move(out));
}

void check_axis(const Tensor& t, int axis) {
  if (t.rank() != 2) {
    throw DimensionError("axis reduction requires a rank-2 tensor, got " +
                         shape_str(t.shape()));
  }
  if (axis != 0 && axis != 1) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(t.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(Op::kAdd, "add", a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(Op::kSub, "sub", a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(Op::kMul, "mul", a, b, [](double x, double y) { return x * y; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double d : b.values()) {
    if (d == 0.0) throw NumericError("div: division by zero");
  }
  return binary_op(Op::kDiv, "div", a, b, [](double x, double y) { return x / y; });
}

Tensor relu(const Tensor& t) {
  return unary_op(Op::kRelu, t, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor max0(const Tensor& t) { return relu(t); }

Tensor tanh(const Tensor& t) {
  return unary_op(Op::kTanh, t, [](double x) { return std::tanh(x); });
}

Tensor sigmoid(const Tensor& t) {
  return unary_op(Op::kSigmoid, t, [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor square(const Tensor& t) {
  return unary_op(Op::kSquare, t, [](double x) { return x * x; });
}

Tensor sqrt(const Tensor& t) {
  for (double x : t.values()) {
    if (x < 0.0) throw NumericError("sqrt of negative input");
  }
  return unary_op(Op::kSqrt, t, [](double x) { return std::sqrt(x); });
}

Tensor exp(const Tensor& t) {
  return unary_op(Op::kExp, t, [](double x) { return std::exp(x); });
}

Tensor neg(const Tensor& t) {
  return unary_op(Op::kNeg, t, [](double x) { return -x; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " do not compose");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return OpBuilder::emit(OpBuilder::graph_of(a, b), Op::kMatmul, a, b, -1,
                         Shape{m, n}, std::move(out));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw DimensionError("concat_cols: shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " do not align");
  }
  const std::size_t n = a.rows(), p = a.cols(), q = b.cols();
  std::vector<double> out(n * (p + q));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) out[r * (p + q) + c] = a.at(r, c);
    for (std::size_t c = 0; c < q; ++c) out[r * (p + q) + p + c] = b.at(r, c);
  }
  return OpBuilder::emit(OpBuilder::graph_of(a, b), Op::kConcatCols, a, b, -1,
                         Shape{n, p + q}, std::move(out));
}

Tensor sum(const Tensor& t) {
  double s = 0.0;
  for (double x : t.values()) s += x;
  return OpBuilder::emit(OpBuilder::graph_of(t), Op::kSumAll, t, -1, Shape{}, {s});
}

Tensor sum(const Tensor& t, int axis) {
  check_axis(t, axis);
  const std::size_t r = t.rows(), c = t.cols();
  if (axis == 1) {
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i] += t.at(i, j);
    return OpBuilder::emit(OpBuilder::graph_of(t), Op::kSumAxis, t, 1, Shape{r, 1},
                           std::move(out));
  }
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += t.at(i, j);
  return OpBuilder::emit(OpBuilder::graph_of(t), Op::kSumAxis, t, 0, Shape{1, c},
                         std::move(out));
}

Tensor mean(const Tensor& t) {
  if (t.size() == 0) throw DimensionError("mean of empty tensor");
  double s = 0.0;
  for (double x : t.values()) s += x;
  return OpBuilder::emit(OpBuilder::graph_of(t), Op::kMeanAll, t, -1, Shape{},
                         {s / static_cast<double>(t.size())});
}

Tensor mean(const Tensor& t, int axis) {
  check_axis(t, axis);
  const std::size_t r = t.rows(), c = t.cols();
  const double denom = static_cast<double>(axis == 1 ? c : r);
  if (denom == 0) throw DimensionError("mean over empty axis");
  if (axis == 1) {
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) out[i] += t.at(i, j);
      out[i] /= denom;
    }
    return OpBuilder::emit(OpBuilder::graph_of(t), Op::kMeanAxis, t, 1,
                           Shape{r, 1}, std::move(out));
  }
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += t.at(i, j);
  for (std::size_t j = 0; j < c; ++j) out[j] /= denom;
  return OpBuilder::emit(OpBuilder::graph_of(t), Op::kMeanAxis, t, 0, Shape{1, c},
                         std::move(out));
}

Tensor euclidean_norm(const Tensor& t) {
  double s = 0.0;
  for (double x : t.values()) s += x * x;
  return OpBuilder::emit(OpBuilder::graph_of(t), Op::kNormAll, t, -1, Shape{},
                         {std::sqrt(s)});
}

Tensor euclidean_norm(const Tensor& t, int axis) {
  check_axis(t, axis);
  const std::size_t r = t.rows(), c = t.cols();
  if (axis == 1) {
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += t.at(i, j) * t.at(i, j);
      out[i] = std::sqrt(s);
    }
    return OpBuilder::emit(OpBuilder::graph_of(t), Op::kNormAxis, t, 1,
                           Shape{r, 1}, std::move(out));
  }
  std::vector<double> out(c, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < r; ++i) s += t.at(i, j) * t.at(i, j);
    out[j] = std::sqrt(s);
  }
  return OpBuilder::emit(OpBuilder::graph_of(t), Op::kNormAxis, t, 0, Shape{1, c},
                         std::move(out));
}

Tensor pairwise_euclidean(const Tensor& points) {
  if (points.rank() != 2) {
    throw DimensionError("pairwise_euclidean expects [N,d] points, got " +
                         shape_str(points.shape()));
  }
  const std::size_t n = points.rows(), d = points.cols();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = points.at(i, k) - points.at(j, k);
        s += diff * diff;
      }
      const double dist = std::sqrt(s);
      out[i * n + j] = dist;
      out[j * n + i] = dist;
    }
  }
  return OpBuilder::emit(OpBuilder::graph_of(points), Op::kPairwise, points, -1,
                         Shape{n, n}, std::move(out));
}

Tensor detach(const Tensor& t) {
  OpBuilder::check_live(t);
  return Tensor(t.shape(), t.values());
}

// ---- Backward ----

GradientMap Graph::backward(const Tensor& loss) {
  if (!loss.tracked() || loss.graph() != this) {
    throw ContractError("backward: loss is not tracked on this graph");
  }
  if (loss.epoch_ != epoch_) {
    throw ContractError("backward: loss is stale, graph was already reset");
  }
  if (loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_str(loss.shape()));
  }

  auto ensure = [&](int id) -> std::vector<double>& {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.out.size(), 0.0);
    return n.grad;
  };

  // Accumulate into a parent that may be a broadcast scalar.
  auto acc = [&](std::vector<double>& g, std::size_t i, double v) {
    if (g.size() == 1) {
      g[0] += v;
    } else {
      g[i] += v;
    }
  };

  ensure(loss.node_)[0] = 1.0;

  for (int id = loss.node_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    const std::vector<double>& g = n.grad;

    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;

      case Op::kAdd: {
        auto& ga = ensure(n.a);
        auto& gb = ensure(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          acc(ga, i, g[i]);
          acc(gb, i, g[i]);
        }
        break;
      }
      case Op::kSub: {
        auto& ga = ensure(n.a);
        auto& gb = ensure(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          acc(ga, i, g[i]);
          acc(gb, i, -g[i]);
        }
        break;
      }
      case Op::kMul: {
        const auto& av = nodes_[n.a].out;
        const auto& bv = nodes_[n.b].out;
        auto& ga = ensure(n.a);
        auto& gb = ensure(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          acc(ga, i, g[i] * bval(bv, i));
          acc(gb, i, g[i] * bval(av, i));
        }
        break;
      }
      case Op::kDiv: {
        const auto& av = nodes_[n.a].out;
        const auto& bv = nodes_[n.b].out;
        auto& ga = ensure(n.a);
        auto& gb = ensure(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double b = bval(bv, i);
          acc(ga, i, g[i] / b);
          acc(gb, i, -g[i] * bval(av, i) / (b * b));
        }
        break;
      }
      case Op::kRelu: {
        const auto& xv = nodes_[n.a].out;
        auto& ga = ensure(n.a);
        // Subgradient at the kink (x == 0) is 0.
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xv[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::kTanh: {
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * (1.0 - n.out[i] * n.out[i]);
        break;
      }
      case Op::kSigmoid: {
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * n.out[i] * (1.0 - n.out[i]);
        break;
      }
      case Op::kSquare: {
        const auto& xv = nodes_[n.a].out;
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * xv[i];
        break;
      }
      case Op::kSqrt: {
        const auto& xv = nodes_[n.a].out;
        auto& ga = ensure(n.a);
        // Gradient at exactly 0 is taken as 0, mirroring the norm convention.
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xv[i] > 0.0) ga[i] += g[i] * 0.5 / n.out[i];
        break;
      }
      case Op::kExp: {
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.out[i];
        break;
      }
      case Op::kNeg: {
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::kMatmul: {
        const Node& na = nodes_[n.a];
        const Node& nb = nodes_[n.b];
        const std::size_t m = na.shape[0], k = na.shape[1], c = nb.shape[1];
        auto& ga = ensure(n.a);
        auto& gb = ensure(n.b);
        // dA = G * B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j)
              s += g[i * c + j] * nb.out[p * c + j];
            ga[i * k + p] += s;
          }
        }
        // dB = A^T * G
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t i = 0; i < m; ++i) {
            const double aip = na.out[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j)
              gb[p * c + j] += aip * g[i * c + j];
          }
        }
        break;
      }
      case Op::kConcatCols: {
        const Node& na = nodes_[n.a];
        const Node& nb = nodes_[n.b];
        const std::size_t rows = na.shape[0], p = na.shape[1], q = nb.shape[1];
        auto& ga = ensure(n.a);
        auto& gb = ensure(n.b);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t cc = 0; cc < p; ++cc)
            ga[r * p + cc] += g[r * (p + q) + cc];
          for (std::size_t cc = 0; cc < q; ++cc)
            gb[r * q + cc] += g[r * (p + q) + p + cc];
        }
        break;
      }
      case Op::kSumAll: {
        auto& ga = ensure(n.a);
        for (double& v : ga) v += g[0];
        break;
      }
      case Op::kMeanAll: {
        auto& ga = ensure(n.a);
        const double w = g[0] / static_cast<double>(ga.size());
        for (double& v : ga) v += w;
        break;
      }
      case Op::kSumAxis: {
        const Node& na = nodes_[n.a];
        const std::size_t r = na.shape[0], c = na.shape[1];
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            ga[i * c + j] += (n.axis == 1) ? g[i] : g[j];
        break;
      }
      case Op::kMeanAxis: {
        const Node& na = nodes_[n.a];
        const std::size_t r = na.shape[0], c = na.shape[1];
        const double denom = static_cast<double>(n.axis == 1 ? c : r);
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            ga[i * c + j] += ((n.axis == 1) ? g[i] : g[j]) / denom;
        break;
      }
      case Op::kNormAll: {
        const auto& xv = nodes_[n.a].out;
        auto& ga = ensure(n.a);
        const double norm = n.out[0];
        if (norm > 0.0) {
          for (std::size_t i = 0; i < xv.size(); ++i)
            ga[i] += g[0] * xv[i] / norm;
        }
        // norm == 0: gradient defined as the zero vector.
        break;
      }
      case Op::kNormAxis: {
        const Node& na = nodes_[n.a];
        const std::size_t r = na.shape[0], c = na.shape[1];
        auto& ga = ensure(n.a);
        if (n.axis == 1) {
          for (std::size_t i = 0; i < r; ++i) {
            if (n.out[i] <= 0.0) continue;
            for (std::size_t j = 0; j < c; ++j)
              ga[i * c + j] += g[i] * na.out[i * c + j] / n.out[i];
          }
        } else {
          for (std::size_t j = 0; j < c; ++j) {
            if (n.out[j] <= 0.0) continue;
            for (std::size_t i = 0; i < r; ++i)
              ga[i * c + j] += g[j] * na.out[i * c + j] / n.out[j];
          }
        }
        break;
      }
      case Op::kPairwise: {
        const Node& na = nodes_[n.a];
        const std::size_t cnt = na.shape[0], d = na.shape[1];
        auto& ga = ensure(n.a);
        for (std::size_t i = 0; i < cnt; ++i) {
          for (std::size_t j = 0; j < cnt; ++j) {
            if (i == j) continue;
            const double gij = g[i * cnt + j];
            if (gij == 0.0) continue;
            const double dist = n.out[i * cnt + j];
            if (dist <= 0.0) continue;  // coincident points: zero gradient
            for (std::size_t k = 0; k < d; ++k) {
              const double diff = (na.out[i * d + k] - na.out[j * d + k]) / dist;
              ga[i * d + k] += gij * diff;
              ga[j * d + k] -= gij * diff;
            }
          }
        }
        break;
      }
    }
  }

  GradientMap grads;
  grads.reserve(param_to_node_.size());
  for (const auto& [pid, nid] : param_to_node_) {
    Node& n = nodes_[nid];
    if (n.grad.empty()) n.grad.assign(n.out.size(), 0.0);
    grads.emplace(pid, Tensor(n.shape, std::move(n.grad)));
  }
  reset();
  return grads;
}

// ---- Adam ----

void adam_step(const std::vector<Parameter*>& params, const GradientMap& grads,
               AdamState& state, double lr) {
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (Parameter* p : params) {
    auto it = grads.find(p->id);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    if (g.shape() != p->value.shape()) {
      throw ContractError("adam_step: gradient shape " + shape_str(g.shape()) +
                          " does not match param '" + p->name + "' " +
                          shape_str(p->value.shape()));
    }
    auto& m = state.m[p->id];
    auto& v = state.v[p->id];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);
    auto& pv = p->value.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g.at(i);
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      pv[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace divgen
