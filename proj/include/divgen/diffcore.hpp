// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace divgen {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Shape mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API contract violation (non-scalar loss, stale tensor, duplicate watch...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numeric failure: sqrt of a negative, division by zero, NaN in a loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shared error vocabulary for file handling across modules.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Graph;

// Dense 64-bit real array. Plain value by default; becomes differentiable
// when registered on a Graph (directly via Graph::param, or transitively as
// the result of an operation with a tracked operand).
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor row(std::vector<double> v);     // shape [1, n]
  static Tensor column(std::vector<double> v);  // shape [n, 1]
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return values_.size() == 1; }

  double item() const;  // requires size() == 1
  double at(std::size_t i) const { return values_[i]; }
  double at(std::size_t r, std::size_t c) const;
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool tracked() const { return graph_ != nullptr; }
  Graph* graph() const { return graph_; }
  int node() const { return node_; }

 private:
  friend class Graph;
  friend struct OpBuilder;

  Shape shape_;
  std::vector<double> values_;
  Graph* graph_ = nullptr;
  int node_ = -1;
  std::uint64_t epoch_ = 0;
};

// Gradients keyed by the param id passed to Graph::param.
using GradientMap = std::unordered_map<int, Tensor>;

// Reverse-mode tape. Rebuilt every forward pass: operations append nodes in
// topological order (parent ids strictly below child ids) and backward()
// replays them in reverse, then resets the tape. One graph is single-threaded;
// independent graphs may run concurrently.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Registers a differentiable leaf. `param_id` keys the gradient returned by
  // backward(); each id may be watched at most once per pass.
  Tensor param(int param_id, const Tensor& value);

  // Registers a non-differentiable leaf.
  Tensor constant(const Tensor& value);

  // Gradients of a scalar loss w.r.t. every watched param. Resets the tape;
  // tensors produced during the pass become stale.
  GradientMap backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }
  std::uint64_t epoch() const { return epoch_; }

 private:
  friend struct OpBuilder;

  enum class Op : std::uint8_t {
    kLeaf,
    kConstant,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kRelu,
    kTanh,
    kSigmoid,
    kSquare,
    kSqrt,
    kExp,
    kNeg,
    kMatmul,
    kConcatCols,
    kSumAll,
    kSumAxis,
    kMeanAll,
    kMeanAxis,
    kNormAll,
    kNormAxis,
    kPairwise,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int axis = -1;
    Shape shape;
    std::vector<double> out;
    std::vector<double> grad;
    int param_id = -1;
  };

  int push(Node n);
  void reset();

  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_to_node_;
  std::uint64_t epoch_ = 0;
};

// ---- Operations ----
// All run eagerly on values. When an operand is tracked, the result is
// recorded on that operand's graph and participates in backward().

Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise; operands must have equal shapes, or one may be a scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& t);
Tensor max0(const Tensor& t);  // hinge clamp max(0, x); relu under another name
Tensor tanh(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor square(const Tensor& t);
Tensor sqrt(const Tensor& t);  // negative input is a NumericError
Tensor exp(const Tensor& t);
Tensor neg(const Tensor& t);

// Reductions. Whole-tensor forms produce a scalar; the axis forms apply to
// rank-2 tensors and keep the reduced axis with extent 1.
Tensor sum(const Tensor& t);
Tensor sum(const Tensor& t, int axis);
Tensor mean(const Tensor& t);
Tensor mean(const Tensor& t, int axis);
Tensor euclidean_norm(const Tensor& t);
Tensor euclidean_norm(const Tensor& t, int axis);

// [N, d] points -> [N, N] matrix of Euclidean distances. Zero diagonal.
// The gradient at coincident points (distance 0) is zero.
Tensor pairwise_euclidean(const Tensor& points);

// [N, p] and [N, q] -> [N, p+q].
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Same forward values; blocks gradient flow to ancestors.
Tensor detach(const Tensor& t);

// ---- Optimizer ----

struct Parameter {
  int id = -1;
  std::string name;
  Tensor value;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::unordered_map<int, std::vector<double>> m;
  std::unordered_map<int, std::vector<double>> v;
};

// One Adam update over the listed params; params without an entry in `grads`
// are left untouched. Deterministic given inputs.
void adam_step(const std::vector<Parameter*>& params, const GradientMap& grads,
               AdamState& state, double lr);

}  // namespace divgen
