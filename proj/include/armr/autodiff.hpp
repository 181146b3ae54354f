#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace armr {

/// Dense row-major matrix of doubles. Every tensor in the engine is rank <= 2;
/// vectors are stored as 1 x n rows unless an op documents otherwise.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for any shape contract violation. The message names the offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Matrix& m);

/// A named trainable tensor. `grad` always has the shape of `value`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, Matrix v);
  void zero_grad() { grad.setZero(); }
};

/// Owns parameters with stable addresses, in insertion order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(std::string name, Matrix value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::vector<std::string> names() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Define-by-run tape. Nodes are appended in evaluation order, so the node
/// vector is already a topological order and backward walks it in reverse.
class Graph {
 public:
  /// Called during backward with the node's output value and its upstream gradient.
  using Backward = std::function<void(Graph&, const Matrix& out, const Matrix& grad)>;

  Graph() = default;
  /// With `track_gradients` false, parameters enter as constants and no
  /// backward closures are kept (inference).
  explicit Graph(bool track_gradients) : track_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to a parameter. Repeated calls with the same parameter return the same node.
  Var param(Parameter& p);

  /// Appends a node. `fn` may be empty when no input requires a gradient.
  Var record(Matrix value, std::vector<int> inputs, Backward fn);

  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` to the gradient of node `id` (or its parameter). No-op for constants.
  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.param) {
      n.param->grad += g;
    } else if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  /// Mutable gradient buffer for sparse scatters; zero-initialised on first use.
  Matrix& grad_buffer(int id);

  /// Reverse sweep from a 1x1 node; parameter gradients are accumulated into Parameter::grad.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    std::vector<int> inputs;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<const Parameter*, int>> param_nodes_;
  bool track_ = true;
};

// ---- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
/// Same-shape add, or a 1 x n row broadcast over an m x n matrix (either side).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var hadamard(Var a, Var b);
Var scale(Var a, double c);
/// Multiply every entry of `a` by the 1x1 node `s`.
Var scale(Var a, Var s);
/// out(i, j) = x(i, j) * w(i); w is m x 1.
Var scale_rows(Var x, Var w);
Var transpose(Var a);

Var sigmoid(Var a);
Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var softplus(Var a);

/// axis 1 normalises each row, axis 0 each column. Max-subtracted.
Var softmax(Var x, int axis);
/// Row-wise normalisation over the last axis, then gain and bias (each 1 x n).
Var layer_norm(Var x, Var gain, Var bias);
inline constexpr double kLayerNormEpsilon = 1e-5;

/// Row concatenation; every part must share the column count. Zero-row parts are allowed.
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count);
Var reverse_rows(Var x);
/// Row-major reshape.
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);

Var sum(Var x);
Var mean(Var x);

/// Gathers the listed rows of x (mask-select).
Var gather_rows(Var x, std::span<const int> rows);
/// Row r of the output is the sum of `table` rows listed in sets[r] (multi-hot times table).
Var embedding_bag(Var table, std::span<const std::vector<int>> sets);

/// Cosine similarity of the 1 x d row `v` with every row of `m` (n x d); returns 1 x n.
Var cosine_rows(Var v, Var m);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace armr

#include <map>

namespace armr {

/// Zeroes every parameter gradient, runs backward from `loss` and returns
/// d loss / d p by parameter name. Parameters the loss does not reach map to zeros.
std::map<std::string, Matrix> grad(Var loss, ParameterStore& params);

}  // namespace armr
