#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lgrpool/sparse.hpp"

namespace lgrpool::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// tape that produced it is alive.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
};

/// Named, ordered collection of trainable arrays.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Matrix& operator[](std::size_t i) const { return values_.at(i); }
  Matrix& operator[](std::size_t i) { return values_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const;
  const Matrix& at(std::string_view name) const;
  Matrix& at(std::string_view name);

  /// Same names and shapes, all entries zero.
  ParameterSet zeros_like() const;
  std::size_t total_size() const;
  void set_zero();
  bool all_finite() const;

  /// True when names, shapes and every bit of every entry agree.
  bool bitwise_equal(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so a reverse sweep over ids is a
/// valid reverse topological order. Parameters are bound by reference: the
/// ParameterSet must outlive the tape and stay unmodified while it is in use.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  /// Leaf bound to `set[index]`. Repeated calls return the same node.
  Var parameter(const ParameterSet& set, std::size_t index,
                bool requires_grad = true);
  Var parameter(const ParameterSet& set, std::string_view name,
                bool requires_grad = true);

  /// Reverse sweep from a 1x1 loss. Throws NotScalar or DoubleBackward.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() loss; zeros for untouched nodes.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// grads[i] += scale * dloss/dset[i] for every parameter of `set` bound on
  /// this tape. `grads` must have the layout of `set`.
  void accumulate_parameter_grads(const ParameterSet& set, ParameterSet& grads,
                                  double scale = 1.0) const;

  // Used by the primitives. Throws NonFinite if `value` has NaN/Inf.
  Var record(Matrix value, std::span<const Var> parents, BackwardFn backward,
             const char* op);
  void accumulate_grad(std::size_t id, const Matrix& g);

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;

    const Matrix& value() const { return external ? *external : owned; }
  };

  std::vector<Node> nodes_;
  std::map<std::pair<const ParameterSet*, std::size_t>, std::size_t> bound_;
  bool backward_done_ = false;
};

// Primitives. Shapes are checked eagerly and reported via ShapeMismatch.
Var matmul(Var a, Var b);
/// S * b. The sparse operand is a constant; it must outlive the tape.
Var spmm(const SparseMatrix& s, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double c);
Var hadamard(Var a, Var b);
Var concat_cols(Var a, Var b);
/// a + b with b a 1 x cols row vector added to every row.
Var add_row_vector(Var a, Var b);
/// Row i of a multiplied by w(i, 0); w is rows x 1.
Var mul_rows(Var a, Var w);
Var sigmoid(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
/// max(a, floor) elementwise; no gradient where the floor is active.
Var clamp_min(Var a, double floor);
/// min(a, ceiling) elementwise; no gradient where the ceiling is active.
Var clamp_max(Var a, double ceiling);
/// 1 x cols mean over rows.
Var mean_rows(Var a);
/// 1 x 1 sum of all entries.
Var sum(Var a);
/// rows x 1 squared L2 norm of each row.
Var sum_sq_rows(Var a);
/// out.row(r) = a.row(index[r]).
Var gather_rows(Var a, std::span<const std::size_t> index);
/// out.row(index[r]) += a.row(r); out has `out_rows` rows.
Var scatter_add_rows(Var a, std::span<const std::size_t> index,
                     std::size_t out_rows);
/// Mean over rows r of -log(max(probs(r, labels[r]), 1e-12)).
Var cross_entropy_rows(Var probs, std::span<const std::size_t> labels);

inline constexpr double kProbabilityFloor = 1e-12;

namespace testing {
// Makes sigmoid's backward rule wrong on purpose, to prove the gradient
// checker notices. Process-wide; tests must reset it.
void set_sigmoid_fault(bool enabled);
bool sigmoid_fault();
}  // namespace testing

}  // namespace lgrpool::ad
