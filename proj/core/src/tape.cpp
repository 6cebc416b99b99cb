#include "lgrpool/tape.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "lgrpool/error.hpp"

namespace lgrpool::ad {
namespace {

std::atomic<bool> g_sigmoid_fault{false};

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeMismatch(std::string(op) + ": shapes " + shape_of(a) + " and " +
                      shape_of(b));
}

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw std::logic_error("operands recorded on different tapes");
  }
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw std::logic_error("unbound Var");
  return *a.tape;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// --- Var -------------------------------------------------------------------

const Matrix& Var::value() const { return tape_of(*this).value(*this); }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw NotScalar("expected a 1x1 value, got " + shape_of(v));
  }
  return v(0, 0);
}

// --- ParameterSet ----------------------------------------------------------

std::size_t ParameterSet::add(std::string name, Matrix value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

const Matrix& ParameterSet::at(std::string_view name) const {
  auto i = find(name);
  if (!i) throw std::out_of_range("no parameter named " + std::string(name));
  return values_[*i];
}

Matrix& ParameterSet::at(std::string_view name) {
  auto i = find(name);
  if (!i) throw std::out_of_range("no parameter named " + std::string(name));
  return values_[*i];
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) {
    out.add(names_[i], Matrix::Zero(values_[i].rows(), values_[i].cols()));
  }
  return out;
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

void ParameterSet::set_zero() {
  for (auto& v : values_) v.setZero();
}

bool ParameterSet::all_finite() const {
  for (const auto& v : values_) {
    if (!v.allFinite()) return false;
  }
  return true;
}

bool ParameterSet::bitwise_equal(const ParameterSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = values_[i];
    const auto& b = other.values_[i];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (a.size() > 0 &&
        std::memcmp(a.data(), b.data(),
                    static_cast<std::size_t>(a.size()) * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

// --- Tape ------------------------------------------------------------------

Var Tape::constant(Matrix value) {
  return record(std::move(value), {}, nullptr, "constant");
}

Var Tape::variable(Matrix value) {
  Var v = record(std::move(value), {}, nullptr, "variable");
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::parameter(const ParameterSet& set, std::size_t index,
                    bool requires_grad) {
  auto key = std::make_pair(&set, index);
  if (auto it = bound_.find(key); it != bound_.end()) {
    return Var{this, it->second};
  }
  const Matrix& value = set[index];
  if (!value.allFinite()) {
    throw NonFinite("parameter " + set.name(index) + " is not finite");
  }
  Node node;
  node.external = &value;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  bound_.emplace(key, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const ParameterSet& set, std::string_view name,
                    bool requires_grad) {
  auto i = set.find(name);
  if (!i) throw std::out_of_range("no parameter named " + std::string(name));
  return parameter(set, *i, requires_grad);
}

Var Tape::record(Matrix value, std::span<const Var> parents,
                 BackwardFn backward, const char* op) {
  if (!value.allFinite()) {
    throw NonFinite(std::string(op) + " produced a non-finite value");
  }
  Node node;
  node.owned = std::move(value);
  for (const auto& p : parents) {
    if (p.tape != this) throw std::logic_error("parent from another tape");
    node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate_grad(std::size_t id, const Matrix& g) {
  auto& node = nodes_[id];
  if (!node.requires_grad) return;
  if (!node.has_grad) {
    node.grad = g;
    node.has_grad = true;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::logic_error("loss from another tape");
  const auto& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    throw NotScalar("backward needs a 1x1 loss, got " + shape_of(v));
  }
  if (backward_done_) {
    throw DoubleBackward("backward already ran on this tape");
  }
  backward_done_ = true;
  accumulate_grad(loss.id, Matrix::Ones(1, 1));
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (node.has_grad && node.backward) node.backward(*this, node.grad);
  }
}

const Matrix& Tape::value(Var v) const { return nodes_.at(v.id).value(); }

Matrix Tape::grad(Var v) const {
  const auto& node = nodes_.at(v.id);
  if (node.has_grad) return node.grad;
  const auto& val = node.value();
  return Matrix::Zero(val.rows(), val.cols());
}

void Tape::accumulate_parameter_grads(const ParameterSet& set,
                                      ParameterSet& grads,
                                      double scale) const {
  for (const auto& [key, id] : bound_) {
    if (key.first != &set) continue;
    const auto& node = nodes_[id];
    if (!node.has_grad) continue;
    auto& target = grads[key.second];
    if (target.rows() != node.grad.rows() || target.cols() != node.grad.cols()) {
      mismatch("accumulate_parameter_grads", target, node.grad);
    }
    target += scale * node.grad;
  }
}

// --- primitives ------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.rows()) mismatch("matmul", A, B);
  Var parents[] = {a, b};
  return t.record(
      A * B, parents,
      [a, b](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) {
          tape.accumulate_grad(a.id, g * tape.value(b).transpose());
        }
        if (tape.requires_grad(b)) {
          tape.accumulate_grad(b.id, tape.value(a).transpose() * g);
        }
      },
      "matmul");
}

Var spmm(const SparseMatrix& s, Var b) {
  Tape& t = tape_of(b);
  const auto& B = b.value();
  if (static_cast<std::size_t>(B.rows()) != s.cols()) {
    throw ShapeMismatch("spmm: sparse " + std::to_string(s.rows()) + "x" +
                        std::to_string(s.cols()) + " and " + shape_of(B));
  }
  const SparseMatrix* sp = &s;
  Var parents[] = {b};
  return t.record(
      s.multiply(B), parents,
      [sp, b](Tape& tape, const Matrix& g) {
        tape.accumulate_grad(b.id, sp->transpose_multiply(g));
      },
      "spmm");
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rows() != B.rows() || A.cols() != B.cols()) mismatch("add", A, B);
  Var parents[] = {a, b};
  return t.record(
      A + B, parents,
      [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate_grad(a.id, g);
        tape.accumulate_grad(b.id, g);
      },
      "add");
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rows() != B.rows() || A.cols() != B.cols()) mismatch("sub", A, B);
  Var parents[] = {a, b};
  return t.record(
      A - B, parents,
      [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate_grad(a.id, g);
        tape.accumulate_grad(b.id, -g);
      },
      "sub");
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  Var parents[] = {a};
  return t.record(
      c * a.value(), parents,
      [a, c](Tape& tape, const Matrix& g) { tape.accumulate_grad(a.id, c * g); },
      "scale");
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rows() != B.rows() || A.cols() != B.cols()) mismatch("hadamard", A, B);
  Var parents[] = {a, b};
  return t.record(
      A.cwiseProduct(B), parents,
      [a, b](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) {
          tape.accumulate_grad(a.id, g.cwiseProduct(tape.value(b)));
        }
        if (tape.requires_grad(b)) {
          tape.accumulate_grad(b.id, g.cwiseProduct(tape.value(a)));
        }
      },
      "hadamard");
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rows() != B.rows()) mismatch("concat_cols", A, B);
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const auto left = A.cols();
  const auto right = B.cols();
  Var parents[] = {a, b};
  return t.record(
      std::move(out), parents,
      [a, b, left, right](Tape& tape, const Matrix& g) {
        tape.accumulate_grad(a.id, g.leftCols(left));
        tape.accumulate_grad(b.id, g.rightCols(right));
      },
      "concat_cols");
}

Var add_row_vector(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (B.rows() != 1 || B.cols() != A.cols()) mismatch("add_row_vector", A, B);
  Matrix out = A.rowwise() + B.row(0);
  Var parents[] = {a, b};
  return t.record(
      std::move(out), parents,
      [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate_grad(a.id, g);
        if (tape.requires_grad(b)) {
          tape.accumulate_grad(b.id, g.colwise().sum());
        }
      },
      "add_row_vector");
}

Var mul_rows(Var a, Var w) {
  Tape& t = same_tape(a, w);
  const auto& A = a.value();
  const auto& W = w.value();
  if (W.cols() != 1 || W.rows() != A.rows()) mismatch("mul_rows", A, W);
  Matrix out = W.col(0).asDiagonal() * A;
  Var parents[] = {a, w};
  return t.record(
      std::move(out), parents,
      [a, w](Tape& tape, const Matrix& g) {
        if (tape.requires_grad(a)) {
          tape.accumulate_grad(a.id, tape.value(w).col(0).asDiagonal() * g);
        }
        if (tape.requires_grad(w)) {
          Matrix gw = g.cwiseProduct(tape.value(a)).rowwise().sum();
          tape.accumulate_grad(w.id, gw);
        }
      },
      "mul_rows");
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Matrix s = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  Matrix saved = s;
  Var parents[] = {a};
  return t.record(
      std::move(s), parents,
      [a, saved = std::move(saved)](Tape& tape, const Matrix& g) {
        if (testing::sigmoid_fault()) {
          tape.accumulate_grad(a.id, g.cwiseProduct(saved));
          return;
        }
        Matrix d = saved.array() * (1.0 - saved.array());
        tape.accumulate_grad(a.id, g.cwiseProduct(d));
      },
      "sigmoid");
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Var parents[] = {a};
  return t.record(
      a.value().cwiseMax(0.0), parents,
      [a](Tape& tape, const Matrix& g) {
        Matrix mask = (tape.value(a).array() > 0.0).cast<double>();
        tape.accumulate_grad(a.id, g.cwiseProduct(mask));
      },
      "relu");
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const auto& A = a.value();
  if (!A.allFinite()) throw NonFinite("softmax_rows input is not finite");
  Matrix s = A.colwise() - A.rowwise().maxCoeff();
  s = s.array().exp();
  s = s.array().colwise() / s.rowwise().sum().array();
  Matrix saved = s;
  Var parents[] = {a};
  return t.record(
      std::move(s), parents,
      [a, saved = std::move(saved)](Tape& tape, const Matrix& g) {
        Eigen::VectorXd dot = g.cwiseProduct(saved).rowwise().sum();
        Matrix d = saved.array() * (g.colwise() - dot).array();
        tape.accumulate_grad(a.id, d);
      },
      "softmax_rows");
}

Var clamp_min(Var a, double floor) {
  Tape& t = tape_of(a);
  Var parents[] = {a};
  return t.record(
      a.value().cwiseMax(floor), parents,
      [a, floor](Tape& tape, const Matrix& g) {
        Matrix mask = (tape.value(a).array() > floor).cast<double>();
        tape.accumulate_grad(a.id, g.cwiseProduct(mask));
      },
      "clamp_min");
}

Var clamp_max(Var a, double ceiling) {
  Tape& t = tape_of(a);
  Var parents[] = {a};
  return t.record(
      a.value().cwiseMin(ceiling), parents,
      [a, ceiling](Tape& tape, const Matrix& g) {
        Matrix mask = (tape.value(a).array() < ceiling).cast<double>();
        tape.accumulate_grad(a.id, g.cwiseProduct(mask));
      },
      "clamp_max");
}

Var mean_rows(Var a) {
  Tape& t = tape_of(a);
  const auto& A = a.value();
  if (A.rows() == 0) throw ShapeMismatch("mean_rows of an empty matrix");
  const auto rows = A.rows();
  Var parents[] = {a};
  return t.record(
      A.colwise().mean(), parents,
      [a, rows](Tape& tape, const Matrix& g) {
        Matrix d = g.replicate(rows, 1) / static_cast<double>(rows);
        tape.accumulate_grad(a.id, d);
      },
      "mean_rows");
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const auto& A = a.value();
  const auto rows = A.rows();
  const auto cols = A.cols();
  Var parents[] = {a};
  return t.record(
      Matrix::Constant(1, 1, A.sum()), parents,
      [a, rows, cols](Tape& tape, const Matrix& g) {
        tape.accumulate_grad(a.id, Matrix::Constant(rows, cols, g(0, 0)));
      },
      "sum");
}

Var sum_sq_rows(Var a) {
  Tape& t = tape_of(a);
  Var parents[] = {a};
  return t.record(
      a.value().rowwise().squaredNorm(), parents,
      [a](Tape& tape, const Matrix& g) {
        Matrix d = 2.0 * (g.col(0).asDiagonal() * tape.value(a));
        tape.accumulate_grad(a.id, d);
      },
      "sum_sq_rows");
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape& t = tape_of(a);
  const auto& A = a.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), A.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= static_cast<std::size_t>(A.rows())) {
      throw ShapeMismatch("gather_rows: row " + std::to_string(index[r]) +
                          " of " + shape_of(A));
    }
    out.row(static_cast<Eigen::Index>(r)) =
        A.row(static_cast<Eigen::Index>(index[r]));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const auto rows = A.rows();
  const auto cols = A.cols();
  Var parents[] = {a};
  return t.record(
      std::move(out), parents,
      [a, idx = std::move(idx), rows, cols](Tape& tape, const Matrix& g) {
        Matrix d = Matrix::Zero(rows, cols);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          d.row(static_cast<Eigen::Index>(idx[r])) +=
              g.row(static_cast<Eigen::Index>(r));
        }
        tape.accumulate_grad(a.id, d);
      },
      "gather_rows");
}

Var scatter_add_rows(Var a, std::span<const std::size_t> index,
                     std::size_t out_rows) {
  Tape& t = tape_of(a);
  const auto& A = a.value();
  if (index.size() != static_cast<std::size_t>(A.rows())) {
    throw ShapeMismatch("scatter_add_rows: " + std::to_string(index.size()) +
                        " indices for " + shape_of(A));
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(out_rows), A.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= out_rows) {
      throw ShapeMismatch("scatter_add_rows: target row " +
                          std::to_string(index[r]) + " >= " +
                          std::to_string(out_rows));
    }
    out.row(static_cast<Eigen::Index>(index[r])) +=
        A.row(static_cast<Eigen::Index>(r));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  Var parents[] = {a};
  return t.record(
      std::move(out), parents,
      [a, idx = std::move(idx)](Tape& tape, const Matrix& g) {
        Matrix d(static_cast<Eigen::Index>(idx.size()), g.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
          d.row(static_cast<Eigen::Index>(r)) =
              g.row(static_cast<Eigen::Index>(idx[r]));
        }
        tape.accumulate_grad(a.id, d);
      },
      "scatter_add_rows");
}

Var cross_entropy_rows(Var probs, std::span<const std::size_t> labels) {
  Tape& t = tape_of(probs);
  const auto& P = probs.value();
  if (labels.size() != static_cast<std::size_t>(P.rows()) || P.rows() == 0) {
    throw ShapeMismatch("cross_entropy_rows: " + std::to_string(labels.size()) +
                        " labels for " + shape_of(P));
  }
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= static_cast<std::size_t>(P.cols())) {
      throw LabelOutOfRange("label " + std::to_string(labels[r]) +
                            " with " + std::to_string(P.cols()) + " classes");
    }
    const double p = P(static_cast<Eigen::Index>(r),
                       static_cast<Eigen::Index>(labels[r]));
    total -= std::log(std::max(p, kProbabilityFloor));
  }
  const auto rows = P.rows();
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  Var parents[] = {probs};
  return t.record(
      Matrix::Constant(1, 1, total / static_cast<double>(rows)), parents,
      [probs, lab = std::move(lab), rows](Tape& tape, const Matrix& g) {
        const auto& P = tape.value(probs);
        Matrix d = Matrix::Zero(P.rows(), P.cols());
        for (std::size_t r = 0; r < lab.size(); ++r) {
          const auto ri = static_cast<Eigen::Index>(r);
          const auto ci = static_cast<Eigen::Index>(lab[r]);
          const double p = P(ri, ci);
          if (p > kProbabilityFloor) {
            d(ri, ci) = -g(0, 0) / (static_cast<double>(rows) * p);
          }
        }
        tape.accumulate_grad(probs.id, d);
      },
      "cross_entropy_rows");
}

namespace testing {

void set_sigmoid_fault(bool enabled) { g_sigmoid_fault.store(enabled); }
bool sigmoid_fault() { return g_sigmoid_fault.load(); }

}  // namespace testing

}  // namespace lgrpool::ad
