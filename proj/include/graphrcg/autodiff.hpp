#pragma once
// Minimal reverse-mode automatic differentiation over dense row-major matrices.
//
// A Var is a shared handle to a node in a dynamically built expression graph.
// Leaves created with requires_grad=true accumulate gradients when backward()
// is called on a scalar (1x1) result. Nodes that do not depend on any such leaf
// record no parents, so inference builds no graph.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace graphrcg::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's grad into its parents.
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

// Graph recording switch for the current thread; off means every op result is
// a constant, whatever its inputs.
inline thread_local bool grad_mode_enabled = true;

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_enabled; }

// Sets the recording mode for a scope, restoring the previous one on exit.
class GradMode {
 public:
  explicit GradMode(bool enabled) : previous_(detail::grad_mode_enabled) { detail::grad_mode_enabled = enabled; }
  ~GradMode() { detail::grad_mode_enabled = previous_; }
  GradMode(const GradMode&) = delete;
  GradMode& operator=(const GradMode&) = delete;

 private:
  bool previous_;
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Var scalar(double v) { return Var(Matrix::Constant(1, 1, v)); }

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  // Direct mutable access, used by optimizers and tests on leaves.
  Matrix& mutable_value() { return node_->value; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const {
    if (node_->value.size() != 1) throw std::logic_error("item() on non-scalar Var");
    return node_->value(0, 0);
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  // Gradient of the last backward pass; zero matrix if never touched.
  Matrix grad() const {
    if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  // Returns a leaf holding a copy of the value with no history.
  Var detach() const { return Var(node_->value, false); }

  void backward() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared() const { return node_; }

 private:
  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend Var make_result(Matrix value, std::vector<Var> parents,
                         std::function<void(detail::Node&)> fn);

  std::shared_ptr<detail::Node> node_;
};

inline Var make_result(Matrix value, std::vector<Var> parents,
                       std::function<void(detail::Node&)> fn) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  bool any = false;
  if (grad_enabled()) {
    for (const auto& p : parents) any = any || p.requires_grad();
  }
  if (any) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.shared());
    n->backward_fn = std::move(fn);
  }
  return Var(std::move(n));
}

inline void Var::backward() const {
  if (node_->value.size() != 1) throw std::logic_error("backward() requires a scalar result");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS for a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      detail::Node* p = n->parents[i++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
  // Interior grads are scratch; leaves keep theirs until zero_grad().
  for (detail::Node* n : order) {
    if (n->backward_fn) n->grad.resize(0, 0);
  }
}

namespace detail {
inline void push(const std::shared_ptr<Node>& p, const Matrix& g) {
  if (p->requires_grad) p->accumulate(g);
}
inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}
}  // namespace detail

// ---- elementary arithmetic ----

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](detail::Node& n) {
    const auto& A = n.parents[0];
    const auto& B = n.parents[1];
    if (A->requires_grad) A->accumulate(n.grad * B->value.transpose());
    if (B->requires_grad) B->accumulate(A->value.transpose() * n.grad);
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [](detail::Node& n) {
    detail::push(n.parents[0], n.grad);
    detail::push(n.parents[1], n.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [](detail::Node& n) {
    detail::push(n.parents[0], n.grad);
    detail::push(n.parents[1], -n.grad);
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](detail::Node& n) {
    const auto& A = n.parents[0];
    const auto& B = n.parents[1];
    if (A->requires_grad) A->accumulate(n.grad.cwiseProduct(B->value));
    if (B->requires_grad) B->accumulate(n.grad.cwiseProduct(A->value));
  });
}

inline Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](detail::Node& n) {
    detail::push(n.parents[0], n.grad * s);
  });
}

inline Var add_scalar(const Var& a, double s) {
  return make_result((a.value().array() + s).matrix(), {a},
                     [](detail::Node& n) { detail::push(n.parents[0], n.grad); });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

// a (r x c) + broadcast of row vector b (1 x c) over rows.
inline Var add_row(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw std::invalid_argument("add_row: bad shape");
  Matrix out = a.value().rowwise() + b.value().row(0);
  return make_result(std::move(out), {a, b}, [](detail::Node& n) {
    detail::push(n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad.colwise().sum());
  });
}

// a (r x c) scaled elementwise by broadcast row g (1 x c).
inline Var mul_row(const Var& a, const Var& g) {
  if (g.rows() != 1 || g.cols() != a.cols()) throw std::invalid_argument("mul_row: bad shape");
  Matrix out = a.value().array().rowwise() * g.value().row(0).array();
  return make_result(std::move(out), {a, g}, [](detail::Node& n) {
    const auto& A = n.parents[0];
    const auto& G = n.parents[1];
    if (A->requires_grad) {
      A->accumulate((n.grad.array().rowwise() * G->value.row(0).array()).matrix());
    }
    if (G->requires_grad) {
      G->accumulate(n.grad.cwiseProduct(A->value).colwise().sum());
    }
  });
}

inline Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, [](detail::Node& n) {
    detail::push(n.parents[0], n.grad.transpose());
  });
}

// ---- pointwise nonlinearities ----

inline Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {a}, [](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    A->accumulate((A->value.array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

inline Var silu(const Var& a) {
  Matrix sig = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Matrix out = a.value().cwiseProduct(sig);
  return make_result(std::move(out), {a}, [sig = std::move(sig)](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    auto s = sig.array();
    Matrix d = (s * (1.0 + A->value.array() * (1.0 - s))).matrix();
    A->accumulate(d.cwiseProduct(n.grad));
  });
}

inline Var exp(const Var& a) {
  Matrix out = a.value().array().exp().matrix();
  return make_result(out, {a}, [out](detail::Node& n) {
    detail::push(n.parents[0], out.cwiseProduct(n.grad));
  });
}

// ---- row-wise normalizations ----

inline Matrix softmax_rows_value(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

inline Var softmax_rows(const Var& a) {
  Matrix out = softmax_rows_value(a.value());
  return make_result(out, {a}, [out](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Eigen::VectorXd dots = n.grad.cwiseProduct(out).rowwise().sum();
    Matrix g = out.cwiseProduct(n.grad.colwise() - dots);
    A->accumulate(g);
  });
}

inline Var log_softmax_rows(const Var& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = (x.row(r).array() - lse).matrix();
  }
  return make_result(out, {a}, [out](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Matrix p = out.array().exp().matrix();
    Eigen::VectorXd sums = n.grad.rowwise().sum();
    A->accumulate(n.grad - (p.array().colwise() * sums.array()).matrix());
  });
}

// Per-row standardization without affine parameters.
inline Var layer_norm_rows(const Var& a, double eps = 1e-5) {
  const Matrix& x = a.value();
  const Index c = x.cols();
  Matrix xhat(x.rows(), c);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = ((x.row(r).array() - mean) * inv_std(r)).matrix();
  }
  return make_result(xhat, {a}, [xhat, inv_std, c](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Matrix g(xhat.rows(), c);
    for (Index r = 0; r < xhat.rows(); ++r) {
      const auto gy = n.grad.row(r).array();
      const double mean_g = gy.mean();
      const double mean_gx = (gy * xhat.row(r).array()).mean();
      g.row(r) = (inv_std(r) * (gy - mean_g - xhat.row(r).array() * mean_gx)).matrix();
    }
    A->accumulate(g);
  });
}

// ---- reductions ----

inline Var sum_all(const Var& a) {
  const Index r = a.rows(), c = a.cols();
  return make_result(Matrix::Constant(1, 1, a.value().sum()), {a}, [r, c](detail::Node& n) {
    detail::push(n.parents[0], Matrix::Constant(r, c, n.grad(0, 0)));
  });
}

inline Var squared_norm(const Var& a) {
  return make_result(Matrix::Constant(1, 1, a.value().squaredNorm()), {a}, [](detail::Node& n) {
    const auto& A = n.parents[0];
    if (A->requires_grad) A->accumulate(2.0 * n.grad(0, 0) * A->value);
  });
}

// Column sums: (r x c) -> (1 x c).
inline Var sum_rows(const Var& a) {
  const Index r = a.rows();
  return make_result(a.value().colwise().sum(), {a}, [r](detail::Node& n) {
    const auto& A = n.parents[0];
    if (A->requires_grad) A->accumulate(n.grad.replicate(r, 1));
  });
}

// Sums consecutive blocks of `block` rows: (g*block x c) -> (g x c).
inline Var segment_sum_rows(const Var& a, Index block) {
  if (block <= 0 || a.rows() % block != 0) throw std::invalid_argument("segment_sum_rows: bad block");
  const Index groups = a.rows() / block;
  Matrix out = Matrix::Zero(groups, a.cols());
  for (Index g = 0; g < groups; ++g) out.row(g) = a.value().middleRows(g * block, block).colwise().sum();
  return make_result(std::move(out), {a}, [block, groups](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Matrix g(groups * block, n.grad.cols());
    for (Index i = 0; i < groups; ++i) g.middleRows(i * block, block) = n.grad.row(i).replicate(block, 1);
    A->accumulate(g);
  });
}

// Per-column product of pair tables: a and b are (n*n x c) with row i*n + j;
// out[i*n + j, c] = sum_k a[i*n + k, c] * b[k*n + j, c].
inline Var pair_product(const Var& a, const Var& b, Index n) {
  detail::check_same_shape(a, b, "pair_product");
  if (n <= 0 || a.rows() != n * n) throw std::invalid_argument("pair_product: rows must be n*n");
  using Square = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index c = a.cols();
  auto column = [n](const Matrix& m, Index k) {
    Square out(n, n);
    for (Index r = 0; r < n * n; ++r) out.data()[r] = m(r, k);
    return out;
  };
  auto store = [n](Matrix& m, Index k, const Square& v) {
    for (Index r = 0; r < n * n; ++r) m(r, k) = v.data()[r];
  };
  Matrix out(n * n, c);
  for (Index k = 0; k < c; ++k) store(out, k, column(a.value(), k) * column(b.value(), k));
  return make_result(std::move(out), {a, b}, [n, c, column, store](detail::Node& node) {
    const auto& A = node.parents[0];
    const auto& B = node.parents[1];
    Matrix ga(n * n, c), gb(n * n, c);
    for (Index k = 0; k < c; ++k) {
      const Square g = column(node.grad, k);
      if (A->requires_grad) store(ga, k, g * column(B->value, k).transpose());
      if (B->requires_grad) store(gb, k, column(A->value, k).transpose() * g);
    }
    if (A->requires_grad) A->accumulate(ga);
    if (B->requires_grad) B->accumulate(gb);
  });
}

// Softmax over the rows of each consecutive block, independently per column.
inline Var softmax_blocks(const Var& a, Index block) {
  if (block <= 0 || a.rows() % block != 0) throw std::invalid_argument("softmax_blocks: bad block");
  const Index groups = a.rows() / block;
  Matrix out(a.rows(), a.cols());
  for (Index g = 0; g < groups; ++g) {
    auto x = a.value().middleRows(g * block, block);
    Matrix e = (x.rowwise() - x.colwise().maxCoeff()).array().exp().matrix();
    RowVector s = e.colwise().sum();
    out.middleRows(g * block, block) = (e.array().rowwise() / s.array()).matrix();
  }
  return make_result(out, {a}, [out, block, groups](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Matrix g(out.rows(), out.cols());
    for (Index i = 0; i < groups; ++i) {
      auto y = out.middleRows(i * block, block);
      auto gy = n.grad.middleRows(i * block, block);
      RowVector dots = gy.cwiseProduct(y).colwise().sum();
      g.middleRows(i * block, block) = y.cwiseProduct(gy.rowwise() - dots);
    }
    A->accumulate(g);
  });
}

// ---- indexing and reshaping ----

// out.row(k) = a.row(index[k]); backward scatter-adds.
inline Var gather_rows(const Var& a, std::shared_ptr<const std::vector<Index>> index) {
  const auto& idx = *index;
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Index>(k)) = a.value().row(idx[k]);
  const Index src_rows = a.rows();
  return make_result(std::move(out), {a}, [index, src_rows](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Matrix g = Matrix::Zero(src_rows, n.grad.cols());
    const auto& ix = *index;
    for (std::size_t k = 0; k < ix.size(); ++k) g.row(ix[k]) += n.grad.row(static_cast<Index>(k));
    A->accumulate(g);
  });
}

inline Var gather_rows(const Var& a, std::vector<Index> index) {
  return gather_rows(a, std::make_shared<const std::vector<Index>>(std::move(index)));
}

inline Var slice_cols(const Var& a, Index start, Index count) {
  Matrix out = a.value().middleCols(start, count);
  const Index r = a.rows(), c = a.cols();
  return make_result(std::move(out), {a}, [start, count, r, c](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Matrix g = Matrix::Zero(r, c);
    g.middleCols(start, count) = n.grad;
    A->accumulate(g);
  });
}

inline Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index ca = a.cols(), cb = b.cols();
  return make_result(std::move(out), {a, b}, [ca, cb](detail::Node& n) {
    detail::push(n.parents[0], n.grad.leftCols(ca));
    detail::push(n.parents[1], n.grad.rightCols(cb));
  });
}

// Row-major reshape; element order is preserved.
inline Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Index r = a.rows(), c = a.cols();
  return make_result(std::move(out), {a}, [r, c](detail::Node& n) {
    detail::push(n.parents[0], Eigen::Map<const Matrix>(n.grad.data(), r, c));
  });
}

// Replicates a single row `rows` times.
inline Var broadcast_rows(const Var& a, Index rows) {
  if (a.rows() != 1) throw std::invalid_argument("broadcast_rows: expects a row vector");
  return make_result(a.value().replicate(rows, 1), {a}, [](detail::Node& n) {
    detail::push(n.parents[0], n.grad.colwise().sum());
  });
}

// -sum_r a(r, target[r]) over rows with target[r] >= 0.
inline Var negative_pick_sum(const Var& a, std::shared_ptr<const std::vector<int>> target) {
  const auto& t = *target;
  if (static_cast<Index>(t.size()) != a.rows()) throw std::invalid_argument("negative_pick_sum: size");
  double s = 0.0;
  for (Index r = 0; r < a.rows(); ++r) {
    if (t[r] >= 0) s -= a.value()(r, t[r]);
  }
  const Index rows = a.rows(), cols = a.cols();
  return make_result(Matrix::Constant(1, 1, s), {a}, [target, rows, cols](detail::Node& n) {
    const auto& A = n.parents[0];
    if (!A->requires_grad) return;
    Matrix g = Matrix::Zero(rows, cols);
    const auto& tt = *target;
    for (Index r = 0; r < rows; ++r) {
      if (tt[r] >= 0) g(r, tt[r]) = -n.grad(0, 0);
    }
    A->accumulate(g);
  });
}

}  // namespace graphrcg::ad
