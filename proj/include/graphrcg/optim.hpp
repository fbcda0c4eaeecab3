#pragma once
// Adam with decoupled weight decay.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "graphrcg/nn.hpp"

namespace graphrcg::nn {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
 public:
  AdamW() = default;
  AdamW(ParameterStore store, AdamWOptions opts) : store_(std::move(store)), opts_(opts) {
    for (const auto& p : store_.params()) {
      m_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
      v_.push_back(Matrix::Zero(p.var.rows(), p.var.cols()));
    }
  }

  // Applies one update from the accumulated gradients, then clears them.
  void step() {
    ++steps_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(steps_));
    auto& params = store_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      Var var = params[i].var;
      if (!var.has_grad()) continue;
      const Matrix g = var.grad();
      m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
      v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.cwiseProduct(g);
      Matrix& w = var.mutable_value();
      w *= (1.0 - opts_.lr * opts_.weight_decay);
      w.array() -= opts_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opts_.eps);
      var.zero_grad();
    }
  }

  long long steps() const { return steps_; }
  void set_steps(long long s) { steps_ = s; }
  const AdamWOptions& options() const { return opts_; }
  const ParameterStore& store() const { return store_; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  ParameterStore store_;
  AdamWOptions opts_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long steps_ = 0;
};

}  // namespace graphrcg::nn
