#pragma once
// Parameter containers and the small set of layers shared by the networks.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graphrcg/autodiff.hpp"
#include "graphrcg/random.hpp"

namespace graphrcg::nn {

using ad::Index;
using ad::Matrix;
using ad::Var;

struct NamedParameter {
  std::string name;
  Var var;
};

// Ordered, named set of trainable leaves. Copies share the same leaves.
class ParameterStore {
 public:
  Var create(const std::string& name, Matrix init) {
    for (const auto& p : params_) {
      if (p.name == name) throw std::logic_error("duplicate parameter " + name);
    }
    Var v(std::move(init), trainable_);
    params_.push_back({name, v});
    return v;
  }

  const std::vector<NamedParameter>& params() const { return params_; }

  const NamedParameter* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }

  void set_trainable(bool flag) {
    trainable_ = flag;
    for (auto& p : params_) p.var.set_requires_grad(flag);
  }
  bool trainable() const { return trainable_; }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.var.value().size());
    return n;
  }

  // FNV-1a over names and raw value bytes; identical iff bit-identical.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t len) {
      const auto* b = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& p : params_) {
      mix(p.name.data(), p.name.size());
      mix(p.var.value().data(), sizeof(double) * static_cast<std::size_t>(p.var.value().size()));
    }
    return h;
  }

 private:
  std::vector<NamedParameter> params_;
  bool trainable_ = true;
};

inline Matrix xavier_uniform(Index fan_in, Index fan_out, Engine& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * a;
  return w;
}

// y = x W + b, W stored (in x out).
struct Linear {
  Var weight;
  Var bias;

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Index in, Index out, Engine& rng,
         bool zero_init = false)
      : weight(store.create(name + ".weight",
                            zero_init ? Matrix(Matrix::Zero(in, out)) : xavier_uniform(in, out, rng))),
        bias(store.create(name + ".bias", Matrix::Zero(1, out))) {}

  Var operator()(const Var& x) const { return ad::add_row(ad::matmul(x, weight), bias); }
  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }
};

// Row-wise layer normalization with learned gain and shift.
struct LayerNorm {
  Var gain;
  Var shift;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, Index dim)
      : gain(store.create(name + ".gain", Matrix::Ones(1, dim))),
        shift(store.create(name + ".shift", Matrix::Zero(1, dim))) {}

  Var operator()(const Var& x) const {
    return ad::add_row(ad::mul_row(ad::layer_norm_rows(x), gain), shift);
  }
};

// Two-layer perceptron with SiLU.
struct Mlp {
  Linear first;
  Linear second;

  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, Index in, Index hidden, Index out, Engine& rng,
      bool zero_last = false)
      : first(store, name + ".0", in, hidden, rng), second(store, name + ".1", hidden, out, rng, zero_last) {}

  Var operator()(const Var& x) const { return second(ad::silu(first(x))); }
};

// Sinusoidal embedding of integer timesteps, one row per entry of `steps`.
inline Matrix timestep_embedding(const std::vector<int>& steps, Index dim) {
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("timestep embedding dim must be even and >= 2");
  const Index half = dim / 2;
  Matrix out(static_cast<Index>(steps.size()), dim);
  for (std::size_t r = 0; r < steps.size(); ++r) {
    for (Index k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
      const double arg = static_cast<double>(steps[r]) * freq;
      out(static_cast<Index>(r), k) = std::cos(arg);
      out(static_cast<Index>(r), half + k) = std::sin(arg);
    }
  }
  return out;
}

}  // namespace graphrcg::nn
