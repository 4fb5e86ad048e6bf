#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "asymgraph/common.hpp"
#include "asymgraph/features.hpp"

namespace asymgraph {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a list of dense parameter matrices.
template <typename Scalar = double>
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, const std::vector<RowMatrix<Scalar>>& shapes) : cfg_(cfg) {
    for (const auto& p : shapes) {
      m_.push_back(RowMatrix<Scalar>::Zero(p.rows(), p.cols()));
      v_.push_back(RowMatrix<Scalar>::Zero(p.rows(), p.cols()));
    }
  }

  void step(std::vector<RowMatrix<Scalar>>& params, const std::vector<RowMatrix<Scalar>>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw UsageError("adam: parameter/gradient count mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(cfg_.beta1);
    const auto b2 = static_cast<Scalar>(cfg_.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = m_[i];
      auto& v = v_[i];
      const auto& g = grads[i];
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      auto* p = params[i].data();
      for (Eigen::Index k = 0; k < m.size(); ++k) {
        const double m_hat = static_cast<double>(m.data()[k]) / c1;
        const double v_hat = static_cast<double>(v.data()[k]) / c2;
        p[k] -= static_cast<Scalar>(cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<RowMatrix<Scalar>>& first_moments() const { return m_; }
  const std::vector<RowMatrix<Scalar>>& second_moments() const { return v_; }

  void restore(std::vector<RowMatrix<Scalar>> m, std::vector<RowMatrix<Scalar>> v, std::uint64_t steps) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw DataError("adam: restored state has wrong layer count");
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i].rows() != m_[i].rows() || m[i].cols() != m_[i].cols() || v[i].rows() != v_[i].rows() ||
          v[i].cols() != v_[i].cols())
        throw DataError("adam: restored moment shape mismatch");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = steps;
  }

 private:
  AdamConfig cfg_;
  std::vector<RowMatrix<Scalar>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace asymgraph
