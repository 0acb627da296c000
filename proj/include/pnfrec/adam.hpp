#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pnfrec/errors.hpp"
#include "pnfrec/tensor.hpp"

namespace pnfrec {

template <typename Real>
struct AdamConfig {
  Real lr = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
};

// Adam with bias correction. Moments mirror the parameter list handed to
// the constructor; the step counter advances by exactly one per update.
template <typename Real>
class AdamState {
 public:
  AdamState(const std::vector<const Tensor<Real>*>& params, AdamConfig<Real> cfg = {})
      : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor<Real>* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }

  std::int64_t step_count() const { return step_; }
  const AdamConfig<Real>& config() const { return cfg_; }
  const Tensor<Real>& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor<Real>& second_moment(std::size_t i) const { return v_[i]; }

  void step(std::span<Tensor<Real>* const> params,
            std::span<const Tensor<Real>* const> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw DimensionError("adam_step: parameter list size changed");
    }
    ++step_;
    const Real bc1 = Real(1) - std::pow(cfg_.beta1, Real(step_));
    const Real bc2 = Real(1) - std::pow(cfg_.beta2, Real(step_));
    for (std::size_t t = 0; t < params.size(); ++t) {
      Tensor<Real>& p = *params[t];
      const Tensor<Real>& g = *grads[t];
      if (!p.same_shape(m_[t]) || !g.same_shape(m_[t])) {
        throw DimensionError("adam_step: shape mismatch at parameter " + std::to_string(t) +
                             ": " + shape_to_string(p.shape()) + " vs " +
                             shape_to_string(g.shape()) + " vs state " +
                             shape_to_string(m_[t].shape()));
      }
      Real* mp = m_[t].data();
      Real* vp = v_[t].data();
      Real* pp = p.data();
      const Real* gp = g.data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        mp[i] = cfg_.beta1 * mp[i] + (Real(1) - cfg_.beta1) * gp[i];
        vp[i] = cfg_.beta2 * vp[i] + (Real(1) - cfg_.beta2) * gp[i] * gp[i];
        const Real mhat = mp[i] / bc1;
        const Real vhat = vp[i] / bc2;
        pp[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig<Real> cfg_;
  std::int64_t step_ = 0;
  std::vector<Tensor<Real>> m_, v_;
};

template <typename Real>
void adam_step(std::span<Tensor<Real>* const> params,
               std::span<const Tensor<Real>* const> grads, AdamState<Real>& state) {
  state.step(params, grads);
}

}  // namespace pnfrec
