#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "imix/error.hpp"
#include "imix/nn.hpp"
#include "imix/tensor.hpp"

namespace imix {

// Adam with the standard moment defaults; the learning rate is the only
// externally tuned knob. A zero gradient leaves a parameter unchanged.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (!(lr > 0.0)) throw ConfigError("adam: lr must be > 0");
    }

    // grads[i] pairs with store.value(i); an empty tensor means zero.
    void step(ParamStore& store, const std::vector<Tensor>& grads) {
        if (grads.size() != store.count()) throw ContractError("adam: gradient count mismatch");
        if (m_.empty()) {
            m_.resize(store.count());
            v_.resize(store.count());
            for (std::size_t i = 0; i < store.count(); ++i) {
                m_[i] = Tensor(store.value(i).rows(), store.value(i).cols(), 0.0);
                v_[i] = m_[i];
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < store.count(); ++i) {
            if (grads[i].empty()) continue;
            Tensor& p = store.value(i);
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double g = grads[i][k];
                m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
                v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i][k] / bc1;
                const double vhat = v_[i][k] / bc2;
                p[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace imix
