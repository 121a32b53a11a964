#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "astgi/diffcore/params.hpp"
#include "astgi/errors.hpp"

namespace astgi {

struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// AdamW with decoupled weight decay: the decay shrinks the parameter
/// directly and never enters the moment estimates.
template <typename Real>
class AdamW {
public:
    AdamW(const ModelParams<Real>& params, AdamWHyper hyper) : hyper_(hyper) {
        for (const auto& g : params) {
            m_.emplace_back(g.tensor.size(), Real(0));
            v_.emplace_back(g.tensor.size(), Real(0));
        }
    }

    const AdamWHyper& hyper() const { return hyper_; }
    std::uint64_t step_count() const { return step_; }
    const std::vector<Real>& first_moment(std::size_t i) const { return m_[i]; }
    const std::vector<Real>& second_moment(std::size_t i) const { return v_[i]; }

    void step(ModelParams<Real>& params) {
        if (params.size() != m_.size()) throw ContractError("adamw: parameter set changed since construction");
        for (const auto& g : params) {
            if (!g.tensor.has_grad() && g.tensor.size() != 0) {
                throw ContractError("adamw: missing gradient for parameter '" + g.name + "'");
            }
        }
        ++step_;
        const double t = static_cast<double>(step_);
        const Real bc1 = static_cast<Real>(1.0 - std::pow(hyper_.beta1, t));
        const Real bc2 = static_cast<Real>(1.0 - std::pow(hyper_.beta2, t));
        const Real lr = static_cast<Real>(hyper_.lr);
        const Real b1 = static_cast<Real>(hyper_.beta1);
        const Real b2 = static_cast<Real>(hyper_.beta2);
        const Real eps = static_cast<Real>(hyper_.eps);
        const Real decay = Real(1) - static_cast<Real>(hyper_.lr * hyper_.weight_decay);

        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<Real> t_param = params[i].tensor;
            auto p = t_param.mutable_values();
            auto grad = t_param.grad();
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                const Real g = grad[k];
                p[k] *= decay;
                m[k] = b1 * m[k] + (Real(1) - b1) * g;
                v[k] = b2 * v[k] + (Real(1) - b2) * g * g;
                const Real m_hat = m[k] / bc1;
                const Real v_hat = v[k] / bc2;
                // m_hat == 0 implies v_hat == 0; skip to keep eps = 0 well defined.
                if (m_hat != Real(0)) p[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
        }
    }

private:
    AdamWHyper hyper_;
    std::vector<std::vector<Real>> m_;
    std::vector<std::vector<Real>> v_;
    std::uint64_t step_ = 0;
};

}  // namespace astgi
