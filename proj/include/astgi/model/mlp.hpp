#pragma once

#include <string>

#include "astgi/diffcore/ops.hpp"
#include "astgi/diffcore/params.hpp"

namespace astgi {

/// input -> hidden -> ReLU -> output
template <typename Real>
struct Mlp {
    Tensor<Real> w1, b1, w2, b2;

    static Mlp create(ModelParams<Real>& params, const std::string& prefix, std::size_t in, std::size_t hidden,
                      std::size_t out, Initializer& init) {
        Mlp m;
        m.w1 = params.add(prefix + ".w1", init.glorot<Real>(in, hidden));
        m.b1 = params.add(prefix + ".b1", Tensor<Real>::zeros({hidden}));
        m.w2 = params.add(prefix + ".w2", init.glorot<Real>(hidden, out));
        m.b2 = params.add(prefix + ".b2", Tensor<Real>::zeros({out}));
        return m;
    }

    std::size_t in_dim() const { return w1.shape()[0]; }
    std::size_t hidden_dim() const { return w1.shape()[1]; }
    std::size_t out_dim() const { return w2.shape()[1]; }

    /// x: [n x in_dim] -> [n x out_dim]
    Tensor<Real> operator()(const Tensor<Real>& x) const {
        return add_bias(matmul(relu(add_bias(matmul(x, w1), b1)), w2), b2);
    }
};

}  // namespace astgi
