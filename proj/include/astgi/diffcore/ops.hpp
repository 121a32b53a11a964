#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "astgi/diffcore/tensor.hpp"
#include "astgi/errors.hpp"

// Differentiable operations. Every reduction accumulates in ascending index
// order so identical inputs give bit-identical outputs and gradients.

namespace astgi {

namespace detail {

template <typename Real, typename Fn>
Tensor<Real> record(Shape shape, std::vector<Real> values, std::span<const Tensor<Real>> inputs,
                    Fn&& fn) {
    Tensor<Real> out(std::move(shape), std::move(values));
    if (!grad_enabled()) return out;
    const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor<Real>& t) { return t.requires_grad(); });
    if (!needs) return out;
    Node<Real>* node = out.node();
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (const auto& t : inputs) node->parents.push_back(t.node_ptr());
    node->backward_fn = std::forward<Fn>(fn);
    return out;
}

template <typename Real, typename Fn>
Tensor<Real> record(Shape shape, std::vector<Real> values,
                    std::initializer_list<Tensor<Real>> inputs, Fn&& fn) {
    return record<Real>(std::move(shape), std::move(values),
                        std::span<const Tensor<Real>>(inputs.begin(), inputs.size()),
                        std::forward<Fn>(fn));
}

inline void check_same_shape(const char* op, const Shape& a, const Shape& b) {
    if (a != b) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                             shape_string(b));
    }
}

inline void check_offsets(const char* op, std::span<const std::size_t> offsets, std::size_t total) {
    if (offsets.empty() || offsets.front() != 0 || offsets.back() != total) {
        throw DimensionError(std::string(op) + ": segment offsets must run from 0 to " +
                             std::to_string(total));
    }
    for (std::size_t s = 1; s < offsets.size(); ++s) {
        if (offsets[s] < offsets[s - 1]) {
            throw DimensionError(std::string(op) + ": segment offsets must be non-decreasing");
        }
    }
}

}  // namespace detail

/// [n x k] . [k x m] -> [n x m]
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.dim() != 2 || b.dim() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " +
                             shape_string(b.shape()));
    }
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    std::vector<Real> out(n * m, Real(0));
    const Real* A = a.values().data();
    const Real* B = b.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        Real* o = out.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const Real aip = A[i * k + p];
            const Real* brow = B + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += aip * brow[j];
        }
    }
    Node<Real>* an = a.node();
    Node<Real>* bn = b.node();
    return detail::record<Real>(Shape{n, m}, std::move(out), {a, b}, [an, bn, n, k, m](Node<Real>& self) {
        const Real* G = self.grad.data();
        if (an->requires_grad) {
            const Real* B = bn->value.data();
            Real* GA = an->grad.data();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    Real acc = 0;
                    for (std::size_t j = 0; j < m; ++j) acc += G[i * m + j] * B[p * m + j];
                    GA[i * k + p] += acc;
                }
            }
        }
        if (bn->requires_grad) {
            const Real* A = an->value.data();
            Real* GB = bn->grad.data();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const Real aip = A[i * k + p];
                    for (std::size_t j = 0; j < m; ++j) GB[p * m + j] += aip * G[i * m + j];
                }
            }
        }
    });
}

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::check_same_shape("add", a.shape(), b.shape());
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    Node<Real>* an = a.node();
    Node<Real>* bn = b.node();
    return detail::record<Real>(a.shape(), std::move(out), {a, b}, [an, bn](Node<Real>& self) {
        for (Node<Real>* p : {an, bn}) {
            if (!p->requires_grad) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
    });
}

template <typename Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    detail::check_same_shape("sub", a.shape(), b.shape());
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    Node<Real>* an = a.node();
    Node<Real>* bn = b.node();
    return detail::record<Real>(a.shape(), std::move(out), {a, b}, [an, bn](Node<Real>& self) {
        if (an->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor) {
    std::vector<Real> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
    Node<Real>* an = a.node();
    return detail::record<Real>(a.shape(), std::move(out), {a}, [an, factor](Node<Real>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * factor;
    });
}

/// Adds a length-m bias to every row of an [n x m] (or [m]) tensor.
template <typename Real>
Tensor<Real> add_bias(const Tensor<Real>& x, const Tensor<Real>& bias) {
    const std::size_t m = x.cols();
    if (bias.size() != m || x.dim() == 0) {
        throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match rows of " +
                             shape_string(x.shape()));
    }
    const std::size_t n = x.size() / m;
    std::vector<Real> out(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bias[j];
    Node<Real>* xn = x.node();
    Node<Real>* bn = bias.node();
    return detail::record<Real>(x.shape(), std::move(out), {x, bias}, [xn, bn, n, m](Node<Real>& self) {
        if (xn->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) bn->grad[j] += self.grad[i * m + j];
        }
    });
}

/// Elementwise max(x, 0); the subgradient at 0 is 0.
template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) {
    std::vector<Real> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > Real(0) ? x[i] : Real(0);
    Node<Real>* xn = x.node();
    return detail::record<Real>(x.shape(), std::move(out), {x}, [xn](Node<Real>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (xn->value[i] > Real(0)) xn->grad[i] += self.grad[i];
    });
}

/// Concatenates along `axis`; every other extent must agree.
template <typename Real>
Tensor<Real> concat(std::span<const Tensor<Real>> parts, std::size_t axis = 0) {
    if (parts.empty()) throw DimensionError("concat: no parts");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) {
        throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                             shape_string(first));
    }
    if (parts.size() == 1) return parts.front();

    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d)
            if (d != axis && s[d] != first[d]) ok = false;
        if (!ok) {
            throw DimensionError("concat: incompatible extents " + shape_string(first) + " and " +
                                 shape_string(s) + " along axis " + std::to_string(axis));
        }
        out_shape[axis] += s[axis];
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
    for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
    const std::size_t out_stride = out_shape[axis] * inner;

    std::vector<Real> out(shape_size(out_shape));
    std::vector<std::pair<Node<Real>*, std::size_t>> slots;  // node, width along axis * inner
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t width = p.shape()[axis] * inner;
        const Real* src = p.values().data();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(src + o * width, width, out.data() + o * out_stride + offset);
        slots.emplace_back(p.node(), width);
        offset += width;
    }
    return detail::record<Real>(std::move(out_shape), std::move(out), parts,
                                [slots = std::move(slots), outer, out_stride](Node<Real>& self) {
                                    std::size_t offset = 0;
                                    for (const auto& [pn, width] : slots) {
                                        if (pn->requires_grad) {
                                            for (std::size_t o = 0; o < outer; ++o) {
                                                const Real* g = self.grad.data() + o * out_stride + offset;
                                                Real* dst = pn->grad.data() + o * width;
                                                for (std::size_t i = 0; i < width; ++i) dst[i] += g[i];
                                            }
                                        }
                                        offset += width;
                                    }
                                });
}

template <typename Real>
Tensor<Real> concat(std::initializer_list<Tensor<Real>> parts, std::size_t axis = 0) {
    return concat<Real>(std::span<const Tensor<Real>>(parts.begin(), parts.size()), axis);
}

/// Row gather: out[r] = x[indices[r]]. Works on [n x d] (rows) and [n] (elements).
template <typename Real>
Tensor<Real> gather_rows(const Tensor<Real>& x, std::span<const std::size_t> indices) {
    if (x.dim() != 1 && x.dim() != 2) throw DimensionError("gather_rows: expected 1-D or 2-D, got " + shape_string(x.shape()));
    const std::size_t n = x.shape()[0];
    const std::size_t d = x.dim() == 2 ? x.shape()[1] : 1;
    for (std::size_t idx : indices) {
        if (idx >= n) {
            throw DimensionError("gather_rows: index " + std::to_string(idx) + " out of range for " +
                                 shape_string(x.shape()));
        }
    }
    const std::size_t m = indices.size();
    std::vector<Real> out(m * d);
    for (std::size_t r = 0; r < m; ++r)
        std::copy_n(x.values().data() + indices[r] * d, d, out.data() + r * d);
    Shape shape = x.dim() == 2 ? Shape{m, d} : Shape{m};
    Node<Real>* xn = x.node();
    return detail::record<Real>(std::move(shape), std::move(out), {x},
                                [xn, idx = std::vector<std::size_t>(indices.begin(), indices.end()), d](Node<Real>& self) {
                                    for (std::size_t r = 0; r < idx.size(); ++r) {
                                        const Real* g = self.grad.data() + r * d;
                                        Real* dst = xn->grad.data() + idx[r] * d;
                                        for (std::size_t c = 0; c < d; ++c) dst[c] += g[c];
                                    }
                                });
}

template <typename Real>
Tensor<Real> reshape(const Tensor<Real>& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
    }
    std::vector<Real> out(x.values().begin(), x.values().end());
    Node<Real>* xn = x.node();
    return detail::record<Real>(std::move(shape), std::move(out), {x}, [xn](Node<Real>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    });
}

namespace detail {

template <typename Real>
void softmax_forward(const Real* s, Real* p, std::size_t n) {
    Real mx = s[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, s[i]);
    Real total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp(s[i] - mx);
        total += p[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] /= total;
}

// ds = p * (g - <g, p>)
template <typename Real>
void softmax_backward(const Real* p, const Real* g, Real* ds, std::size_t n) {
    Real dot = 0;
    for (std::size_t i = 0; i < n; ++i) dot += g[i] * p[i];
    for (std::size_t i = 0; i < n; ++i) ds[i] += p[i] * (g[i] - dot);
}

}  // namespace detail

/// Max-subtracted softmax over a 1-D score vector.
template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& scores) {
    if (scores.dim() > 1) throw DimensionError("softmax: expected a 1-D tensor, got " + shape_string(scores.shape()));
    const std::size_t n = scores.size();
    if (n == 0) throw EmptyNeighborhoodError("softmax over an empty score set");
    std::vector<Real> out(n);
    detail::softmax_forward(scores.values().data(), out.data(), n);
    Node<Real>* sn = scores.node();
    return detail::record<Real>(scores.shape(), std::move(out), {scores}, [sn, n](Node<Real>& self) {
        detail::softmax_backward(self.value.data(), self.grad.data(), sn->grad.data(), n);
    });
}

/// Independent softmax over each segment [offsets[s], offsets[s+1]) of a 1-D
/// score vector. Empty segments are allowed and produce nothing.
template <typename Real>
Tensor<Real> segment_softmax(const Tensor<Real>& scores, std::span<const std::size_t> offsets) {
    if (scores.dim() != 1) throw DimensionError("segment_softmax: expected a 1-D tensor, got " + shape_string(scores.shape()));
    detail::check_offsets("segment_softmax", offsets, scores.size());
    std::vector<Real> out(scores.size());
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        const std::size_t lo = offsets[s], len = offsets[s + 1] - lo;
        if (len) detail::softmax_forward(scores.values().data() + lo, out.data() + lo, len);
    }
    Node<Real>* sn = scores.node();
    return detail::record<Real>(scores.shape(), std::move(out), {scores},
                                [sn, off = std::vector<std::size_t>(offsets.begin(), offsets.end())](Node<Real>& self) {
                                    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                                        const std::size_t lo = off[s], len = off[s + 1] - lo;
                                        if (len) {
                                            detail::softmax_backward(self.value.data() + lo, self.grad.data() + lo,
                                                                     sn->grad.data() + lo, len);
                                        }
                                    }
                                });
}

/// out[s] = sum over e in segment s of weights[e] * values[e]; an empty
/// segment yields a zero row.
template <typename Real>
Tensor<Real> segment_weighted_sum(const Tensor<Real>& weights, const Tensor<Real>& values,
                                  std::span<const std::size_t> offsets) {
    if (weights.dim() != 1 || values.dim() != 2 || values.shape()[0] != weights.size()) {
        throw DimensionError("segment_weighted_sum: weights " + shape_string(weights.shape()) +
                             " do not match values " + shape_string(values.shape()));
    }
    detail::check_offsets("segment_weighted_sum", offsets, weights.size());
    const std::size_t segments = offsets.size() - 1;
    const std::size_t d = values.shape()[1];
    std::vector<Real> out(segments * d, Real(0));
    const Real* W = weights.values().data();
    const Real* V = values.values().data();
    for (std::size_t s = 0; s < segments; ++s) {
        Real* o = out.data() + s * d;
        for (std::size_t e = offsets[s]; e < offsets[s + 1]; ++e)
            for (std::size_t c = 0; c < d; ++c) o[c] += W[e] * V[e * d + c];
    }
    Node<Real>* wn = weights.node();
    Node<Real>* vn = values.node();
    return detail::record<Real>(Shape{segments, d}, std::move(out), {weights, values},
                                [wn, vn, d, off = std::vector<std::size_t>(offsets.begin(), offsets.end())](Node<Real>& self) {
                                    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                                        const Real* g = self.grad.data() + s * d;
                                        for (std::size_t e = off[s]; e < off[s + 1]; ++e) {
                                            if (wn->requires_grad) {
                                                Real acc = 0;
                                                for (std::size_t c = 0; c < d; ++c) acc += g[c] * vn->value[e * d + c];
                                                wn->grad[e] += acc;
                                            }
                                            if (vn->requires_grad) {
                                                const Real w = wn->value[e];
                                                for (std::size_t c = 0; c < d; ++c) vn->grad[e * d + c] += w * g[c];
                                            }
                                        }
                                    }
                                });
}

/// Row-wise layer normalization with biased variance:
/// y = (x - mean) / sqrt(var + eps) * gain + bias.
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain, const Tensor<Real>& bias, Real eps) {
    const std::size_t d = x.cols();
    if (x.dim() == 0 || d == 0 || gain.size() != d || bias.size() != d) {
        throw DimensionError("layer_norm: input " + shape_string(x.shape()) + " with gain " +
                             shape_string(gain.shape()) + " and bias " + shape_string(bias.shape()));
    }
    const std::size_t n = x.size() / d;
    std::vector<Real> out(x.size());
    std::vector<Real> xhat(x.size());
    std::vector<Real> rstd(n);
    const Real* X = x.values().data();
    for (std::size_t r = 0; r < n; ++r) {
        const Real* row = X + r * d;
        Real mean = 0;
        for (std::size_t c = 0; c < d; ++c) mean += row[c];
        mean /= Real(d);
        Real var = 0;
        for (std::size_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= Real(d);
        rstd[r] = Real(1) / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            xhat[r * d + c] = (row[c] - mean) * rstd[r];
            out[r * d + c] = xhat[r * d + c] * gain[c] + bias[c];
        }
    }
    Node<Real>* xn = x.node();
    Node<Real>* gn = gain.node();
    Node<Real>* bn = bias.node();
    return detail::record<Real>(x.shape(), std::move(out), {x, gain, bias},
                                [xn, gn, bn, n, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node<Real>& self) {
                                    std::vector<Real> dxhat(d);
                                    for (std::size_t r = 0; r < n; ++r) {
                                        const Real* g = self.grad.data() + r * d;
                                        const Real* xh = xhat.data() + r * d;
                                        if (gn->requires_grad)
                                            for (std::size_t c = 0; c < d; ++c) gn->grad[c] += g[c] * xh[c];
                                        if (bn->requires_grad)
                                            for (std::size_t c = 0; c < d; ++c) bn->grad[c] += g[c];
                                        if (!xn->requires_grad) continue;
                                        Real mean_dxhat = 0, mean_dxhat_xhat = 0;
                                        for (std::size_t c = 0; c < d; ++c) {
                                            dxhat[c] = g[c] * gn->value[c];
                                            mean_dxhat += dxhat[c];
                                            mean_dxhat_xhat += dxhat[c] * xh[c];
                                        }
                                        mean_dxhat /= Real(d);
                                        mean_dxhat_xhat /= Real(d);
                                        Real* dx = xn->grad.data() + r * d;
                                        for (std::size_t c = 0; c < d; ++c)
                                            dx[c] += rstd[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
                                    }
                                });
}

/// (1/n) * sum (pred - target)^2 as a scalar.
template <typename Real>
Tensor<Real> mse(const Tensor<Real>& pred, const Tensor<Real>& target) {
    if (pred.size() != target.size()) {
        throw DimensionError("mse: prediction " + shape_string(pred.shape()) + " vs target " +
                             shape_string(target.shape()));
    }
    const std::size_t n = pred.size();
    if (n == 0) throw EmptyQueryError("mse over an empty query set");
    Real total = 0;
    for (std::size_t i = 0; i < n; ++i) total += (pred[i] - target[i]) * (pred[i] - target[i]);
    Node<Real>* pn = pred.node();
    Node<Real>* tn = target.node();
    return detail::record<Real>(Shape{}, std::vector<Real>{total / Real(n)}, {pred, target},
                                [pn, tn, n](Node<Real>& self) {
                                    const Real g = self.grad[0] * Real(2) / Real(n);
                                    for (std::size_t i = 0; i < n; ++i) {
                                        const Real diff = pn->value[i] - tn->value[i];
                                        if (pn->requires_grad) pn->grad[i] += g * diff;
                                        if (tn->requires_grad) tn->grad[i] -= g * diff;
                                    }
                                });
}

/// Mean of a list of scalar tensors.
template <typename Real>
Tensor<Real> mean_of(std::span<const Tensor<Real>> scalars) {
    if (scalars.empty()) throw ContractError("mean_of: empty list");
    Real total = 0;
    for (const auto& s : scalars) {
        if (s.size() != 1) throw DimensionError("mean_of: expected scalars, got " + shape_string(s.shape()));
        total += s.item();
    }
    const Real inv = Real(1) / Real(scalars.size());
    std::vector<Node<Real>*> nodes;
    for (const auto& s : scalars) nodes.push_back(s.node());
    return detail::record<Real>(Shape{}, std::vector<Real>{total * inv}, scalars,
                                [nodes = std::move(nodes), inv](Node<Real>& self) {
                                    for (Node<Real>* p : nodes)
                                        if (p->requires_grad) p->grad[0] += self.grad[0] * inv;
                                });
}

/// sum_i x[i] * w[i] as a scalar.
template <typename Real>
Tensor<Real> sum_product(const Tensor<Real>& x, const Tensor<Real>& w) {
    if (x.size() != w.size()) {
        throw DimensionError("sum_product: " + shape_string(x.shape()) + " vs " + shape_string(w.shape()));
    }
    Real total = 0;
    for (std::size_t i = 0; i < x.size(); ++i) total += x[i] * w[i];
    Node<Real>* xn = x.node();
    Node<Real>* wn = w.node();
    return detail::record<Real>(Shape{}, std::vector<Real>{total}, {x, w}, [xn, wn](Node<Real>& self) {
        const Real g = self.grad[0];
        for (std::size_t i = 0; i < xn->value.size(); ++i) {
            if (xn->requires_grad) xn->grad[i] += g * wn->value[i];
            if (wn->requires_grad) wn->grad[i] += g * xn->value[i];
        }
    });
}

}  // namespace astgi
