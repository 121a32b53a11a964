#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "astgi/diffcore/tensor.hpp"
#include "astgi/errors.hpp"

namespace astgi {

template <typename Real>
struct ParamGroup {
    std::string name;
    Tensor<Real> tensor;
};

/// Ordered collection of named learnable tensors. Registration order is the
/// iteration order, so a fixed configuration always yields the same layout.
template <typename Real>
class ModelParams {
public:
    Tensor<Real> add(const std::string& name, Tensor<Real> tensor) {
        if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
        index_.emplace(name, groups_.size());
        tensor.node()->requires_grad = true;
        groups_.push_back({name, tensor});
        return tensor;
    }

    std::size_t size() const { return groups_.size(); }
    bool empty() const { return groups_.empty(); }
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const ParamGroup<Real>& operator[](std::size_t i) const { return groups_[i]; }
    const Tensor<Real>& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
        return groups_[it->second].tensor;
    }

    auto begin() const { return groups_.begin(); }
    auto end() const { return groups_.end(); }

    std::size_t element_count() const {
        std::size_t n = 0;
        for (const auto& g : groups_) n += g.tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& g : groups_) g.tensor.zero_grad();
    }

    /// Flat value copy in registration order.
    std::vector<std::vector<Real>> snapshot() const {
        std::vector<std::vector<Real>> out;
        out.reserve(groups_.size());
        for (const auto& g : groups_) out.emplace_back(g.tensor.values().begin(), g.tensor.values().end());
        return out;
    }

    void restore(const std::vector<std::vector<Real>>& values) {
        if (values.size() != groups_.size()) throw ContractError("restore: parameter count mismatch");
        for (std::size_t i = 0; i < groups_.size(); ++i) {
            auto dst = groups_[i].tensor.mutable_values();
            if (values[i].size() != dst.size()) {
                throw DimensionError("restore: size mismatch for '" + groups_[i].name + "'");
            }
            std::copy(values[i].begin(), values[i].end(), dst.begin());
        }
    }

private:
    std::vector<ParamGroup<Real>> groups_;
    std::map<std::string, std::size_t> index_;
};

/// Seeded source for parameter initialization.
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    /// Uniform in +-sqrt(6 / (fan_in + fan_out)).
    template <typename Real>
    Tensor<Real> glorot(std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<Real> v(fan_in * fan_out);
        for (auto& x : v) x = static_cast<Real>(dist(rng_));
        return Tensor<Real>::matrix(fan_in, fan_out, std::move(v));
    }

    template <typename Real>
    Tensor<Real> normal(std::size_t rows, std::size_t cols, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        std::vector<Real> v(rows * cols);
        for (auto& x : v) x = static_cast<Real>(dist(rng_));
        return Tensor<Real>::matrix(rows, cols, std::move(v));
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace astgi
