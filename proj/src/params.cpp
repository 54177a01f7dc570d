#include "adasti/params.hpp"

#include <cmath>

namespace adasti {

Index ParamStore::add(const std::string& name, Tensor init) {
    require(!index_.contains(name), "ParamStore: duplicate parameter '" + name + "'");
    const auto id = static_cast<Index>(values_.size());
    names_.push_back(name);
    values_.push_back(std::move(init));
    index_.emplace(name, id);
    return id;
}

std::optional<Index> ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Index ParamStore::scalar_count() const {
    Index n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

std::vector<Index> ParamStore::group(const std::string& prefix) const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i)
        if (names_[static_cast<std::size_t>(i)].starts_with(prefix)) out.push_back(i);
    return out;
}

ad::Var Context::param(Index id) {
    auto& leaf = leaves_.at(static_cast<std::size_t>(id));
    if (!leaf.defined()) leaf = ad::Var::leaf(store_->value(id), track_);
    return leaf;
}

std::vector<Tensor> Context::gradients() const {
    std::vector<Tensor> out;
    out.reserve(leaves_.size());
    for (Index i = 0; i < store_->size(); ++i) {
        const auto& leaf = leaves_[static_cast<std::size_t>(i)];
        if (leaf.defined() && !leaf.grad().empty())
            out.push_back(leaf.grad());
        else
            out.emplace_back(store_->value(i).shape());
    }
    return out;
}

void accumulate_grads(std::vector<Tensor>& dst, const std::vector<Tensor>& src) {
    if (dst.empty()) {
        dst = src;
        return;
    }
    require(dst.size() == src.size(), "accumulate_grads: layout mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i].add_(src[i]);
}

double grad_norm(const std::vector<Tensor>& grads) {
    double acc = 0.0;
    for (const auto& g : grads)
        for (double v : g.vec()) acc += v * v;
    return std::sqrt(acc);
}

Adam::Adam(const ParamStore& store, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& v : store.values()) {
        m_.emplace_back(v.shape());
        v_.emplace_back(v.shape());
    }
}

void Adam::step(ParamStore& store, const std::vector<Tensor>& grads, double lr) {
    require(static_cast<Index>(grads.size()) == store.size(), "Adam: gradient layout mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Index p = 0; p < store.size(); ++p) {
        auto& w = store.value(p);
        auto& m = m_[static_cast<std::size_t>(p)];
        auto& v = v_[static_cast<std::size_t>(p)];
        const auto& g = grads[static_cast<std::size_t>(p)];
        for (Index i = 0; i < w.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

}  // namespace adasti
