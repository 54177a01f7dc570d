#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adasti/autograd.hpp"

namespace adasti {

/// Named, ordered collection of trainable tensors. Registration order is the
/// serialization order.
class ParamStore {
public:
    Index add(const std::string& name, Tensor init);

    Index size() const { return static_cast<Index>(values_.size()); }
    const std::string& name(Index id) const { return names_.at(static_cast<std::size_t>(id)); }
    Tensor& value(Index id) { return values_.at(static_cast<std::size_t>(id)); }
    const Tensor& value(Index id) const { return values_.at(static_cast<std::size_t>(id)); }
    std::optional<Index> find(const std::string& name) const;
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Tensor>& values() const { return values_; }
    Index scalar_count() const;

    /// Ids whose names start with `prefix`.
    std::vector<Index> group(const std::string& prefix) const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::map<std::string, Index> index_;
};

/// Binds parameters to graph leaves for one forward pass and collects their gradients.
class Context {
public:
    Context(const ParamStore& store, bool track_grads) : store_(&store), track_(track_grads) {
        leaves_.resize(static_cast<std::size_t>(store.size()));
    }

    ad::Var param(Index id);
    bool tracking() const { return track_; }
    const ParamStore& store() const { return *store_; }

    /// One tensor per parameter; zeros for parameters the graph never touched.
    std::vector<Tensor> gradients() const;

private:
    const ParamStore* store_;
    bool track_;
    std::vector<ad::Var> leaves_;
};

/// Sum `src` into `dst` (same layout as ParamStore).
void accumulate_grads(std::vector<Tensor>& dst, const std::vector<Tensor>& src);
double grad_norm(const std::vector<Tensor>& grads);

/// Adaptive-moment optimizer state over a ParamStore.
class Adam {
public:
    explicit Adam(const ParamStore& store, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(ParamStore& store, const std::vector<Tensor>& grads, double lr);

    Index steps() const { return t_; }
    std::vector<Tensor>& first_moment() { return m_; }
    std::vector<Tensor>& second_moment() { return v_; }
    const std::vector<Tensor>& first_moment() const { return m_; }
    const std::vector<Tensor>& second_moment() const { return v_; }
    void set_steps(Index t) { t_ = t; }

private:
    double beta1_, beta2_, eps_;
    Index t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace adasti
