#include "adasti/autograd.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

namespace adasti::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStrided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

void check_same(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

template <class F>
Var unary(const Var& a, F f, std::function<Tensor(const Tensor& x, const Tensor& y, const Tensor& g)> df) {
    Tensor out(a.shape());
    const auto& x = a.value();
    for (Index i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    Node* pa = a.node().get();
    Tensor y = out;
    return make_result(std::move(out), {a}, [pa, y = std::move(y), df](const Tensor& g) {
        if (pa->requires_grad) pa->accumulate(df(pa->value, y, g));
    });
}

// Splits `s` around `axis` into (outer, extent, inner).
struct AxisSplit {
    Index outer, extent, inner;
};
AxisSplit split_at(const Shape& s, Index axis) {
    AxisSplit r{1, s.at(static_cast<std::size_t>(axis)), 1};
    for (Index i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
    for (Index i = axis + 1; i < static_cast<Index>(s.size()); ++i) r.inner *= s[static_cast<std::size_t>(i)];
    return r;
}

Index norm_axis(Index axis, Index rank) {
    if (axis < 0) axis += rank;
    require(axis >= 0 && axis < rank, "axis out of range");
    return axis;
}

}  // namespace

void Node::accumulate(const Tensor& g) {
    if (grad.empty())
        grad = g.shape() == value.shape() ? g : g.reshaped(value.shape());
    else
        grad.add_(g);
}

Var Var::constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return Var(std::move(n));
}

Var Var::leaf(Tensor t, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
}

double Var::item() const {
    require(value().size() == 1, "item: tensor has " + std::to_string(value().size()) + " elements");
    return value()[0];
}

void Var::backward() const {
    require(value().size() == 1, "backward: root must be a scalar");
    if (!node_->requires_grad) return;
    // Iterative post-order DFS; graphs can be thousands of nodes deep.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->accumulate(Tensor(node_->value.shape(), 1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(n->grad);
    }
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(const Tensor&)> bw) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
    if (n->requires_grad) {
        n->parents.reserve(inputs.size());
        for (auto& in : inputs) n->parents.push_back(in.node());
        n->backward = std::move(bw);
    }
    return Var(std::move(n));
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    if (as == bs) {
        Tensor out = a.value();
        out.add_(b.value());
        return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
            if (pa->requires_grad) pa->accumulate(g);
            if (pb->requires_grad) pb->accumulate(g);
        });
    }
    require(bs.size() <= as.size(), "add: cannot broadcast " + shape_str(bs) + " to " + shape_str(as));
    // Right-align b and compute its strides with 0 on broadcast axes.
    const std::size_t r = as.size();
    std::vector<Index> bstride(r, 0);
    {
        Index st = 1;
        for (std::size_t k = 0; k < r; ++k) {
            const std::size_t i = r - 1 - k;
            const Index bd = k < bs.size() ? bs[bs.size() - 1 - k] : 1;
            require(bd == 1 || bd == as[i], "add: cannot broadcast " + shape_str(bs) + " to " + shape_str(as));
            bstride[i] = bd == 1 ? 0 : st;
            st *= bd;
        }
    }
    std::vector<Index> bidx(static_cast<std::size_t>(a.value().size()));
    {
        std::vector<Index> ctr(r, 0);
        Index off = 0;
        for (std::size_t e = 0; e < bidx.size(); ++e) {
            bidx[e] = off;
            for (std::size_t k = r; k-- > 0;) {
                ++ctr[k];
                off += bstride[k];
                if (ctr[k] < as[k]) break;
                off -= bstride[k] * as[k];
                ctr[k] = 0;
            }
        }
    }
    Tensor out = a.value();
    const auto& bv = b.value();
    for (std::size_t e = 0; e < bidx.size(); ++e) out[static_cast<Index>(e)] += bv[bidx[e]];
    return make_result(std::move(out), {a, b}, [pa, pb, bidx = std::move(bidx)](const Tensor& g) {
        if (pa->requires_grad) pa->accumulate(g);
        if (pb->requires_grad) {
            Tensor gb = zeros_like(pb->value);
            for (std::size_t e = 0; e < bidx.size(); ++e) gb[bidx[e]] += g[static_cast<Index>(e)];
            pb->accumulate(gb);
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same(a, b, "sub");
    Tensor out = a.value();
    for (Index i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
        if (pa->requires_grad) pa->accumulate(g);
        if (pb->requires_grad) {
            Tensor n = g;
            n.scale_(-1.0);
            pb->accumulate(n);
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same(a, b, "mul");
    Tensor out = a.value();
    for (Index i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
        if (pa->requires_grad) {
            Tensor ga = g;
            for (Index i = 0; i < ga.size(); ++i) ga[i] *= pb->value[i];
            pa->accumulate(ga);
        }
        if (pb->requires_grad) {
            Tensor gb = g;
            for (Index i = 0; i < gb.size(); ++i) gb[i] *= pa->value[i];
            pb->accumulate(gb);
        }
    });
}

Var mul_const(const Var& a, const Tensor& c) {
    require(a.value().size() == c.size(), "mul_const: size mismatch");
    Tensor out = a.value();
    for (Index i = 0; i < out.size(); ++i) out[i] *= c[i];
    Node* pa = a.node().get();
    return make_result(std::move(out), {a}, [pa, c](const Tensor& g) {
        Tensor ga = g;
        for (Index i = 0; i < ga.size(); ++i) ga[i] *= c[i];
        pa->accumulate(ga);
    });
}

Var add_const(const Var& a, const Tensor& c) {
    require(a.value().size() == c.size(), "add_const: size mismatch");
    Tensor out = a.value();
    out.add_(c);
    Node* pa = a.node().get();
    return make_result(std::move(out), {a}, [pa](const Tensor& g) { pa->accumulate(g); });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    out.scale_(s);
    Node* pa = a.node().get();
    return make_result(std::move(out), {a}, [pa, s](const Tensor& g) {
        Tensor ga = g;
        ga.scale_(s);
        pa->accumulate(ga);
    });
}

Var relu(const Var& a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](const Tensor& x, const Tensor&, const Tensor& g) {
            Tensor r = g;
            for (Index i = 0; i < r.size(); ++i)
                if (!(x[i] > 0.0)) r[i] = 0.0;
            return r;
        });
}

Var silu(const Var& a) {
    return unary(
        a, [](double x) { return x / (1.0 + std::exp(-x)); },
        [](const Tensor& x, const Tensor&, const Tensor& g) {
            Tensor r = g;
            for (Index i = 0; i < r.size(); ++i) {
                const double s = 1.0 / (1.0 + std::exp(-x[i]));
                r[i] *= s * (1.0 + x[i] * (1.0 - s));
            }
            return r;
        });
}

Var sigmoid(const Var& a) {
    return unary(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](const Tensor&, const Tensor& y, const Tensor& g) {
            Tensor r = g;
            for (Index i = 0; i < r.size(); ++i) r[i] *= y[i] * (1.0 - y[i]);
            return r;
        });
}

Var tanh(const Var& a) {
    return unary(
        a, [](double x) { return std::tanh(x); },
        [](const Tensor&, const Tensor& y, const Tensor& g) {
            Tensor r = g;
            for (Index i = 0; i < r.size(); ++i) r[i] *= 1.0 - y[i] * y[i];
            return r;
        });
}

Var abs(const Var& a) {
    return unary(
        a, [](double x) { return std::abs(x); },
        [](const Tensor& x, const Tensor&, const Tensor& g) {
            Tensor r = g;
            for (Index i = 0; i < r.size(); ++i) r[i] *= x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
            return r;
        });
}

Var square(const Var& a) {
    return unary(
        a, [](double x) { return x * x; },
        [](const Tensor& x, const Tensor&, const Tensor& g) {
            Tensor r = g;
            for (Index i = 0; i < r.size(); ++i) r[i] *= 2.0 * x[i];
            return r;
        });
}

Var sum(const Var& a) {
    Tensor out(Shape{1}, a.value().sum());
    Node* pa = a.node().get();
    return make_result(std::move(out), {a}, [pa](const Tensor& g) { pa->accumulate(Tensor(pa->value.shape(), g[0])); });
}

Var mean(const Var& a) {
    require(a.value().size() > 0, "mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var blend_const(const Tensor& x, const Tensor& mask, const Var& h) {
    require(x.size() == h.value().size() && mask.size() == x.size(), "blend: shape mismatch");
    Tensor out = h.value();
    for (Index i = 0; i < out.size(); ++i)
        if (mask[i] != 0.0) out[i] = x[i];
    Node* ph = h.node().get();
    return make_result(std::move(out), {h}, [ph, mask](const Tensor& g) {
        Tensor gh = g;
        for (Index i = 0; i < gh.size(); ++i)
            if (mask[i] != 0.0) gh[i] = 0.0;
        ph->accumulate(gh);
    });
}

Var gate_blend(const Var& g, const Var& a, const Var& b) {
    check_same(g, a, "gate_blend");
    check_same(a, b, "gate_blend");
    const auto& gv = g.value();
    Tensor out(a.shape());
    for (Index i = 0; i < out.size(); ++i) out[i] = gv[i] * a.value()[i] + (1.0 - gv[i]) * b.value()[i];
    Node* pg = g.node().get();
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_result(std::move(out), {g, a, b}, [pg, pa, pb](const Tensor& go) {
        const auto& gv = pg->value;
        if (pg->requires_grad) {
            Tensor r = go;
            for (Index i = 0; i < r.size(); ++i) r[i] *= pa->value[i] - pb->value[i];
            pg->accumulate(r);
        }
        if (pa->requires_grad) {
            Tensor r = go;
            for (Index i = 0; i < r.size(); ++i) r[i] *= gv[i];
            pa->accumulate(r);
        }
        if (pb->requires_grad) {
            Tensor r = go;
            for (Index i = 0; i < r.size(); ++i) r[i] *= 1.0 - gv[i];
            pb->accumulate(r);
        }
    });
}

// ---------------------------------------------------------------- structural

Var reshape(const Var& a, Shape s) {
    Tensor out = a.value().reshaped(std::move(s));
    Node* pa = a.node().get();
    return make_result(std::move(out), {a}, [pa](const Tensor& g) { pa->accumulate(g.reshaped(pa->value.shape())); });
}

Var permute(const Var& a, const std::vector<int>& perm) {
    require(a.value().rank() == 3 && perm.size() == 3, "permute: rank-3 only");
    const auto& s = a.shape();
    const Index in_stride[3] = {s[1] * s[2], s[2], 1};
    const Shape os{s[static_cast<std::size_t>(perm[0])], s[static_cast<std::size_t>(perm[1])],
                   s[static_cast<std::size_t>(perm[2])]};
    const Index st0 = in_stride[perm[0]], st1 = in_stride[perm[1]], st2 = in_stride[perm[2]];
    std::vector<Index> src(static_cast<std::size_t>(numel(os)));
    Index e = 0;
    for (Index i = 0; i < os[0]; ++i)
        for (Index j = 0; j < os[1]; ++j)
            for (Index k = 0; k < os[2]; ++k) src[static_cast<std::size_t>(e++)] = i * st0 + j * st1 + k * st2;
    Tensor out(os);
    const auto& x = a.value();
    for (std::size_t q = 0; q < src.size(); ++q) out[static_cast<Index>(q)] = x[src[q]];
    Node* pa = a.node().get();
    return make_result(std::move(out), {a}, [pa, src = std::move(src)](const Tensor& g) {
        Tensor r = zeros_like(pa->value);
        for (std::size_t q = 0; q < src.size(); ++q) r[src[q]] = g[static_cast<Index>(q)];
        pa->accumulate(r);
    });
}

Var flip(const Var& a, Index axis) {
    axis = norm_axis(axis, a.value().rank());
    const auto sp = split_at(a.shape(), axis);
    auto do_flip = [sp](const Tensor& x) {
        Tensor out(x.shape());
        for (Index o = 0; o < sp.outer; ++o)
            for (Index j = 0; j < sp.extent; ++j) {
                const double* src = x.data() + (o * sp.extent + (sp.extent - 1 - j)) * sp.inner;
                std::copy(src, src + sp.inner, out.data() + (o * sp.extent + j) * sp.inner);
            }
        return out;
    };
    Node* pa = a.node().get();
    return make_result(do_flip(a.value()), {a}, [pa, do_flip](const Tensor& g) { pa->accumulate(do_flip(g)); });
}

Var slice(const Var& a, Index axis, Index begin, Index end) {
    axis = norm_axis(axis, a.value().rank());
    const auto sp = split_at(a.shape(), axis);
    require(0 <= begin && begin < end && end <= sp.extent, "slice: bad range");
    Shape os = a.shape();
    os[static_cast<std::size_t>(axis)] = end - begin;
    const Index w = end - begin;
    Tensor out(os);
    for (Index o = 0; o < sp.outer; ++o) {
        const double* src = a.value().data() + (o * sp.extent + begin) * sp.inner;
        std::copy(src, src + w * sp.inner, out.data() + o * w * sp.inner);
    }
    Node* pa = a.node().get();
    return make_result(std::move(out), {a}, [pa, sp, begin, w](const Tensor& g) {
        Tensor r = zeros_like(pa->value);
        for (Index o = 0; o < sp.outer; ++o) {
            const double* src = g.data() + o * w * sp.inner;
            std::copy(src, src + w * sp.inner, r.data() + (o * sp.extent + begin) * sp.inner);
        }
        pa->accumulate(r);
    });
}

Var concat(const std::vector<Var>& parts, Index axis) {
    require(!parts.empty(), "concat: no inputs");
    axis = norm_axis(axis, parts[0].value().rank());
    Shape os = parts[0].shape();
    Index total = 0;
    std::vector<Index> widths;
    for (const auto& p : parts) {
        Shape s = p.shape();
        require(s.size() == os.size(), "concat: rank mismatch");
        const Index w = s[static_cast<std::size_t>(axis)];
        s[static_cast<std::size_t>(axis)] = os[static_cast<std::size_t>(axis)];
        require(s == os, "concat: shape mismatch off the concat axis");
        widths.push_back(w);
        total += w;
    }
    os[static_cast<std::size_t>(axis)] = total;
    const auto sp = split_at(os, axis);
    Tensor out(os);
    Index off = 0;
    for (std::size_t q = 0; q < parts.size(); ++q) {
        const Index w = widths[q];
        for (Index o = 0; o < sp.outer; ++o) {
            const double* src = parts[q].value().data() + o * w * sp.inner;
            std::copy(src, src + w * sp.inner, out.data() + (o * total + off) * sp.inner);
        }
        off += w;
    }
    std::vector<Node*> nodes;
    for (const auto& p : parts) nodes.push_back(p.node().get());
    return make_result(std::move(out), parts, [nodes, widths, sp, total](const Tensor& g) {
        Index off = 0;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            const Index w = widths[q];
            if (nodes[q]->requires_grad) {
                Tensor r = zeros_like(nodes[q]->value);
                for (Index o = 0; o < sp.outer; ++o) {
                    const double* src = g.data() + (o * total + off) * sp.inner;
                    std::copy(src, src + w * sp.inner, r.data() + o * w * sp.inner);
                }
                nodes[q]->accumulate(r);
            }
            off += w;
        }
    });
}

// ---------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
    require(a.value().rank() == 2 && b.value().rank() == 2 && a.dim(1) == b.dim(0),
            "matmul: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out(Shape{m, n});
    MapMat(out.data(), m, n).noalias() = CMapMat(a.value().data(), m, k) * CMapMat(b.value().data(), k, n);
    Node* pa = a.node().get();
    Node* pb = b.node().get();
    return make_result(std::move(out), {a, b}, [pa, pb, m, k, n](const Tensor& g) {
        CMapMat G(g.data(), m, n);
        if (pa->requires_grad) {
            Tensor r(pa->value.shape());
            MapMat(r.data(), m, k).noalias() = G * CMapMat(pb->value.data(), k, n).transpose();
            pa->accumulate(r);
        }
        if (pb->requires_grad) {
            Tensor r(pb->value.shape());
            MapMat(r.data(), k, n).noalias() = CMapMat(pa->value.data(), m, k).transpose() * G;
            pb->accumulate(r);
        }
    });
}

Var linear(const Var& x, const Var& w, const Var* b) {
    require(w.value().rank() == 2, "linear: weight must be 2-D");
    const Index k = w.dim(0), o = w.dim(1);
    require(x.value().rank() >= 1 && x.dim(-1) == k,
            "linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
    if (b) require(b->value().size() == o, "linear: bias width mismatch");
    const Index rows = x.value().size() / k;
    Shape os = x.shape();
    os.back() = o;
    Tensor out(os);
    MapMat Y(out.data(), rows, o);
    Y.noalias() = CMapMat(x.value().data(), rows, k) * CMapMat(w.value().data(), k, o);
    if (b) Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->value().data(), o);
    Node* px = x.node().get();
    Node* pw = w.node().get();
    Node* pb = b ? b->node().get() : nullptr;
    std::vector<Var> ins{x, w};
    if (b) ins.push_back(*b);
    return make_result(std::move(out), std::move(ins), [px, pw, pb, rows, k, o](const Tensor& g) {
        CMapMat G(g.data(), rows, o);
        if (px->requires_grad) {
            Tensor r(px->value.shape());
            MapMat(r.data(), rows, k).noalias() = G * CMapMat(pw->value.data(), k, o).transpose();
            px->accumulate(r);
        }
        if (pw->requires_grad) {
            Tensor r(pw->value.shape());
            MapMat(r.data(), k, o).noalias() = CMapMat(px->value.data(), rows, k).transpose() * G;
            pw->accumulate(r);
        }
        if (pb && pb->requires_grad) {
            Tensor r(pb->value.shape());
            Eigen::Map<Eigen::RowVectorXd>(r.data(), o) = G.colwise().sum();
            pb->accumulate(r);
        }
    });
}

Var node_mix(const Tensor& a, const Var& x) {
    require(a.rank() == 2 && a.dim(0) == a.dim(1) && x.dim(0) == a.dim(0), "node_mix: shape mismatch");
    const Index n = a.dim(0), rest = x.value().size() / n;
    Tensor out(x.shape());
    MapMat(out.data(), n, rest).noalias() = CMapMat(a.data(), n, n) * CMapMat(x.value().data(), n, rest);
    Node* px = x.node().get();
    return make_result(std::move(out), {x}, [px, a, n, rest](const Tensor& g) {
        Tensor r(px->value.shape());
        MapMat(r.data(), n, rest).noalias() = CMapMat(a.data(), n, n).transpose() * CMapMat(g.data(), n, rest);
        px->accumulate(r);
    });
}

Var attention(const Var& q, const Var& k, const Var& v, Index heads) {
    check_same(q, k, "attention(q,k)");
    require(q.value().rank() == 3 && v.value().rank() == 3 && v.dim(0) == q.dim(0) && v.dim(1) == q.dim(1),
            "attention: expected [B,S,C] inputs");
    const Index B = q.dim(0), S = q.dim(1), C = q.dim(2), Cv = v.dim(2);
    require(heads >= 1 && C % heads == 0 && Cv % heads == 0, "attention: width not divisible by heads");
    const Index dh = C / heads, dv = Cv / heads;
    const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor probs(Shape{B, heads, S, S});
    Tensor out(Shape{B, S, Cv});
    for (Index b = 0; b < B; ++b) {
        for (Index h = 0; h < heads; ++h) {
            CStrided Q(q.value().data() + b * S * C + h * dh, S, dh, Eigen::OuterStride<>(C));
            CStrided K(k.value().data() + b * S * C + h * dh, S, dh, Eigen::OuterStride<>(C));
            CStrided V(v.value().data() + b * S * Cv + h * dv, S, dv, Eigen::OuterStride<>(Cv));
            MapMat P(probs.data() + (b * heads + h) * S * S, S, S);
            P.noalias() = (Q * K.transpose()) * scl;
            for (Index i = 0; i < S; ++i) {
                const double mx = P.row(i).maxCoeff();
                P.row(i) = (P.row(i).array() - mx).exp();
                P.row(i) /= P.row(i).sum();
            }
            Strided O(out.data() + b * S * Cv + h * dv, S, dv, Eigen::OuterStride<>(Cv));
            O.noalias() = P * V;
        }
    }
    Node* pq = q.node().get();
    Node* pk = k.node().get();
    Node* pv = v.node().get();
    return make_result(std::move(out), {q, k, v},
                       [pq, pk, pv, probs = std::move(probs), B, S, C, Cv, heads, dh, dv, scl](const Tensor& g) {
        Tensor gq(pq->value.shape()), gk(pk->value.shape()), gv(pv->value.shape());
        RowMat dP(S, S);
        for (Index b = 0; b < B; ++b) {
            for (Index h = 0; h < heads; ++h) {
                CStrided Q(pq->value.data() + b * S * C + h * dh, S, dh, Eigen::OuterStride<>(C));
                CStrided K(pk->value.data() + b * S * C + h * dh, S, dh, Eigen::OuterStride<>(C));
                CStrided V(pv->value.data() + b * S * Cv + h * dv, S, dv, Eigen::OuterStride<>(Cv));
                CStrided G(g.data() + b * S * Cv + h * dv, S, dv, Eigen::OuterStride<>(Cv));
                CMapMat P(probs.data() + (b * heads + h) * S * S, S, S);
                Strided GV(gv.data() + b * S * Cv + h * dv, S, dv, Eigen::OuterStride<>(Cv));
                GV.noalias() += P.transpose() * G;
                dP.noalias() = G * V.transpose();
                for (Index i = 0; i < S; ++i) {
                    const double dot = P.row(i).dot(dP.row(i));
                    dP.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
                }
                Strided GQ(gq.data() + b * S * C + h * dh, S, dh, Eigen::OuterStride<>(C));
                Strided GK(gk.data() + b * S * C + h * dh, S, dh, Eigen::OuterStride<>(C));
                GQ.noalias() += (dP * K) * scl;
                GK.noalias() += (dP.transpose() * Q) * scl;
            }
        }
        if (pq->requires_grad) pq->accumulate(gq);
        if (pk->requires_grad) pk->accumulate(gk);
        if (pv->requires_grad) pv->accumulate(gv);
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Index c = x.dim(-1);
    require(gamma.value().size() == c && beta.value().size() == c, "layer_norm: affine width mismatch");
    const Index rows = x.value().size() / c;
    Tensor out(x.shape());
    Tensor xhat(x.shape());
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    const auto& xv = x.value();
    for (Index r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * c;
        double mu = 0.0;
        for (Index j = 0; j < c; ++j) mu += xr[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (Index j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = is;
        for (Index j = 0; j < c; ++j) {
            const double xh = (xr[j] - mu) * is;
            xhat[r * c + j] = xh;
            out[r * c + j] = xh * gamma.value()[j] + beta.value()[j];
        }
    }
    Node* px = x.node().get();
    Node* pg = gamma.node().get();
    Node* pb = beta.node().get();
    return make_result(std::move(out), {x, gamma, beta},
                       [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, c](const Tensor& g) {
        Tensor gx(px->value.shape()), gg(pg->value.shape()), gb(pb->value.shape());
        const auto& gam = pg->value;
        std::vector<double> dxh(static_cast<std::size_t>(c));
        for (Index r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (Index j = 0; j < c; ++j) {
                const double go = g[r * c + j];
                const double xh = xhat[r * c + j];
                gg[j] += go * xh;
                gb[j] += go;
                const double d = go * gam[j];
                dxh[static_cast<std::size_t>(j)] = d;
                m1 += d;
                m2 += d * xh;
            }
            m1 /= static_cast<double>(c);
            m2 /= static_cast<double>(c);
            const double is = inv_std[static_cast<std::size_t>(r)];
            for (Index j = 0; j < c; ++j)
                gx[r * c + j] = is * (dxh[static_cast<std::size_t>(j)] - m1 - xhat[r * c + j] * m2);
        }
        if (px->requires_grad) px->accumulate(gx);
        if (pg->requires_grad) pg->accumulate(gg);
        if (pb->requires_grad) pb->accumulate(gb);
    });
}

// ---------------------------------------------------------------- sequence ops

Var causal_conv(const Var& u, const Var& kernel) {
    require(u.value().rank() == 3 && kernel.value().rank() == 2 && u.dim(1) == kernel.dim(0) &&
                u.dim(2) == kernel.dim(1),
            "causal_conv: expected u[B,H,L] and K[H,L], got " + shape_str(u.shape()) + ", " +
                shape_str(kernel.shape()));
    const Index B = u.dim(0), H = u.dim(1), L = u.dim(2);
    Tensor out(u.shape());
    const auto& uv = u.value();
    const auto& kv = kernel.value();
    for (Index b = 0; b < B; ++b)
        for (Index h = 0; h < H; ++h) {
            const double* ur = uv.data() + (b * H + h) * L;
            const double* kr = kv.data() + h * L;
            double* yr = out.data() + (b * H + h) * L;
            for (Index t = 0; t < L; ++t) {
                double acc = 0.0;
                for (Index i = 0; i <= t; ++i) acc += kr[i] * ur[t - i];
                yr[t] = acc;
            }
        }
    Node* pu = u.node().get();
    Node* pk = kernel.node().get();
    return make_result(std::move(out), {u, kernel}, [pu, pk, B, H, L](const Tensor& g) {
        Tensor gu(pu->value.shape()), gk(pk->value.shape());
        for (Index b = 0; b < B; ++b)
            for (Index h = 0; h < H; ++h) {
                const double* ur = pu->value.data() + (b * H + h) * L;
                const double* kr = pk->value.data() + h * L;
                const double* gr = g.data() + (b * H + h) * L;
                double* gur = gu.data() + (b * H + h) * L;
                double* gkr = gk.data() + h * L;
                for (Index t = 0; t < L; ++t)
                    for (Index i = 0; i <= t; ++i) {
                        gkr[i] += gr[t] * ur[t - i];
                        gur[t - i] += gr[t] * kr[i];
                    }
            }
        if (pu->requires_grad) pu->accumulate(gu);
        if (pk->requires_grad) pk->accumulate(gk);
    });
}

Var temporal_unfold(const Var& x, Index width) {
    require(x.value().rank() == 3 && width >= 1, "temporal_unfold: expected [N,L,C]");
    const Index N = x.dim(0), L = x.dim(1), C = x.dim(2);
    const Index pad = (width - 1) / 2;
    Tensor out(Shape{N, L, width * C});
    for (Index n = 0; n < N; ++n)
        for (Index t = 0; t < L; ++t)
            for (Index j = 0; j < width; ++j) {
                const Index s = t + j - pad;
                if (s < 0 || s >= L) continue;
                std::copy_n(x.value().data() + (n * L + s) * C, C, out.data() + (n * L + t) * width * C + j * C);
            }
    Node* px = x.node().get();
    return make_result(std::move(out), {x}, [px, N, L, C, width, pad](const Tensor& g) {
        Tensor r(px->value.shape());
        for (Index n = 0; n < N; ++n)
            for (Index t = 0; t < L; ++t)
                for (Index j = 0; j < width; ++j) {
                    const Index s = t + j - pad;
                    if (s < 0 || s >= L) continue;
                    const double* src = g.data() + (n * L + t) * width * C + j * C;
                    double* dst = r.data() + (n * L + s) * C;
                    for (Index c = 0; c < C; ++c) dst[c] += src[c];
                }
        px->accumulate(r);
    });
}

}  // namespace adasti::ad
