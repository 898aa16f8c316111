#pragma once

#include "streamrank/types.hpp"

#include <cassert>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace streamrank::ad {

// Reverse-mode tape over dense Eigen matrices. A forward pass appends nodes
// in topological order; backward() walks them in reverse. Var is a cheap
// (tape, index) handle, free functions build the graph.

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
    Tape<Scalar>* tape = nullptr;
    int idx = -1;

    const MatrixX<Scalar>& value() const { return tape->nodes[idx].value; }
    const MatrixX<Scalar>& grad() const { return tape->nodes[idx].grad; }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    Scalar scalar() const { return value()(0, 0); }
};

template <typename Scalar>
class Tape {
public:
    struct Node {
        MatrixX<Scalar> value;
        MatrixX<Scalar> grad;
        std::function<void(Tape&, const Node&)> backward;  // may be empty (leaf/constant)
    };

    std::vector<Node> nodes;

    Var<Scalar> push(MatrixX<Scalar> value, std::function<void(Tape&, const Node&)> backward = {}) {
        Node n;
        n.grad = MatrixX<Scalar>::Zero(value.rows(), value.cols());
        n.value = std::move(value);
        n.backward = std::move(backward);
        nodes.push_back(std::move(n));
        return {this, static_cast<int>(nodes.size()) - 1};
    }

    MatrixX<Scalar>& grad_of(int idx) { return nodes[idx].grad; }

    // Seeds d(loss)/d(loss) = 1 and accumulates into every node's grad.
    void backward(Var<Scalar> loss) {
        assert(loss.tape == this && loss.rows() == 1 && loss.cols() == 1);
        nodes[loss.idx].grad(0, 0) = Scalar(1);
        for (int i = loss.idx; i >= 0; --i) {
            if (nodes[i].backward && !nodes[i].grad.isZero(Scalar(0))) {
                nodes[i].backward(*this, nodes[i]);
            }
        }
    }

    void clear() { nodes.clear(); }
};

template <typename Scalar>
Var<Scalar> leaf(Tape<Scalar>& tape, MatrixX<Scalar> value) {
    return tape.push(std::move(value));
}

template <typename Scalar>
Var<Scalar> constant(Tape<Scalar>& tape, MatrixX<Scalar> value) {
    return tape.push(std::move(value));
}

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
    auto& tape = *a.tape;
    const int ai = a.idx, bi = b.idx;
    return tape.push(a.value() * b.value(), [ai, bi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai).noalias() += n.grad * t.nodes[bi].value.transpose();
        t.grad_of(bi).noalias() += t.nodes[ai].value.transpose() * n.grad;
    });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
    auto& tape = *a.tape;
    const int ai = a.idx, bi = b.idx;
    return tape.push(a.value() + b.value(), [ai, bi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai) += n.grad;
        t.grad_of(bi) += n.grad;
    });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
    auto& tape = *a.tape;
    const int ai = a.idx, bi = b.idx;
    return tape.push(a.value() - b.value(), [ai, bi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai) += n.grad;
        t.grad_of(bi) -= n.grad;
    });
}

// Broadcasts the 1 x D row vector b onto every row of a.
template <typename Scalar>
Var<Scalar> add_rowvec(Var<Scalar> a, Var<Scalar> b) {
    auto& tape = *a.tape;
    const int ai = a.idx, bi = b.idx;
    MatrixX<Scalar> out = a.value();
    out.rowwise() += b.value().row(0);
    return tape.push(std::move(out), [ai, bi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai) += n.grad;
        t.grad_of(bi).row(0) += n.grad.colwise().sum();
    });
}

template <typename Scalar>
Var<Scalar> cmul(Var<Scalar> a, Var<Scalar> b) {
    auto& tape = *a.tape;
    const int ai = a.idx, bi = b.idx;
    return tape.push(a.value().cwiseProduct(b.value()), [ai, bi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai) += n.grad.cwiseProduct(t.nodes[bi].value);
        t.grad_of(bi) += n.grad.cwiseProduct(t.nodes[ai].value);
    });
}

// alpha * a + beta, elementwise.
template <typename Scalar>
Var<Scalar> affine(Var<Scalar> a, Scalar alpha, Scalar beta) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    return tape.push((a.value().array() * alpha + beta).matrix(),
                     [ai, alpha](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
                         t.grad_of(ai) += n.grad * alpha;
                     });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    MatrixX<Scalar> out = (Scalar(1) / (Scalar(1) + (-a.value().array()).exp())).matrix();
    const int oi = static_cast<int>(tape.nodes.size());
    return tape.push(std::move(out), [ai, oi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        const auto& s = t.nodes[oi].value.array();
        t.grad_of(ai).array() += n.grad.array() * s * (Scalar(1) - s);
    });
}

template <typename Scalar>
Var<Scalar> tanh_of(Var<Scalar> a) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    MatrixX<Scalar> out = a.value().array().tanh().matrix();
    const int oi = static_cast<int>(tape.nodes.size());
    return tape.push(std::move(out), [ai, oi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        const auto& y = t.nodes[oi].value.array();
        t.grad_of(ai).array() += n.grad.array() * (Scalar(1) - y * y);
    });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    return tape.push(a.value().cwiseMax(Scalar(0)), [ai](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai).array() +=
            n.grad.array() * (t.nodes[ai].value.array() > Scalar(0)).template cast<Scalar>();
    });
}

template <typename Scalar>
Var<Scalar> concat_cols(Var<Scalar> a, Var<Scalar> b) {
    auto& tape = *a.tape;
    const int ai = a.idx, bi = b.idx;
    MatrixX<Scalar> out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    const auto ac = a.cols(), bc = b.cols();
    return tape.push(std::move(out), [ai, bi, ac, bc](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai) += n.grad.leftCols(ac);
        t.grad_of(bi) += n.grad.rightCols(bc);
    });
}

template <typename Scalar>
Var<Scalar> slice_rows(Var<Scalar> a, Eigen::Index start, Eigen::Index count) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    return tape.push(a.value().middleRows(start, count),
                     [ai, start, count](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
                         t.grad_of(ai).middleRows(start, count) += n.grad;
                     });
}

template <typename Scalar>
Var<Scalar> row(Var<Scalar> a, Eigen::Index i) {
    return slice_rows(a, i, 1);
}

// Stacks S nodes of shape 1 x D into an S x D matrix.
template <typename Scalar>
Var<Scalar> vstack(Tape<Scalar>& tape, const std::vector<Var<Scalar>>& rows_in) {
    assert(!rows_in.empty());
    const auto d = rows_in.front().cols();
    MatrixX<Scalar> out(static_cast<Eigen::Index>(rows_in.size()), d);
    std::vector<int> parents;
    parents.reserve(rows_in.size());
    for (std::size_t i = 0; i < rows_in.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = rows_in[i].value().row(0);
        parents.push_back(rows_in[i].idx);
    }
    return tape.push(std::move(out), [parents](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        for (std::size_t i = 0; i < parents.size(); ++i) {
            t.grad_of(parents[i]).row(0) += n.grad.row(static_cast<Eigen::Index>(i));
        }
    });
}

template <typename Scalar>
Var<Scalar> mean_rows(Var<Scalar> a) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    const auto r = a.rows();
    MatrixX<Scalar> out = a.value().colwise().mean();
    return tape.push(std::move(out), [ai, r](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai).rowwise() += (n.grad.row(0) / Scalar(r));
    });
}

// Averages row groups [g.first, g.second); the adaptive pooling primitive.
template <typename Scalar>
Var<Scalar> group_mean_rows(Var<Scalar> a, std::vector<std::pair<Eigen::Index, Eigen::Index>> groups) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    MatrixX<Scalar> out(static_cast<Eigen::Index>(groups.size()), a.cols());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto [lo, hi] = groups[g];
        out.row(static_cast<Eigen::Index>(g)) = a.value().middleRows(lo, hi - lo).colwise().mean();
    }
    return tape.push(std::move(out), [ai, groups = std::move(groups)](Tape<Scalar>& t,
                                                                      const typename Tape<Scalar>::Node& n) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto [lo, hi] = groups[g];
            t.grad_of(ai).middleRows(lo, hi - lo).rowwise() +=
                n.grad.row(static_cast<Eigen::Index>(g)) / Scalar(hi - lo);
        }
    });
}

// Mean over arbitrary (possibly overlapping) row index sets, one output row
// per set. Generalizes group_mean_rows to non-contiguous groups.
template <typename Scalar>
Var<Scalar> gather_mean_rows(Var<Scalar> a, std::shared_ptr<const std::vector<std::vector<Eigen::Index>>> groups) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(groups->size()), a.cols());
    for (std::size_t g = 0; g < groups->size(); ++g) {
        const auto& idx = (*groups)[g];
        for (const auto i : idx) out.row(static_cast<Eigen::Index>(g)) += a.value().row(i);
        out.row(static_cast<Eigen::Index>(g)) /= Scalar(idx.size());
    }
    return tape.push(std::move(out), [ai, groups = std::move(groups)](Tape<Scalar>& t,
                                                                      const typename Tape<Scalar>::Node& n) {
        auto& ga = t.grad_of(ai);
        for (std::size_t g = 0; g < groups->size(); ++g) {
            const auto& idx = (*groups)[g];
            for (const auto i : idx) ga.row(i) += n.grad.row(static_cast<Eigen::Index>(g)) / Scalar(idx.size());
        }
    });
}

// im2col gather. src maps each (output row, tap) to an input row, -1 for
// padding. out(i, k*C + c) = x((*src)[i*K + k], c). Backward is scatter-add.
// The map is shared so layers can precompute it once per geometry.
template <typename Scalar>
Var<Scalar> unfold(Var<Scalar> x, std::shared_ptr<const std::vector<Eigen::Index>> src, Eigen::Index taps) {
    auto& tape = *x.tape;
    const int xi = x.idx;
    const auto c = x.cols();
    const auto n_out = static_cast<Eigen::Index>(src->size()) / taps;
    MatrixX<Scalar> out = MatrixX<Scalar>::Zero(n_out, taps * c);
    for (Eigen::Index i = 0; i < n_out; ++i) {
        for (Eigen::Index k = 0; k < taps; ++k) {
            const auto s = (*src)[static_cast<std::size_t>(i * taps + k)];
            if (s >= 0) out.block(i, k * c, 1, c) = x.value().row(s);
        }
    }
    return tape.push(std::move(out), [xi, src = std::move(src), taps, c](Tape<Scalar>& t,
                                                                         const typename Tape<Scalar>::Node& n) {
        const auto n_out = static_cast<Eigen::Index>(src->size()) / taps;
        auto& gx = t.grad_of(xi);
        for (Eigen::Index i = 0; i < n_out; ++i) {
            for (Eigen::Index k = 0; k < taps; ++k) {
                const auto s = (*src)[static_cast<std::size_t>(i * taps + k)];
                if (s >= 0) gx.row(s) += n.grad.block(i, k * c, 1, c);
            }
        }
    });
}

// Rows of an embedding table selected by token id; backward scatter-adds.
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> table, std::vector<Eigen::Index> ids) {
    auto& tape = *table.tape;
    const int ti = table.idx;
    MatrixX<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    return tape.push(std::move(out), [ti, ids = std::move(ids)](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            t.grad_of(ti).row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
        }
    });
}

// Reshapes consecutive row groups of size k into wider rows:
// [G*k, C] -> [G, k*C] with out(g, j*C + c) = a(g*k + j, c).
template <typename Scalar>
Var<Scalar> fold_rows(Var<Scalar> a, Eigen::Index k) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    const auto c = a.cols();
    const auto g = a.rows() / k;
    assert(a.rows() % k == 0);
    MatrixX<Scalar> out(g, k * c);
    for (Eigen::Index i = 0; i < g; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) out.block(i, j * c, 1, c) = a.value().row(i * k + j);
    }
    return tape.push(std::move(out), [ai, k, c](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        auto& ga = t.grad_of(ai);
        for (Eigen::Index i = 0; i < n.grad.rows(); ++i) {
            for (Eigen::Index j = 0; j < k; ++j) ga.row(i * k + j) += n.grad.block(i, j * c, 1, c);
        }
    });
}

// Forward pass-through whose gradient is dropped.
template <typename Scalar>
Var<Scalar> stop_gradient(Var<Scalar> a) {
    return a.tape->push(a.value());
}

// Numerically stable fused softmax + cross-entropy on a 1 x C logit row.
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(Var<Scalar> logits, int label) {
    auto& tape = *logits.tape;
    const int li = logits.idx;
    const auto z = logits.value().row(0);
    const Scalar zmax = z.maxCoeff();
    const Scalar lse = zmax + std::log((z.array() - zmax).exp().sum());
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = lse - z(label);
    return tape.push(std::move(out), [li, label, lse](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        const auto z = t.nodes[li].value.row(0);
        MatrixX<Scalar> p = (z.array() - lse).exp().matrix();
        p(0, label) -= Scalar(1);
        t.grad_of(li) += n.grad(0, 0) * p;
    });
}

// Softmax probabilities of a 1 x C logit row (used where the distribution
// itself is the output; training losses prefer the fused op above).
template <typename Scalar>
Var<Scalar> softmax_row(Var<Scalar> logits) {
    auto& tape = *logits.tape;
    const int li = logits.idx;
    const auto z = logits.value().row(0);
    const Scalar zmax = z.maxCoeff();
    VectorX<Scalar> e = (z.array() - zmax).exp();
    MatrixX<Scalar> p = (e / e.sum()).transpose();
    const int oi = static_cast<int>(tape.nodes.size());
    return tape.push(std::move(p), [li, oi](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        const auto& p = t.nodes[oi].value.row(0);
        const Scalar dot = (n.grad.row(0).array() * p.array()).sum();
        t.grad_of(li).row(0).array() += p.array() * (n.grad.row(0).array() - dot);
    });
}

// KL(p || softmax(logits)) with a constant target p; the dual-route piece of
// the alignment loss. Gradient reaches only the logits side.
template <typename Scalar>
Var<Scalar> kl_const_target(const VectorX<Scalar>& p, Var<Scalar> logits) {
    auto& tape = *logits.tape;
    const int li = logits.idx;
    const auto z = logits.value().row(0);
    const Scalar zmax = z.maxCoeff();
    const Scalar lse = zmax + std::log((z.array() - zmax).exp().sum());
    Scalar loss = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] > Scalar(0)) loss += p[i] * (std::log(p[i]) - (z(i) - lse));
    }
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = loss;
    return tape.push(std::move(out), [li, p, lse](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        const auto z = t.nodes[li].value.row(0);
        MatrixX<Scalar> q = (z.array() - lse).exp().matrix();
        t.grad_of(li) += n.grad(0, 0) * (q - p.transpose());
    });
}

template <typename Scalar>
Var<Scalar> sum_all(Var<Scalar> a) {
    auto& tape = *a.tape;
    const int ai = a.idx;
    MatrixX<Scalar> out(1, 1);
    out(0, 0) = a.value().sum();
    return tape.push(std::move(out), [ai](Tape<Scalar>& t, const typename Tape<Scalar>::Node& n) {
        t.grad_of(ai).array() += n.grad(0, 0);
    });
}

}  // namespace streamrank::ad
