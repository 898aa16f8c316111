#pragma once

#include "streamrank/autodiff.hpp"
#include "streamrank/nn.hpp"
#include "streamrank/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace streamrank::losses {

struct KlLossConfig {
    double scale = 1.0;
    double temperature = 1.0;
};

struct RankingLossConfig {
    double margin = 0.2;
    double pair_subsample = 0.1;
    std::uint64_t seed = 0;
};

// y = +1 iff both samples share a rank section, else -1. For different-section
// pairs the worse rank is placed first, so minimizing the hinge drives better
// ranks toward higher scores; same-section order is randomized under the seed.
struct SamplePair {
    std::string first;
    std::string second;
    int y = 1;
};

struct PairBatch {
    std::vector<SamplePair> pairs;
};

// ---------------------------------------------------------------------------
// Value-level losses

double cross_entropy(const nn::ClassDistribution& dist, RankSection label);
double class_weighted_cross_entropy(const nn::ClassDistribution& dist, RankSection label, const Vec& weights);
double kl_alignment_loss(const nn::BranchOutput& v, const nn::BranchOutput& a, const KlLossConfig& cfg);
double pairwise_ranking_loss(double s1, double s2, int y, double margin);

PairBatch generate_pairs(std::vector<std::pair<std::string, RankSection>> samples,
                         const RankingLossConfig& cfg);

// weights[c] = total / (n_classes * count[c]); ratios follow inverse frequency.
Vec inverse_frequency_weights(const std::array<int, kNumClasses>& counts);

// ---------------------------------------------------------------------------
// Graph-level losses

template <typename Scalar>
ad::Var<Scalar> cross_entropy_graph(ad::Var<Scalar> logits, RankSection label) {
    return ad::softmax_cross_entropy(logits, class_index(label));
}

template <typename Scalar>
ad::Var<Scalar> weighted_cross_entropy_graph(ad::Var<Scalar> logits, RankSection label, const Vec& weights) {
    auto ce = ad::softmax_cross_entropy(logits, class_index(label));
    const Scalar w = static_cast<Scalar>(weights[class_index(label)]);
    return w == Scalar(1) ? ce : ad::affine(ce, w, Scalar(0));
}

// p is computed from the video sequence values only, so the loss node carries
// no gradient path into the video branch; q gets the usual gradient.
template <typename Scalar>
ad::Var<Scalar> kl_alignment_graph(ad::Var<Scalar> v_seq, ad::Var<Scalar> a_seq, const KlLossConfig& cfg) {
    VectorX<Scalar> pooled_v = v_seq.value().colwise().mean().transpose();
    pooled_v /= static_cast<Scalar>(cfg.temperature);
    const Scalar zmax = pooled_v.maxCoeff();
    VectorX<Scalar> p = (pooled_v.array() - zmax).exp();
    p /= p.sum();

    auto pooled_a = ad::mean_rows(a_seq);
    auto logits = ad::affine(pooled_a, Scalar(1.0 / cfg.temperature), Scalar(0));
    auto kl = ad::kl_const_target(p, logits);
    return cfg.scale == 1.0 ? kl : ad::affine(kl, static_cast<Scalar>(cfg.scale), Scalar(0));
}

// max(0, -y*(s1 - s2) + m) on 1x1 score nodes.
template <typename Scalar>
ad::Var<Scalar> ranking_loss_graph(ad::Var<Scalar> s1, ad::Var<Scalar> s2, int y, Scalar margin) {
    return ad::relu(ad::affine(ad::sub(s1, s2), Scalar(-y), margin));
}

}  // namespace streamrank::losses
