#include "streamrank/losses.hpp"

#include "streamrank/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace streamrank::losses {

double cross_entropy(const nn::ClassDistribution& dist, RankSection label) {
    const double p = std::max(dist.probs[class_index(label)], 1e-12);
    return -std::log(p);
}

double class_weighted_cross_entropy(const nn::ClassDistribution& dist, RankSection label, const Vec& weights) {
    if (weights.size() != kNumClasses) throw std::runtime_error("weights must have 4 entries");
    if ((weights.array() <= 0).any()) throw std::runtime_error("class weights must be positive");
    return weights[class_index(label)] * cross_entropy(dist, label);
}

double kl_alignment_loss(const nn::BranchOutput& v, const nn::BranchOutput& a, const KlLossConfig& cfg) {
    if (v.hidden_seq.rows() != a.hidden_seq.rows() || v.hidden_seq.cols() != a.hidden_seq.cols()) {
        throw std::runtime_error("kl_alignment_loss: branch shapes differ");
    }
    if (cfg.temperature <= 0) throw std::runtime_error("temperature must be positive");
    const Vec p = nn::softmax_vec(v.hidden_seq.colwise().mean().transpose() / cfg.temperature);
    const Vec q = nn::softmax_vec(a.hidden_seq.colwise().mean().transpose() / cfg.temperature);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] > 0) loss += p[i] * std::log(p[i] / q[i]);
    }
    return cfg.scale * loss;
}

double pairwise_ranking_loss(double s1, double s2, int y, double margin) {
    return std::max(0.0, -y * (s1 - s2) + margin);
}

PairBatch generate_pairs(std::vector<std::pair<std::string, RankSection>> samples,
                         const RankingLossConfig& cfg) {
    if (samples.size() < 2) throw std::runtime_error("generate_pairs requires at least 2 samples");
    if (cfg.pair_subsample <= 0 || cfg.pair_subsample > 1) {
        throw std::runtime_error("pair_subsample must be in (0, 1]");
    }
    std::sort(samples.begin(), samples.end());
    Rng rng = derive_rng(cfg.seed, "pairs");

    PairBatch batch;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            const bool keep = rng.uniform() < cfg.pair_subsample;
            const bool flip = rng.uniform() < 0.5;
            if (!keep) continue;
            SamplePair p;
            if (samples[i].second == samples[j].second) {
                p.y = 1;
                p.first = flip ? samples[j].first : samples[i].first;
                p.second = flip ? samples[i].first : samples[j].first;
            } else {
                p.y = -1;
                // worse rank (higher class index) first
                const bool i_worse = class_index(samples[i].second) > class_index(samples[j].second);
                p.first = i_worse ? samples[i].first : samples[j].first;
                p.second = i_worse ? samples[j].first : samples[i].first;
            }
            batch.pairs.push_back(std::move(p));
        }
    }
    return batch;
}

Vec inverse_frequency_weights(const std::array<int, kNumClasses>& counts) {
    int total = 0;
    for (const int c : counts) {
        if (c <= 0) throw std::runtime_error("class counts must be positive");
        total += c;
    }
    Vec w(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) {
        w[c] = static_cast<double>(total) / (static_cast<double>(kNumClasses) * counts[static_cast<std::size_t>(c)]);
    }
    return w;
}

}  // namespace streamrank::losses
