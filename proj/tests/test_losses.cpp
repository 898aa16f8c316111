#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "streamrank/losses.hpp"
#include "streamrank/rng.hpp"

#include <cmath>
#include <set>

using namespace streamrank;
using ad::Tape;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
    return m;
}

nn::ClassDistribution dist_of(std::initializer_list<double> probs) {
    nn::ClassDistribution d;
    d.probs = Vec(static_cast<Eigen::Index>(probs.size()));
    Eigen::Index i = 0;
    for (const double p : probs) d.probs[i++] = p;
    return d;
}

}  // namespace

TEST_CASE("cross entropy of the uniform distribution is ln 4") {
    const auto d = dist_of({0.25, 0.25, 0.25, 0.25});
    for (int c = 0; c < kNumClasses; ++c) {
        CHECK(losses::cross_entropy(d, rank_from_index(c)) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
}

TEST_CASE("cross entropy clamps vanishing probabilities at 1e-12") {
    const auto d = dist_of({1.0, 0.0, 0.0, 0.0});
    CHECK(losses::cross_entropy(d, RankSection::A) == 0.0);
    CHECK(losses::cross_entropy(d, RankSection::D) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("class-weighted cross entropy scales by the label weight") {
    const auto d = dist_of({0.4, 0.3, 0.2, 0.1});
    const Vec w = losses::inverse_frequency_weights({906, 315, 208, 191});
    for (int c = 0; c < kNumClasses; ++c) {
        const auto label = rank_from_index(c);
        CHECK(losses::class_weighted_cross_entropy(d, label, w) ==
              doctest::Approx(w[c] * losses::cross_entropy(d, label)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(losses::class_weighted_cross_entropy(d, RankSection::A, Vec::Ones(3)), std::runtime_error);
    Vec bad = Vec::Ones(4);
    bad[2] = 0.0;
    CHECK_THROWS_AS(losses::class_weighted_cross_entropy(d, RankSection::A, bad), std::runtime_error);
}

TEST_CASE("inverse frequency weights follow total / (k * count)") {
    const Vec w = losses::inverse_frequency_weights({906, 315, 208, 191});
    CHECK(w[0] == doctest::Approx(1620.0 / (4.0 * 906.0)).epsilon(1e-12));
    CHECK(w[3] == doctest::Approx(1620.0 / (4.0 * 191.0)).epsilon(1e-12));
    CHECK(w[3] / w[0] == doctest::Approx(906.0 / 191.0).epsilon(1e-12));

    const Vec balanced = losses::inverse_frequency_weights({5, 5, 5, 5});
    CHECK(balanced.isApprox(Vec::Ones(4), 1e-12));
    CHECK_THROWS_AS(losses::inverse_frequency_weights({1, 0, 1, 1}), std::runtime_error);
}

TEST_CASE("kl alignment matches the closed form") {
    // column means (0, 0) vs (ln 3, 0): KL(p || q) = 0.5 ln(4/3)
    nn::BranchOutput v{Mat::Zero(2, 2)};
    nn::BranchOutput a{Mat(2, 2)};
    a.hidden_seq << std::log(3.0), 0.0, std::log(3.0), 0.0;

    losses::KlLossConfig cfg;
    const double expect = 0.5 * std::log(4.0 / 3.0);
    CHECK(losses::kl_alignment_loss(v, a, cfg) == doctest::Approx(expect).epsilon(1e-12));

    cfg.scale = 2.5;
    CHECK(losses::kl_alignment_loss(v, a, cfg) == doctest::Approx(2.5 * expect).epsilon(1e-12));

    cfg.scale = 1.0;
    cfg.temperature = 2.0;
    const double q0 = std::exp(std::log(3.0) / 2.0) / (std::exp(std::log(3.0) / 2.0) + 1.0);
    const double tempered = 0.5 * std::log(0.5 / q0) + 0.5 * std::log(0.5 / (1.0 - q0));
    CHECK(losses::kl_alignment_loss(v, a, cfg) == doctest::Approx(tempered).epsilon(1e-12));

    CHECK(losses::kl_alignment_loss(v, v, losses::KlLossConfig{}) == 0.0);
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(losses::kl_alignment_loss(v, a, cfg), std::runtime_error);
    nn::BranchOutput wrong{Mat::Zero(3, 2)};
    CHECK_THROWS_AS(losses::kl_alignment_loss(wrong, a, losses::KlLossConfig{}), std::runtime_error);
}

TEST_CASE("kl graph value equals the value-level loss") {
    Rng rng(1);
    const Mat vm = random_mat(rng, 5, 4);
    const Mat am = random_mat(rng, 5, 4);
    losses::KlLossConfig cfg;
    cfg.scale = 1.7;
    cfg.temperature = 1.3;

    Tape<double> tape;
    auto v = ad::leaf(tape, vm);
    auto a = ad::leaf(tape, am);
    auto loss = losses::kl_alignment_graph(v, a, cfg);
    CHECK(loss.scalar() ==
          doctest::Approx(losses::kl_alignment_loss({vm}, {am}, cfg)).epsilon(1e-12));
}

TEST_CASE("kl graph sends no gradient into the video branch") {
    Rng rng(2);
    Tape<double> tape;
    auto v = ad::leaf(tape, random_mat(rng, 5, 4));
    auto a = ad::leaf(tape, random_mat(rng, 5, 4));
    auto loss = losses::kl_alignment_graph(v, a, losses::KlLossConfig{});
    tape.backward(loss);
    CHECK(v.grad().isZero(0.0));
    CHECK_FALSE(a.grad().isZero(0.0));
}

TEST_CASE("ce graph value and gradient match softmax cross entropy") {
    Rng rng(3);
    const Mat logits = random_mat(rng, 1, 4);
    Vec probs = nn::softmax_vec(logits.row(0).transpose());

    Tape<double> tape;
    auto vl = ad::leaf(tape, logits);
    auto loss = losses::cross_entropy_graph(vl, RankSection::C);
    CHECK(loss.scalar() == doctest::Approx(losses::cross_entropy({probs}, RankSection::C)).epsilon(1e-12));
    tape.backward(loss);
    Vec expect = probs;
    expect[2] -= 1.0;
    CHECK(vl.grad().row(0).transpose().isApprox(expect, 1e-12));
}

TEST_CASE("weighted ce graph scales value and gradient by the label weight") {
    Rng rng(4);
    const Mat logits = random_mat(rng, 1, 4);
    const Vec w = losses::inverse_frequency_weights({906, 315, 208, 191});

    Tape<double> t1;
    auto l1 = ad::leaf(t1, logits);
    auto plain = losses::cross_entropy_graph(l1, RankSection::D);
    t1.backward(plain);

    Tape<double> t2;
    auto l2 = ad::leaf(t2, logits);
    auto weighted = losses::weighted_cross_entropy_graph(l2, RankSection::D, w);
    t2.backward(weighted);

    CHECK(weighted.scalar() == doctest::Approx(w[3] * plain.scalar()).epsilon(1e-12));
    CHECK(l2.grad().isApprox(w[3] * l1.grad(), 1e-12));
}

TEST_CASE("pairwise ranking loss hinge cases at margin 0.2") {
    CHECK(losses::pairwise_ranking_loss(1.0, 1.0, 1, 0.2) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(losses::pairwise_ranking_loss(1.5, 0.5, 1, 0.2) == 0.0);
    CHECK(losses::pairwise_ranking_loss(0.5, 1.5, 1, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(losses::pairwise_ranking_loss(1.5, 0.5, -1, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(losses::pairwise_ranking_loss(0.5, 1.5, -1, 0.2) == 0.0);
}

TEST_CASE("ranking graph equals the value loss and has the hinge gradient") {
    Tape<double> tape;
    Mat s1v(1, 1), s2v(1, 1);
    s1v << 0.5;
    s2v << 1.5;
    auto s1 = ad::leaf(tape, s1v);
    auto s2 = ad::leaf(tape, s2v);
    auto loss = losses::ranking_loss_graph(s1, s2, 1, 0.2);
    CHECK(loss.scalar() == doctest::Approx(1.2).epsilon(1e-12));
    tape.backward(loss);
    CHECK(s1.grad()(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(s2.grad()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    Tape<double> t2;
    auto a = ad::leaf(t2, s1v);
    auto b = ad::leaf(t2, s2v);
    auto inactive = losses::ranking_loss_graph(a, b, -1, 0.2);
    CHECK(inactive.scalar() == 0.0);
    t2.backward(inactive);
    CHECK(a.grad()(0, 0) == 0.0);
    CHECK(b.grad()(0, 0) == 0.0);
}

TEST_CASE("generate_pairs keeps all C(4,2) pairs at subsample 1") {
    losses::RankingLossConfig cfg;
    cfg.pair_subsample = 1.0;
    const auto batch = losses::generate_pairs(
        {{"s1", RankSection::A}, {"s2", RankSection::A}, {"s3", RankSection::D}, {"s4", RankSection::B}}, cfg);
    CHECK(batch.pairs.size() == 6);

    for (const auto& p : batch.pairs) {
        const auto rank_of = [](const std::string& id) {
            if (id == "s1" || id == "s2") return RankSection::A;
            if (id == "s4") return RankSection::B;
            return RankSection::D;
        };
        if (rank_of(p.first) == rank_of(p.second)) {
            CHECK(p.y == 1);
        } else {
            CHECK(p.y == -1);
            CHECK(class_index(rank_of(p.first)) > class_index(rank_of(p.second)));
        }
    }
}

TEST_CASE("generate_pairs subsampling keeps roughly the configured fraction") {
    std::vector<std::pair<std::string, RankSection>> samples;
    for (int i = 0; i < 200; ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "s%03d", i);
        samples.emplace_back(id, rank_from_index(i % 4));
    }
    losses::RankingLossConfig cfg;
    cfg.pair_subsample = 0.1;
    cfg.seed = 7;
    const auto batch = losses::generate_pairs(samples, cfg);
    const double expected = 19900.0 * 0.1;
    CHECK(batch.pairs.size() > expected * 0.95);
    CHECK(batch.pairs.size() < expected * 1.05);
}

TEST_CASE("generate_pairs is deterministic and input-order independent") {
    std::vector<std::pair<std::string, RankSection>> samples;
    for (int i = 0; i < 40; ++i) {
        samples.emplace_back("s" + std::to_string(100 + i), rank_from_index(i % 4));
    }
    losses::RankingLossConfig cfg;
    cfg.pair_subsample = 0.5;
    cfg.seed = 13;
    const auto a = losses::generate_pairs(samples, cfg);

    Rng rng(99);
    auto shuffled = samples;
    rng.shuffle(shuffled);
    const auto b = losses::generate_pairs(shuffled, cfg);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].first == b.pairs[i].first);
        CHECK(a.pairs[i].second == b.pairs[i].second);
        CHECK(a.pairs[i].y == b.pairs[i].y);
    }

    cfg.seed = 14;
    const auto c = losses::generate_pairs(samples, cfg);
    bool differs = c.pairs.size() != a.pairs.size();
    for (std::size_t i = 0; !differs && i < a.pairs.size(); ++i) {
        differs = a.pairs[i].first != c.pairs[i].first;
    }
    CHECK(differs);
}

TEST_CASE("same-section pair order is randomized under the seed") {
    std::vector<std::pair<std::string, RankSection>> samples;
    for (int i = 0; i < 12; ++i) samples.emplace_back("s" + std::to_string(100 + i), RankSection::A);
    losses::RankingLossConfig cfg;
    cfg.pair_subsample = 1.0;
    const auto batch = losses::generate_pairs(samples, cfg);
    CHECK(batch.pairs.size() == 66);
    int ascending = 0, descending = 0;
    for (const auto& p : batch.pairs) {
        (p.first < p.second ? ascending : descending)++;
    }
    CHECK(ascending > 10);
    CHECK(descending > 10);
}

TEST_CASE("generate_pairs validates its inputs") {
    losses::RankingLossConfig cfg;
    CHECK_THROWS_AS(losses::generate_pairs({{"s1", RankSection::A}}, cfg), std::runtime_error);
    cfg.pair_subsample = 0.0;
    CHECK_THROWS_AS(losses::generate_pairs({{"s1", RankSection::A}, {"s2", RankSection::B}}, cfg),
                    std::runtime_error);
    cfg.pair_subsample = 1.5;
    CHECK_THROWS_AS(losses::generate_pairs({{"s1", RankSection::A}, {"s2", RankSection::B}}, cfg),
                    std::runtime_error);
}
