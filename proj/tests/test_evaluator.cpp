#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "streamrank/evaluator.hpp"
#include "streamrank/rng.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace streamrank;
namespace fs = std::filesystem;

namespace {

using Predictions = std::vector<std::pair<RankSection, RankSection>>;

Predictions random_predictions(Rng& rng, int n) {
    Predictions out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.emplace_back(rank_from_index(static_cast<int>(rng.uniform_int(4))),
                         rank_from_index(static_cast<int>(rng.uniform_int(4))));
    }
    return out;
}

// Independent recomputation straight from the prediction list.
struct BruteMetrics {
    std::array<double, kNumClasses> precision{}, recall{}, f1{};
    double wp = 0, wr = 0, wf = 0;
};

BruteMetrics brute_force(const Predictions& preds) {
    std::array<std::array<int, kNumClasses>, kNumClasses> counts{};
    for (const auto& [t, p] : preds) counts[static_cast<std::size_t>(class_index(t))][static_cast<std::size_t>(class_index(p))]++;
    BruteMetrics m;
    for (int c = 0; c < kNumClasses; ++c) {
        int tp = counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        int pred_c = 0, true_c = 0;
        for (int k = 0; k < kNumClasses; ++k) {
            pred_c += counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
            true_c += counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
        }
        const double p = pred_c > 0 ? static_cast<double>(tp) / pred_c : 0.0;
        const double r = true_c > 0 ? static_cast<double>(tp) / true_c : 0.0;
        m.precision[static_cast<std::size_t>(c)] = p;
        m.recall[static_cast<std::size_t>(c)] = r;
        m.f1[static_cast<std::size_t>(c)] = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
        const double w = static_cast<double>(true_c) / static_cast<double>(preds.size());
        m.wp += w * p;
        m.wr += w * r;
        m.wf += w * m.f1[static_cast<std::size_t>(c)];
    }
    return m;
}

}  // namespace

TEST_CASE("confusion rows are truth and columns are prediction") {
    const eval::ConfusionMatrix cm = eval::confusion({{RankSection::A, RankSection::B},
                                                      {RankSection::A, RankSection::B},
                                                      {RankSection::D, RankSection::A}});
    CHECK(cm.counts(0, 1) == 2);
    CHECK(cm.counts(1, 0) == 0);
    CHECK(cm.counts(3, 0) == 1);
    CHECK(cm.total() == 3);
    CHECK_THROWS_AS(eval::confusion({}), std::runtime_error);
}

TEST_CASE("weighted_prf matches a brute-force recomputation exactly") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(50));
        const Predictions preds = random_predictions(rng, n);
        const eval::MetricsReport rep = eval::weighted_prf(eval::confusion(preds));
        const BruteMetrics ref = brute_force(preds);
        for (int c = 0; c < kNumClasses; ++c) {
            CHECK(rep.precision[c] == ref.precision[static_cast<std::size_t>(c)]);
            CHECK(rep.recall[c] == ref.recall[static_cast<std::size_t>(c)]);
            CHECK(rep.f1[c] == ref.f1[static_cast<std::size_t>(c)]);
        }
        CHECK(rep.weighted_precision == ref.wp);
        CHECK(rep.weighted_recall == ref.wr);
        CHECK(rep.weighted_f1 == ref.wf);
    }
}

TEST_CASE("zero denominators yield zero metrics") {
    const eval::MetricsReport rep = eval::weighted_prf(eval::confusion({{RankSection::A, RankSection::B}}));
    CHECK(rep.precision[0] == 0.0);  // A never predicted
    CHECK(rep.recall[0] == 0.0);
    CHECK(rep.f1[0] == 0.0);
    CHECK(rep.precision[1] == 0.0);  // B predicted once, never true
    CHECK(rep.recall[1] == 0.0);
    CHECK(rep.f1[1] == 0.0);
    CHECK(rep.support[0] == 1);
    CHECK(rep.support[1] == 0);
}

TEST_CASE("weighted recall equals accuracy") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Predictions preds = random_predictions(rng, 40);
        int correct = 0;
        for (const auto& [t, p] : preds) correct += t == p;
        const eval::MetricsReport rep = eval::weighted_prf(eval::confusion(preds));
        CHECK(rep.weighted_recall == doctest::Approx(static_cast<double>(correct) / 40.0).epsilon(1e-12));
    }
}

TEST_CASE("majority class breaks ties toward the lower index") {
    CHECK(eval::majority_class({RankSection::A, RankSection::A, RankSection::B, RankSection::B,
                                RankSection::C}) == RankSection::A);
    CHECK(eval::majority_class({RankSection::D, RankSection::D, RankSection::C, RankSection::C}) ==
          RankSection::C);
    CHECK(eval::majority_class({RankSection::D}) == RankSection::D);
    CHECK_THROWS_AS(eval::majority_class({}), std::runtime_error);
}

TEST_CASE("majority baseline at 64 percent majority reproduces the reference metrics") {
    std::vector<RankSection> eval_ranks;
    for (int i = 0; i < 64; ++i) eval_ranks.push_back(RankSection::A);
    for (int i = 0; i < 16; ++i) eval_ranks.push_back(RankSection::B);
    for (int i = 0; i < 12; ++i) eval_ranks.push_back(RankSection::C);
    for (int i = 0; i < 8; ++i) eval_ranks.push_back(RankSection::D);
    const std::vector<RankSection> train = {RankSection::A, RankSection::A, RankSection::B};

    const eval::MetricsReport rep = eval::majority_baseline(train, eval_ranks);
    CHECK(rep.weighted_precision == doctest::Approx(0.4096).epsilon(1e-9));
    CHECK(rep.weighted_recall == doctest::Approx(0.64).epsilon(1e-9));
    CHECK(rep.weighted_f1 == doctest::Approx(0.64 * (2.0 * 0.64 / 1.64)).epsilon(1e-9));
    CHECK(rep.weighted_f1 == doctest::Approx(0.49951).epsilon(1e-4));
}

TEST_CASE("metrics reports round-trip through JSON") {
    Rng rng(11);
    const eval::MetricsReport rep = eval::weighted_prf(eval::confusion(random_predictions(rng, 37)));
    const fs::path dir = fs::temp_directory_path() / "streamrank_eval_test";
    fs::create_directories(dir);
    const std::string path = (dir / "metrics.json").string();
    eval::save_metrics(rep, path);
    const eval::MetricsReport back = eval::load_metrics(path);
    for (int c = 0; c < kNumClasses; ++c) {
        CHECK(back.precision[c] == rep.precision[c]);
        CHECK(back.recall[c] == rep.recall[c]);
        CHECK(back.f1[c] == rep.f1[c]);
        CHECK(back.support[c] == rep.support[c]);
    }
    CHECK(back.weighted_precision == rep.weighted_precision);
    CHECK(back.weighted_recall == rep.weighted_recall);
    CHECK(back.weighted_f1 == rep.weighted_f1);
    CHECK(back.confusion.counts == rep.confusion.counts);
}

TEST_CASE("confusion CSV carries the labeled header and rows") {
    Rng rng(13);
    const eval::ConfusionMatrix cm = eval::confusion(random_predictions(rng, 25));
    const fs::path dir = fs::temp_directory_path() / "streamrank_eval_test";
    fs::create_directories(dir);
    const std::string path = (dir / "confusion.csv").string();
    eval::save_confusion_csv(cm, path);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "true\\pred,A,B,C,D");
    int rows = 0;
    std::int64_t sum = 0;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string label;
        std::getline(ss, label, ',');
        CHECK(label == std::string(1, "ABCD"[rows]));
        std::string cell;
        while (std::getline(ss, cell, ',')) sum += std::stoll(cell);
        ++rows;
    }
    CHECK(rows == kNumClasses);
    CHECK(sum == cm.total());
}

TEST_CASE("embedding export writes one labeled row per sample") {
    Mat emb(2, 3);
    emb << 0.5, -1.25, 2.0, 3.0, 0.0, -0.125;
    const std::vector<eval::EmbeddingMeta> meta = {{"s1", "u1", RankSection::B}, {"s2", "u2", RankSection::D}};
    const fs::path dir = fs::temp_directory_path() / "streamrank_eval_test";
    fs::create_directories(dir);
    const std::string path = (dir / "embeddings.csv").string();
    eval::export_embeddings(emb, meta, path);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "sample_id,user_id,rank,e0,e1,e2");
    REQUIRE(std::getline(in, line));
    CHECK(line == "s1,u1,B,0.5,-1.25,2");
    REQUIRE(std::getline(in, line));
    CHECK(line == "s2,u2,D,3,0,-0.125");

    CHECK_THROWS_AS(eval::export_embeddings(emb, {meta[0]}, path), std::runtime_error);
}

TEST_CASE("pca projects axis-aligned data onto the centered axis values") {
    Mat x = Mat::Zero(6, 4);
    for (int i = 0; i < 6; ++i) x(i, 1) = static_cast<double>(i);
    const Mat proj = eval::pca_project(x, 1);
    REQUIRE(proj.rows() == 6);
    REQUIRE(proj.cols() == 1);
    for (int i = 0; i < 6; ++i) CHECK(proj(i, 0) == doctest::Approx(i - 2.5).epsilon(1e-9));
}

TEST_CASE("pca orders components by explained variance") {
    Rng rng(17);
    Mat x(120, 4);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double big = rng.normal(0.0, 10.0);
        const double small = rng.normal(0.0, 1.0);
        x(i, 0) = big + 0.1 * small;
        x(i, 1) = -big + 0.2 * small;
        x(i, 2) = small;
        x(i, 3) = rng.normal(0.0, 0.1);
    }
    const Mat proj = eval::pca_project(x, 2);
    const auto var_of = [&](int c) {
        const double mean = proj.col(c).mean();
        return (proj.col(c).array() - mean).square().sum() / static_cast<double>(proj.rows() - 1);
    };
    CHECK(var_of(0) > var_of(1));
    CHECK(var_of(0) > 150.0);

    const Mat again = eval::pca_project(x, 2);
    CHECK(proj == again);
}

TEST_CASE("pca validates its arguments") {
    CHECK_THROWS_AS(eval::pca_project(Mat::Zero(5, 3), 0), std::runtime_error);
    CHECK_THROWS_AS(eval::pca_project(Mat::Zero(1, 3), 2), std::runtime_error);
}
