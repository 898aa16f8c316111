#pragma once

#include "streamrank/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace streamrank::eval {

// rows = true class, columns = predicted class
struct ConfusionMatrix {
    Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses> counts =
        Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses>::Zero();
    std::int64_t total() const { return counts.sum(); }
};

// Zero-division convention: any metric with an undefined denominator is 0.
struct MetricsReport {
    Vec precision{Vec::Zero(kNumClasses)};
    Vec recall{Vec::Zero(kNumClasses)};
    Vec f1{Vec::Zero(kNumClasses)};
    Eigen::Matrix<std::int64_t, kNumClasses, 1> support =
        Eigen::Matrix<std::int64_t, kNumClasses, 1>::Zero();
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    ConfusionMatrix confusion;
};

ConfusionMatrix confusion(const std::vector<std::pair<RankSection, RankSection>>& predictions);
MetricsReport weighted_prf(const ConfusionMatrix& cm);
// Predicts the train-majority class everywhere; ties break to the lower index.
MetricsReport majority_baseline(const std::vector<RankSection>& train_ranks,
                                const std::vector<RankSection>& eval_ranks);
RankSection majority_class(const std::vector<RankSection>& train_ranks);

void save_metrics(const MetricsReport& report, const std::string& path);
MetricsReport load_metrics(const std::string& path);
void save_confusion_csv(const ConfusionMatrix& cm, const std::string& path);

struct EmbeddingMeta {
    std::string sample_id;
    std::string user_id;
    RankSection rank = RankSection::A;
};

// One CSV row per sample: sample_id, user_id, rank, e0..e{dim-1}.
void export_embeddings(const Mat& embeddings, const std::vector<EmbeddingMeta>& meta, const std::string& path);

// Mean-centered projection onto the top principal components; the largest
// magnitude loading of each component is made positive so signs are stable.
Mat pca_project(const Mat& embeddings, int dims = 2);

}  // namespace streamrank::eval
