#include "streamrank/evaluator.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace streamrank::eval {

using nlohmann::ordered_json;

ConfusionMatrix confusion(const std::vector<std::pair<RankSection, RankSection>>& predictions) {
    if (predictions.empty()) throw std::runtime_error("confusion: empty prediction list");
    ConfusionMatrix cm;
    for (const auto& [truth, predicted] : predictions) {
        cm.counts(class_index(truth), class_index(predicted)) += 1;
    }
    return cm;
}

MetricsReport weighted_prf(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total <= 0) throw std::runtime_error("weighted_prf: empty confusion matrix");

    MetricsReport report;
    report.confusion = cm;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto diag = cm.counts(c, c);
        const auto colsum = cm.counts.col(c).sum();
        const auto rowsum = cm.counts.row(c).sum();
        report.support[c] = rowsum;
        const double p = colsum > 0 ? static_cast<double>(diag) / static_cast<double>(colsum) : 0.0;
        const double r = rowsum > 0 ? static_cast<double>(diag) / static_cast<double>(rowsum) : 0.0;
        report.precision[c] = p;
        report.recall[c] = r;
        report.f1[c] = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    for (int c = 0; c < kNumClasses; ++c) {
        const double w = static_cast<double>(report.support[c]) / static_cast<double>(total);
        report.weighted_precision += w * report.precision[c];
        report.weighted_recall += w * report.recall[c];
        report.weighted_f1 += w * report.f1[c];
    }
    return report;
}

RankSection majority_class(const std::vector<RankSection>& train_ranks) {
    if (train_ranks.empty()) throw std::runtime_error("majority_class: empty training ranks");
    std::array<int, kNumClasses> counts{};
    for (const auto r : train_ranks) ++counts[static_cast<std::size_t>(class_index(r))];
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
        if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
    }
    return rank_from_index(best);
}

MetricsReport majority_baseline(const std::vector<RankSection>& train_ranks,
                                const std::vector<RankSection>& eval_ranks) {
    const RankSection majority = majority_class(train_ranks);
    std::vector<std::pair<RankSection, RankSection>> predictions;
    predictions.reserve(eval_ranks.size());
    for (const auto truth : eval_ranks) predictions.emplace_back(truth, majority);
    return weighted_prf(confusion(predictions));
}

void save_metrics(const MetricsReport& report, const std::string& path) {
    ordered_json j;
    j["zero_division"] = "metrics with zero denominators are reported as 0";
    auto vec4 = [](const Vec& v) {
        ordered_json a = ordered_json::array();
        for (int c = 0; c < kNumClasses; ++c) a.push_back(v[c]);
        return a;
    };
    j["precision"] = vec4(report.precision);
    j["recall"] = vec4(report.recall);
    j["f1"] = vec4(report.f1);
    j["support"] = ordered_json::array();
    for (int c = 0; c < kNumClasses; ++c) j["support"].push_back(report.support[c]);
    j["weighted"] = {{"precision", report.weighted_precision},
                     {"recall", report.weighted_recall},
                     {"f1", report.weighted_f1}};
    j["confusion"] = ordered_json::array();
    for (int t = 0; t < kNumClasses; ++t) {
        ordered_json row = ordered_json::array();
        for (int p = 0; p < kNumClasses; ++p) row.push_back(report.confusion.counts(t, p));
        j["confusion"].push_back(row);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write metrics: " + path);
    out << j.dump(2) << "\n";
}

MetricsReport load_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read metrics: " + path);
    ordered_json j = ordered_json::parse(in);
    MetricsReport report;
    for (int c = 0; c < kNumClasses; ++c) {
        report.precision[c] = j.at("precision")[static_cast<std::size_t>(c)].get<double>();
        report.recall[c] = j.at("recall")[static_cast<std::size_t>(c)].get<double>();
        report.f1[c] = j.at("f1")[static_cast<std::size_t>(c)].get<double>();
        report.support[c] = j.at("support")[static_cast<std::size_t>(c)].get<std::int64_t>();
    }
    report.weighted_precision = j.at("weighted").at("precision").get<double>();
    report.weighted_recall = j.at("weighted").at("recall").get<double>();
    report.weighted_f1 = j.at("weighted").at("f1").get<double>();
    for (int t = 0; t < kNumClasses; ++t) {
        for (int p = 0; p < kNumClasses; ++p) {
            report.confusion.counts(t, p) =
                j.at("confusion")[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)].get<std::int64_t>();
        }
    }
    return report;
}

void save_confusion_csv(const ConfusionMatrix& cm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write confusion: " + path);
    out << "true\\pred,A,B,C,D\n";
    for (int t = 0; t < kNumClasses; ++t) {
        out << to_string(rank_from_index(t));
        for (int p = 0; p < kNumClasses; ++p) out << "," << cm.counts(t, p);
        out << "\n";
    }
}

void export_embeddings(const Mat& embeddings, const std::vector<EmbeddingMeta>& meta, const std::string& path) {
    if (embeddings.rows() != static_cast<Eigen::Index>(meta.size())) {
        throw std::runtime_error("export_embeddings: row count does not match metadata");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embeddings: " + path);
    out << "sample_id,user_id,rank";
    for (Eigen::Index d = 0; d < embeddings.cols(); ++d) out << ",e" << d;
    out << "\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        const auto& m = meta[static_cast<std::size_t>(i)];
        out << m.sample_id << "," << m.user_id << "," << to_string(m.rank);
        for (Eigen::Index d = 0; d < embeddings.cols(); ++d) out << "," << embeddings(i, d);
        out << "\n";
    }
}

Mat pca_project(const Mat& embeddings, int dims) {
    if (dims < 1) throw std::runtime_error("pca_project: dims must be >= 1");
    if (embeddings.rows() < dims) throw std::runtime_error("pca_project: fewer samples than dims");
    Mat centered = embeddings.rowwise() - embeddings.colwise().mean();
    const Mat cov =
        centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(centered.rows() - 1));
    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_project: eigendecomposition failed");

    // eigenvalues ascend; take the top-dims columns in descending order
    Mat components(embeddings.cols(), dims);
    for (int d = 0; d < dims; ++d) {
        Vec v = solver.eigenvectors().col(embeddings.cols() - 1 - d);
        Eigen::Index argmax = 0;
        v.cwiseAbs().maxCoeff(&argmax);
        if (v[argmax] < 0) v = -v;
        components.col(d) = v;
    }
    return centered * components;
}

}  // namespace streamrank::eval
