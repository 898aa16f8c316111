#pragma once

#include "streamrank/evaluator.hpp"
#include "streamrank/losses.hpp"
#include "streamrank/manifest.hpp"
#include "streamrank/nn.hpp"
#include "streamrank/splitter.hpp"
#include "streamrank/trainer.hpp"

#include <json.hpp>

#include <string>

namespace streamrank::exp {

struct ExperimentConfig {
    std::string corpus_dir;
    std::string runs_root = "runs";
    std::string variant = "LR";
    SplitMode split_mode = SplitMode::VIDEO_BASED;
    SplitRatios ratios;
    std::uint64_t split_seed = 7;
    nn::ModelConfig model = nn::ModelConfig::desk();
    train::TrainConfig train;
    losses::RankingLossConfig ranking;
    int ranking_epochs = 3;
    int chat_epochs = 10;
};

// One stable hash over every knob that affects run contents; names the run dir.
std::string experiment_hash(const ExperimentConfig& cfg);
nlohmann::ordered_json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::ordered_json& j);

struct ExperimentResult {
    std::string run_dir;
    eval::MetricsReport test_metrics;
    train::TrainResult training;
};

// Full pipeline for one Table-style row: load corpus, split, build dataset,
// wire the variant (ranking/chat pretraining included), train, evaluate TEST
// with the best-VAL checkpoint, and write all artifacts under the run dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Merges metrics.json files from several run dirs into one comparison CSV
// (variant x weighted precision/recall/F1).
void write_report(const std::vector<std::string>& run_dirs, const std::string& out_csv);

}  // namespace streamrank::exp
