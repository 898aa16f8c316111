#pragma once

#include "streamrank/evaluator.hpp"
#include "streamrank/losses.hpp"
#include "streamrank/manifest.hpp"
#include "streamrank/media.hpp"
#include "streamrank/mfcc.hpp"
#include "streamrank/nn.hpp"
#include "streamrank/splitter.hpp"
#include "streamrank/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace streamrank::train {

// ---------------------------------------------------------------------------
// Optimizer

struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;
    std::unordered_map<std::string, Mat> m;
    std::unordered_map<std::string, Mat> v;

    // Updates parameters in store name order; `trainable` filters by name.
    void step(nn::ParamStore& params, const std::unordered_map<std::string, Mat>& grads,
              const std::function<bool(const std::string&)>& trainable = {});
};

// ---------------------------------------------------------------------------
// Experiment variants (the Table-4 style matrix)

enum class VariantKind {
    FUSION,       // LR
    VIDEO_ONLY,   // LRV
    AUDIO_ONLY,   // LRA
    FUSION_KL,    // LR_KL
    FUSION_RANK,  // LR_rank (ranking pretraining, then fusion)
    FUSION_MASK,  // LR_mask (center mask in the video pipeline)
    TEXT_FC,      // LR_text_fc (chat prior before the final FC)
    TEXT_GRU,     // LR_text_gru (chat prior before the fusion recurrence)
    SINGLE_VIEW,  // view:<name>
    MULTIVIEW,    // multiview
    CHAT_ONLY,    // internal: chat-prior classifier stage
};

struct VariantSpec {
    VariantKind kind = VariantKind::FUSION;
    std::string name;       // canonical spelling, e.g. "LR_mask" or "view:minimap"
    std::string view_name;  // SINGLE_VIEW only

    bool uses_video() const {
        return kind != VariantKind::AUDIO_ONLY && kind != VariantKind::SINGLE_VIEW &&
               kind != VariantKind::MULTIVIEW && kind != VariantKind::CHAT_ONLY;
    }
    bool uses_audio() const {
        return kind != VariantKind::VIDEO_ONLY && kind != VariantKind::SINGLE_VIEW &&
               kind != VariantKind::MULTIVIEW && kind != VariantKind::CHAT_ONLY;
    }
    bool uses_views() const { return kind == VariantKind::SINGLE_VIEW || kind == VariantKind::MULTIVIEW; }
    bool uses_chat() const {
        return kind == VariantKind::TEXT_FC || kind == VariantKind::TEXT_GRU || kind == VariantKind::CHAT_ONLY;
    }
    bool uses_mask() const { return kind == VariantKind::FUSION_MASK; }
    bool has_fused_embedding() const {
        return kind == VariantKind::FUSION || kind == VariantKind::FUSION_KL ||
               kind == VariantKind::FUSION_RANK || kind == VariantKind::FUSION_MASK ||
               kind == VariantKind::TEXT_FC || kind == VariantKind::TEXT_GRU;
    }
};

VariantSpec parse_variant(const std::string& name);
// The 14 canonical experiment variants.
std::vector<std::string> variant_names();

// ---------------------------------------------------------------------------
// In-memory dataset

struct Sample {
    std::string sample_id;
    std::string user_id;
    RankSection rank = RankSection::A;
    VideoClip video;
    Mat mfcc;
    std::vector<VideoClip> views;
    std::vector<std::string> chat_messages;
};

struct DataOptions {
    bool load_video = true;
    bool load_audio = true;
    bool load_chat = false;
    bool mask = false;
    double mask_area = 0.8;
    std::vector<ViewSpec> views;  // extracted from the resized frame when non-empty
    int target_fps = 1;
    int video_h = 32;
    int video_w = 32;
    int audio_rate = 16000;
    MfccConfig mfcc_cfg;
};

struct Dataset {
    std::vector<Sample> samples;
    std::unordered_map<std::string, std::size_t> by_id;

    const Sample& at(const std::string& sample_id) const;
    std::vector<RankSection> ranks_of(const std::vector<std::string>& ids) const;
};

Dataset build_dataset(const Manifest& mf, const DataOptions& opts);
DataOptions options_for_variant(const VariantSpec& variant, const nn::ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Training

enum class ClassWeighting { NONE, WEIGHTED_CE, UPSAMPLE };
ClassWeighting parse_class_weighting(const std::string& name);
std::string to_string(ClassWeighting w);

struct TrainConfig {
    double learning_rate = 3e-4;
    int batch_size = 8;
    int epochs = 20;
    int patience = 10;
    ClassWeighting class_weighting = ClassWeighting::NONE;
    std::uint64_t seed = 0;
    std::uint64_t init_seed = 0;
    bool use_kl = false;
    losses::KlLossConfig kl;
    bool finetune_chat = false;  // chat prior stays frozen during joint phases by default
};

struct LogRow {
    long long step = 0;
    double loss_ce = 0.0;
    double loss_kl = 0.0;
    double loss_rank = 0.0;
    double learning_rate = 0.0;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double val_weighted_precision = 0.0;
    double val_weighted_recall = 0.0;
    double val_weighted_f1 = 0.0;
};

struct TrainResult {
    nn::ParamStore best_params;
    nn::ParamStore last_params;
    std::vector<LogRow> log;
    std::vector<EpochMetrics> epochs;
    int best_epoch = -1;
    double best_val_f1 = -1.0;
};

// Graph of one sample under a variant; exposes what the losses need.
struct SampleGraph {
    ad::Var<double> logits;
    ad::Var<double> v_seq;
    ad::Var<double> a_seq;
    ad::Var<double> embedding;
    bool has_v = false;
    bool has_a = false;
    bool has_embedding = false;
};

SampleGraph build_sample_graph(nn::GraphContext<double>& ctx, const nn::ModelConfig& cfg,
                               const VariantSpec& variant, const Sample& sample, const nn::Vocab* vocab);

struct Prediction {
    nn::ClassDistribution dist;
    Vec embedding;  // empty unless the variant has a fused embedding
};

Prediction predict(nn::ParamStore& params, const nn::ModelConfig& cfg, const VariantSpec& variant,
                   const Sample& sample, const nn::Vocab* vocab, std::uint64_t init_seed);

eval::MetricsReport evaluate_subset(nn::ParamStore& params, const nn::ModelConfig& cfg,
                                    const VariantSpec& variant, const Dataset& data,
                                    const std::vector<std::string>& ids, const nn::Vocab* vocab,
                                    std::uint64_t init_seed);

// Resamples every minority class with replacement up to the majority count.
std::vector<std::string> upsample_minority(const std::vector<std::pair<std::string, RankSection>>& train,
                                           std::uint64_t seed);

// CE training of any classifier variant with epoch-end VAL selection.
TrainResult train_joint(nn::ParamStore& params, const nn::ModelConfig& cfg, const VariantSpec& variant,
                        const Dataset& data, const SplitAssignment& split, const TrainConfig& tcfg,
                        const nn::Vocab* vocab = nullptr);

enum class Branch { VIDEO, AUDIO };

// CE pretraining of one branch plus a temporary classification head.
TrainResult pretrain_unimodal(nn::ParamStore& params, const nn::ModelConfig& cfg, Branch branch,
                              const Dataset& data, const SplitAssignment& split,
                              const TrainConfig& tcfg);

struct RankingResult {
    std::vector<LogRow> log;
    double initial_mean_loss = 0.0;
    double final_mean_loss = 0.0;
};

// Margin-hinge training of one branch plus its scalar score head.
RankingResult pretrain_ranking(nn::ParamStore& params, const nn::ModelConfig& cfg, Branch branch,
                               const losses::PairBatch& pairs, const Dataset& data, const TrainConfig& tcfg,
                               const losses::RankingLossConfig& rank_cfg, int epochs);

// ---------------------------------------------------------------------------
// Run directory artifacts

void write_log_csv(const std::vector<LogRow>& log, const std::string& path);
void write_metrics_epoch_csv(const std::vector<EpochMetrics>& epochs, const std::string& path);

}  // namespace streamrank::train
