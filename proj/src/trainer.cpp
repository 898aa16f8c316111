#include "streamrank/trainer.hpp"

#include "streamrank/arrayio.hpp"
#include "streamrank/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace streamrank::train {

// ---------------------------------------------------------------------------
// Optimizer

void Adam::step(nn::ParamStore& params, const std::unordered_map<std::string, Mat>& grads,
                const std::function<bool(const std::string&)>& trainable) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.names.size(); ++i) {
        const auto& name = params.names[i];
        auto git = grads.find(name);
        if (git == grads.end()) continue;
        if (trainable && !trainable(name)) continue;
        const Mat& g = git->second;
        Mat& w = params.values[i];
        auto mit = m.find(name);
        if (mit == m.end()) {
            mit = m.emplace(name, Mat::Zero(w.rows(), w.cols())).first;
            v.emplace(name, Mat::Zero(w.rows(), w.cols()));
        }
        Mat& m1 = mit->second;
        Mat& m2 = v.at(name);
        m1 = beta1 * m1 + (1.0 - beta1) * g;
        m2 = beta2 * m2 + (1.0 - beta2) * g.cwiseProduct(g);
        w.array() -= lr * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + eps);
    }
}

// ---------------------------------------------------------------------------
// Variants

VariantSpec parse_variant(const std::string& name) {
    VariantSpec spec;
    spec.name = name;
    if (name == "LR") {
        spec.kind = VariantKind::FUSION;
    } else if (name == "LRV") {
        spec.kind = VariantKind::VIDEO_ONLY;
    } else if (name == "LRA") {
        spec.kind = VariantKind::AUDIO_ONLY;
    } else if (name == "LR_KL") {
        spec.kind = VariantKind::FUSION_KL;
    } else if (name == "LR_rank") {
        spec.kind = VariantKind::FUSION_RANK;
    } else if (name == "LR_mask") {
        spec.kind = VariantKind::FUSION_MASK;
    } else if (name == "LR_text_fc") {
        spec.kind = VariantKind::TEXT_FC;
    } else if (name == "LR_text_gru") {
        spec.kind = VariantKind::TEXT_GRU;
    } else if (name == "multiview") {
        spec.kind = VariantKind::MULTIVIEW;
    } else if (name == "chat_only") {
        spec.kind = VariantKind::CHAT_ONLY;
    } else if (name.rfind("view:", 0) == 0) {
        spec.kind = VariantKind::SINGLE_VIEW;
        spec.view_name = name.substr(5);
        view_by_name(spec.view_name);  // validates the name
    } else {
        throw std::runtime_error("unknown variant: " + name);
    }
    return spec;
}

std::vector<std::string> variant_names() {
    std::vector<std::string> names = {"LR",         "LRV",         "LRA",         "LR_KL",
                                      "LR_rank",    "LR_mask",     "LR_text_fc",  "LR_text_gru"};
    for (const auto& view : default_views()) names.push_back("view:" + view.name);
    names.push_back("multiview");
    return names;
}

// ---------------------------------------------------------------------------
// Dataset

const Sample& Dataset::at(const std::string& sample_id) const {
    auto it = by_id.find(sample_id);
    if (it == by_id.end()) throw std::runtime_error("unknown sample_id: " + sample_id);
    return samples[it->second];
}

std::vector<RankSection> Dataset::ranks_of(const std::vector<std::string>& ids) const {
    std::vector<RankSection> ranks;
    ranks.reserve(ids.size());
    for (const auto& id : ids) ranks.push_back(at(id).rank);
    return ranks;
}

Dataset build_dataset(const Manifest& mf, const DataOptions& opts) {
    Dataset data;
    data.samples.reserve(mf.records.size());
    for (const auto& rec : mf.records) {
        Sample s;
        s.sample_id = rec.sample_id;
        s.user_id = rec.user_id;
        s.rank = rec.rank;

        if (opts.load_video || !opts.views.empty()) {
            VideoClip clip = load_video(mf.resolve(rec.video_path));
            if (clip.fps <= 0) clip.fps = rec.native_fps;
            if (clip.fps > opts.target_fps) clip = downsample_frames(clip, opts.target_fps);
            if (clip.h != opts.video_h || clip.w != opts.video_w) {
                clip = resize_frames(clip, opts.video_w, opts.video_h);
            }
            for (const auto& view : opts.views) s.views.push_back(extract_view(clip, view));
            if (opts.load_video) {
                s.video = opts.mask ? apply_center_mask(clip, opts.mask_area) : std::move(clip);
            }
        }
        if (opts.load_audio) {
            AudioTrack track = load_audio(mf.resolve(rec.audio_path));
            if (track.sample_rate != opts.audio_rate) track = resample_audio(track, opts.audio_rate);
            s.mfcc = compute_mfcc(track, opts.mfcc_cfg).coeffs;
        }
        if (opts.load_chat) {
            auto it = mf.chats.find(rec.user_id);
            if (it != mf.chats.end()) s.chat_messages = it->second.messages;
        }
        data.by_id[s.sample_id] = data.samples.size();
        data.samples.push_back(std::move(s));
    }
    return data;
}

DataOptions options_for_variant(const VariantSpec& variant, const nn::ModelConfig& cfg) {
    DataOptions opts;
    opts.load_video = variant.uses_video();
    opts.load_audio = variant.uses_audio();
    opts.load_chat = variant.uses_chat();
    opts.mask = variant.uses_mask();
    opts.video_h = cfg.video_h;
    opts.video_w = cfg.video_w;
    opts.mfcc_cfg.n_coeffs = cfg.audio_coeffs;
    if (variant.kind == VariantKind::SINGLE_VIEW) {
        opts.views = {view_by_name(variant.view_name)};
    } else if (variant.kind == VariantKind::MULTIVIEW) {
        opts.views = default_views();
    }
    return opts;
}

// ---------------------------------------------------------------------------
// Graphs

SampleGraph build_sample_graph(nn::GraphContext<double>& ctx, const nn::ModelConfig& cfg,
                               const VariantSpec& variant, const Sample& sample, const nn::Vocab* vocab) {
    auto& tape = ctx.tape();
    SampleGraph g;

    auto make_video = [&]() {
        auto x = ad::constant(tape, nn::clip_to_matrix(sample.video));
        g.v_seq = nn::video_branch(ctx, cfg, x, sample.video.t, sample.video.h, sample.video.w);
        g.has_v = true;
    };
    auto make_audio = [&]() {
        auto x = ad::constant(tape, sample.mfcc);
        g.a_seq = nn::audio_branch(ctx, cfg, x);
        g.has_a = true;
    };
    auto make_prior = [&]() {
        if (vocab == nullptr) throw std::runtime_error("chat variant requires a vocabulary");
        return nn::chat_prior_graph(ctx, cfg, vocab->encode(sample.chat_messages, cfg.chat_max_tokens));
    };

    switch (variant.kind) {
        case VariantKind::FUSION:
        case VariantKind::FUSION_KL:
        case VariantKind::FUSION_RANK:
        case VariantKind::FUSION_MASK: {
            make_video();
            make_audio();
            auto fused = nn::fusion_head(ctx, cfg, g.v_seq, g.a_seq);
            g.logits = fused.logits;
            g.embedding = fused.embedding;
            g.has_embedding = true;
            break;
        }
        case VariantKind::VIDEO_ONLY: {
            make_video();
            g.logits = nn::unimodal_logits(ctx, cfg, g.v_seq, "uni.video.");
            break;
        }
        case VariantKind::AUDIO_ONLY: {
            make_audio();
            g.logits = nn::unimodal_logits(ctx, cfg, g.a_seq, "uni.audio.");
            break;
        }
        case VariantKind::TEXT_FC: {
            make_video();
            make_audio();
            auto fused = nn::fusion_prior_fc(ctx, cfg, g.v_seq, g.a_seq, make_prior());
            g.logits = fused.logits;
            g.embedding = fused.embedding;
            g.has_embedding = true;
            break;
        }
        case VariantKind::TEXT_GRU: {
            make_video();
            make_audio();
            auto fused = nn::fusion_prior_gru(ctx, cfg, g.v_seq, g.a_seq, make_prior());
            g.logits = fused.logits;
            g.embedding = fused.embedding;
            g.has_embedding = true;
            break;
        }
        case VariantKind::SINGLE_VIEW:
        case VariantKind::MULTIVIEW: {
            if (sample.views.size() != cfg.views.size() || cfg.views.empty()) {
                throw std::runtime_error("view-count mismatch between sample and model config");
            }
            std::vector<ad::Var<double>> seqs;
            seqs.reserve(sample.views.size());
            for (std::size_t i = 0; i < sample.views.size(); ++i) {
                const auto& clip = sample.views[i];
                auto x = ad::constant(tape, nn::clip_to_matrix(clip));
                seqs.push_back(
                    nn::video_branch(ctx, cfg, x, clip.t, clip.h, clip.w, "view." + cfg.views[i].name + "."));
            }
            auto fused = nn::multiview_head(ctx, cfg, seqs);
            g.logits = fused.logits;
            break;
        }
        case VariantKind::CHAT_ONLY: {
            g.logits = nn::chat_logits_graph(ctx, cfg, make_prior());
            break;
        }
    }
    return g;
}

Prediction predict(nn::ParamStore& params, const nn::ModelConfig& cfg, const VariantSpec& variant,
                   const Sample& sample, const nn::Vocab* vocab, std::uint64_t init_seed) {
    ad::Tape<double> tape;
    nn::GraphContext<double> ctx(tape, params, init_seed);
    SampleGraph g = build_sample_graph(ctx, cfg, variant, sample, vocab);
    Prediction p;
    p.dist.probs = nn::softmax_vec(g.logits.value().row(0).transpose());
    if (g.has_embedding) p.embedding = g.embedding.value().row(0).transpose();
    return p;
}

eval::MetricsReport evaluate_subset(nn::ParamStore& params, const nn::ModelConfig& cfg,
                                    const VariantSpec& variant, const Dataset& data,
                                    const std::vector<std::string>& ids, const nn::Vocab* vocab,
                                    std::uint64_t init_seed) {
    std::vector<std::pair<RankSection, RankSection>> predictions;
    predictions.reserve(ids.size());
    for (const auto& id : ids) {
        const Sample& s = data.at(id);
        const Prediction p = predict(params, cfg, variant, s, vocab, init_seed);
        Eigen::Index arg = 0;
        p.dist.probs.maxCoeff(&arg);
        predictions.emplace_back(s.rank, rank_from_index(static_cast<int>(arg)));
    }
    return eval::weighted_prf(eval::confusion(predictions));
}

// ---------------------------------------------------------------------------
// Training loops

ClassWeighting parse_class_weighting(const std::string& name) {
    if (name == "none") return ClassWeighting::NONE;
    if (name == "weighted_ce") return ClassWeighting::WEIGHTED_CE;
    if (name == "upsample") return ClassWeighting::UPSAMPLE;
    throw std::runtime_error("unknown class_weighting: " + name +
                             " (weighted_ce and upsample are alternatives and cannot be combined)");
}

std::string to_string(ClassWeighting w) {
    switch (w) {
        case ClassWeighting::NONE: return "none";
        case ClassWeighting::WEIGHTED_CE: return "weighted_ce";
        case ClassWeighting::UPSAMPLE: return "upsample";
    }
    throw std::runtime_error("bad ClassWeighting");
}

std::vector<std::string> upsample_minority(const std::vector<std::pair<std::string, RankSection>>& train,
                                           std::uint64_t seed) {
    std::array<std::vector<std::string>, kNumClasses> by_class;
    for (const auto& [id, rank] : train) by_class[static_cast<std::size_t>(class_index(rank))].push_back(id);

    int n_present = 0;
    std::size_t target = 0;
    for (const auto& ids : by_class) {
        if (!ids.empty()) ++n_present;
        target = std::max(target, ids.size());
    }
    if (n_present <= 1) {
        std::vector<std::string> out;
        out.reserve(train.size());
        for (const auto& [id, rank] : train) out.push_back(id);
        return out;
    }

    Rng rng = derive_rng(seed, "upsample");
    std::vector<std::string> out;
    for (const auto& ids : by_class) {
        if (ids.empty()) continue;
        out.insert(out.end(), ids.begin(), ids.end());
        for (std::size_t k = ids.size(); k < target; ++k) {
            out.push_back(ids[rng.uniform_int(ids.size())]);
        }
    }
    rng.shuffle(out);
    return out;
}

namespace {

void check_finite_loss(double ce, double kl, double rank, long long step) {
    if (std::isnan(ce) || std::isnan(kl) || std::isnan(rank) || std::isinf(ce) || std::isinf(kl) ||
        std::isinf(rank)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step << ": loss_ce=" << ce << " loss_kl=" << kl
            << " loss_rank=" << rank;
        throw std::runtime_error(msg.str());
    }
}

std::vector<std::string> sorted_ids(const SplitAssignment& split, Subset subset) {
    auto ids = split.ids(subset);
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

TrainResult train_joint(nn::ParamStore& params, const nn::ModelConfig& cfg, const VariantSpec& variant,
                        const Dataset& data, const SplitAssignment& split, const TrainConfig& tcfg,
                        const nn::Vocab* vocab) {
    if (tcfg.learning_rate <= 0) throw std::runtime_error("learning_rate must be positive");
    if (tcfg.batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
    const std::vector<std::string> train_ids = sorted_ids(split, Subset::TRAIN);
    const std::vector<std::string> val_ids = sorted_ids(split, Subset::VAL);
    if (train_ids.empty()) throw std::runtime_error("empty TRAIN subset");

    std::vector<std::pair<std::string, RankSection>> train_ranked;
    train_ranked.reserve(train_ids.size());
    for (const auto& id : train_ids) train_ranked.emplace_back(id, data.at(id).rank);

    Vec weights = Vec::Ones(kNumClasses);
    if (tcfg.class_weighting == ClassWeighting::WEIGHTED_CE) {
        std::array<int, kNumClasses> counts{};
        for (const auto& [id, rank] : train_ranked) ++counts[static_cast<std::size_t>(class_index(rank))];
        for (auto& c : counts) c = std::max(c, 1);
        weights = losses::inverse_frequency_weights(counts);
    }
    std::vector<std::string> epoch_pool = tcfg.class_weighting == ClassWeighting::UPSAMPLE
                                              ? upsample_minority(train_ranked, tcfg.seed)
                                              : train_ids;

    std::function<bool(const std::string&)> trainable;
    if (variant.uses_chat() && variant.kind != VariantKind::CHAT_ONLY && !tcfg.finetune_chat) {
        trainable = [](const std::string& name) { return name.rfind("chat.", 0) != 0; };
    }

    Adam adam;
    adam.lr = tcfg.learning_rate;
    TrainResult result;
    long long step = 0;
    int stale_epochs = 0;

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::vector<std::string> order = epoch_pool;
        derive_rng(tcfg.seed, "epoch:" + std::to_string(epoch)).shuffle(order);

        double epoch_loss = 0.0;
        long long epoch_samples = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            const double bn = static_cast<double>(stop - start);
            std::unordered_map<std::string, Mat> grads;
            double batch_ce = 0.0;
            double batch_kl = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                ad::Tape<double> tape;
                nn::GraphContext<double> ctx(tape, params, tcfg.init_seed);
                SampleGraph g = build_sample_graph(ctx, cfg, variant, data.at(order[i]), vocab);
                const RankSection label = data.at(order[i]).rank;
                auto loss = tcfg.class_weighting == ClassWeighting::WEIGHTED_CE
                                ? losses::weighted_cross_entropy_graph(g.logits, label, weights)
                                : losses::cross_entropy_graph(g.logits, label);
                batch_ce += loss.scalar();
                if (tcfg.use_kl && g.has_v && g.has_a) {
                    auto kl = losses::kl_alignment_graph(g.v_seq, g.a_seq, tcfg.kl);
                    batch_kl += kl.scalar();
                    loss = ad::add(loss, kl);
                }
                auto total = ad::affine(loss, 1.0 / bn, 0.0);
                tape.backward(total);
                ctx.accumulate_grads(grads);
            }
            check_finite_loss(batch_ce / bn, batch_kl / bn, 0.0, step);
            adam.step(params, grads, trainable);
            result.log.push_back({step, batch_ce / bn, batch_kl / bn, 0.0, adam.lr});
            epoch_loss += batch_ce + batch_kl;
            epoch_samples += static_cast<long long>(stop - start);
            ++step;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = epoch_samples > 0 ? epoch_loss / static_cast<double>(epoch_samples) : 0.0;
        if (!val_ids.empty()) {
            const auto val = evaluate_subset(params, cfg, variant, data, val_ids, vocab, tcfg.init_seed);
            em.val_weighted_precision = val.weighted_precision;
            em.val_weighted_recall = val.weighted_recall;
            em.val_weighted_f1 = val.weighted_f1;
        }
        result.epochs.push_back(em);

        if (val_ids.empty()) {
            result.best_params = params;
            result.best_epoch = epoch;
            result.best_val_f1 = 0.0;
        } else if (em.val_weighted_f1 > result.best_val_f1) {
            result.best_params = params;
            result.best_epoch = epoch;
            result.best_val_f1 = em.val_weighted_f1;
            stale_epochs = 0;
        } else if (++stale_epochs >= tcfg.patience) {
            break;
        }
    }
    result.last_params = params;
    if (result.best_epoch < 0) result.best_params = params;
    return result;
}

TrainResult pretrain_unimodal(nn::ParamStore& params, const nn::ModelConfig& cfg, Branch branch,
                              const Dataset& data, const SplitAssignment& split, const TrainConfig& tcfg) {
    VariantSpec variant;
    variant.kind = branch == Branch::VIDEO ? VariantKind::VIDEO_ONLY : VariantKind::AUDIO_ONLY;
    variant.name = branch == Branch::VIDEO ? "LRV" : "LRA";
    return train_joint(params, cfg, variant, data, split, tcfg, nullptr);
}

RankingResult pretrain_ranking(nn::ParamStore& params, const nn::ModelConfig& cfg, Branch branch,
                               const losses::PairBatch& pairs, const Dataset& data, const TrainConfig& tcfg,
                               const losses::RankingLossConfig& rank_cfg, int epochs) {
    if (pairs.pairs.empty()) throw std::runtime_error("empty pair batch");
    const std::string prefix = branch == Branch::VIDEO ? "score.video." : "score.audio.";

    auto branch_score = [&](nn::GraphContext<double>& ctx, const Sample& s) {
        if (branch == Branch::VIDEO) {
            auto x = ad::constant(ctx.tape(), nn::clip_to_matrix(s.video));
            auto seq = nn::video_branch(ctx, cfg, x, s.video.t, s.video.h, s.video.w);
            return nn::score_head_graph(ctx, seq, prefix);
        }
        auto x = ad::constant(ctx.tape(), s.mfcc);
        auto seq = nn::audio_branch(ctx, cfg, x);
        return nn::score_head_graph(ctx, seq, prefix);
    };

    auto mean_loss = [&]() {
        double sum = 0.0;
        for (const auto& p : pairs.pairs) {
            ad::Tape<double> tape;
            nn::GraphContext<double> ctx(tape, params, tcfg.init_seed);
            const double s1 = branch_score(ctx, data.at(p.first)).scalar();
            const double s2 = branch_score(ctx, data.at(p.second)).scalar();
            sum += losses::pairwise_ranking_loss(s1, s2, p.y, rank_cfg.margin);
        }
        return sum / static_cast<double>(pairs.pairs.size());
    };

    RankingResult result;
    result.initial_mean_loss = mean_loss();

    Adam adam;
    adam.lr = tcfg.learning_rate;
    long long step = 0;
    std::vector<std::size_t> order(pairs.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        derive_rng(tcfg.seed, "rank_epoch:" + std::to_string(epoch)).shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
            const double bn = static_cast<double>(stop - start);
            std::unordered_map<std::string, Mat> grads;
            double batch_loss = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                const auto& p = pairs.pairs[order[i]];
                ad::Tape<double> tape;
                nn::GraphContext<double> ctx(tape, params, tcfg.init_seed);
                auto s1 = branch_score(ctx, data.at(p.first));
                auto s2 = branch_score(ctx, data.at(p.second));
                auto hinge = losses::ranking_loss_graph(s1, s2, p.y, rank_cfg.margin);
                batch_loss += hinge.scalar();
                tape.backward(ad::affine(hinge, 1.0 / bn, 0.0));
                ctx.accumulate_grads(grads);
            }
            check_finite_loss(0.0, 0.0, batch_loss / bn, step);
            adam.step(params, grads, {});
            result.log.push_back({step, 0.0, 0.0, batch_loss / bn, adam.lr});
            ++step;
        }
    }
    result.final_mean_loss = epochs > 0 ? mean_loss() : result.initial_mean_loss;
    return result;
}

// ---------------------------------------------------------------------------
// Run directory artifacts

void write_log_csv(const std::vector<LogRow>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write log: " + path);
    out.precision(17);
    out << "step,loss_ce,loss_kl,loss_rank,learning_rate\n";
    for (const auto& row : log) {
        out << row.step << "," << row.loss_ce << "," << row.loss_kl << "," << row.loss_rank << ","
            << row.learning_rate << "\n";
    }
}

void write_metrics_epoch_csv(const std::vector<EpochMetrics>& epochs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write epoch metrics: " + path);
    out.precision(17);
    out << "epoch,train_loss,val_weighted_precision,val_weighted_recall,val_weighted_f1\n";
    for (const auto& em : epochs) {
        out << em.epoch << "," << em.train_loss << "," << em.val_weighted_precision << ","
            << em.val_weighted_recall << "," << em.val_weighted_f1 << "\n";
    }
}

}  // namespace streamrank::train
