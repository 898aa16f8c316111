#pragma once

#include "streamrank/autodiff.hpp"
#include "streamrank/media.hpp"
#include "streamrank/params.hpp"
#include "streamrank/types.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace streamrank::nn {

// ---------------------------------------------------------------------------
// Configuration

struct ModelConfig {
    // video input geometry (frames, height, width, channels)
    int video_t = 16;
    int video_h = 32;
    int video_w = 32;
    int video_c = 3;
    // audio input: MFCC frames x coefficients
    int audio_coeffs = 20;

    int hidden_dim = 16;  // branch output width (bidirectional concat), even
    int seq_len = 30;     // fixed step count of every BranchOutput
    int n_classes = kNumClasses;
    int recurrent_layers = 1;

    // video front-end
    int video_channels = 6;
    int video_kt = 3;  // temporal kernel (valid)
    int video_k = 3;   // spatial kernel (same padding)
    int video_stride = 2;
    int pool_zones = 2;  // spatial pooling grid per side

    // audio front-end
    int audio_channels = 12;
    int audio_kernel = 5;
    int audio_stride = 4;
    int audio_res_kernel = 3;

    // chat prior
    int prior_dim = 8;  // even
    int chat_embed_dim = 8;
    int chat_layers = 2;
    int chat_max_tokens = 160;
    int vocab_size = 0;  // set once a vocabulary is built

    std::vector<ViewSpec> views;  // non-empty in multiview mode

    static ModelConfig desk();
    static ModelConfig paper_scale();
    void validate() const;
};

std::string config_to_json(const ModelConfig& cfg);
std::uint64_t config_hash(const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Geometry. Row layout for video tensors: row (t*H + y)*W + x, one channel
// per column. Maps are cached per geometry; lookups are thread-safe.

struct ConvGeom {
    Eigen::Index t_out = 0, h_out = 0, w_out = 0;
    Eigen::Index taps = 0;
    std::shared_ptr<const std::vector<Eigen::Index>> map;
};

// 3D convolution support: valid over time, same-padded over space.
ConvGeom conv3d_geom(int t, int h, int w, int kt, int k, int stride);
// 1D convolution support: valid, strided.
ConvGeom conv1d_geom(int n, int k, int stride);
// Adaptive mean-pool groups mapping n_in rows onto n_out rows.
std::vector<std::pair<Eigen::Index, Eigen::Index>> adaptive_groups(Eigen::Index n_in, Eigen::Index n_out);
// Per-step z x z spatial zone index sets, ordered (t, zone_y, zone_x).
std::shared_ptr<const std::vector<std::vector<Eigen::Index>>> zone_groups(int t, int h, int w, int z);

// ---------------------------------------------------------------------------
// Layers

template <typename Scalar>
ad::Var<Scalar> affine_layer(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x,
                             Eigen::Index out_dim) {
    auto w = ctx.param(prefix + "W", x.cols(), out_dim, Init::XAVIER);
    auto b = ctx.param(prefix + "b", 1, out_dim, Init::ZERO);
    return ad::add_rowvec(ad::matmul(x, w), b);
}

template <typename Scalar>
ad::Var<Scalar> conv_layer(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x,
                           const ConvGeom& geom, Eigen::Index out_ch) {
    auto cols = ad::unfold(x, geom.map, geom.taps);
    auto w = ctx.param(prefix + "W", geom.taps * x.cols(), out_ch, Init::XAVIER);
    auto b = ctx.param(prefix + "b", 1, out_ch, Init::ZERO);
    return ad::add_rowvec(ad::matmul(cols, w), b);
}

// Two same-padded spatial convolutions with identity skip, per time step.
template <typename Scalar>
ad::Var<Scalar> res2d_layer(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x, int t,
                            int h, int w, int k) {
    const ConvGeom geom = conv3d_geom(t, h, w, 1, k, 1);
    auto y = ad::relu(conv_layer(ctx, prefix + "conv1.", x, geom, x.cols()));
    y = conv_layer(ctx, prefix + "conv2.", y, geom, x.cols());
    return ad::relu(ad::add(x, y));
}

// Two valid 1D convolutions with a center-cropped identity skip.
template <typename Scalar>
ad::Var<Scalar> res1d_layer(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x, int k) {
    const auto n = static_cast<int>(x.rows());
    const ConvGeom g1 = conv1d_geom(n, k, 1);
    auto y = ad::relu(conv_layer(ctx, prefix + "conv1.", x, g1, x.cols()));
    const ConvGeom g2 = conv1d_geom(static_cast<int>(y.rows()), k, 1);
    y = conv_layer(ctx, prefix + "conv2.", y, g2, x.cols());
    const Eigen::Index crop = (x.rows() - y.rows()) / 2;
    auto skip = ad::slice_rows(x, crop, y.rows());
    return ad::relu(ad::add(skip, y));
}

template <typename Scalar>
struct SeqOut {
    ad::Var<Scalar> seq;          // [S, 2*hidden_half]
    ad::Var<Scalar> final_state;  // [1, 2*hidden_half]: forward last, backward first
};

template <typename Scalar>
ad::Var<Scalar> gru_cell(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x,
                         ad::Var<Scalar> h, Eigen::Index hidden) {
    const auto in = x.cols();
    auto wr = ctx.param(prefix + "Wr", in, hidden, Init::XAVIER);
    auto wz = ctx.param(prefix + "Wz", in, hidden, Init::XAVIER);
    auto wn = ctx.param(prefix + "Wn", in, hidden, Init::XAVIER);
    auto ur = ctx.param(prefix + "Ur", hidden, hidden, Init::XAVIER);
    auto uz = ctx.param(prefix + "Uz", hidden, hidden, Init::XAVIER);
    auto un = ctx.param(prefix + "Un", hidden, hidden, Init::XAVIER);
    auto br = ctx.param(prefix + "br", 1, hidden, Init::ZERO);
    auto bz = ctx.param(prefix + "bz", 1, hidden, Init::ZERO);
    auto bn = ctx.param(prefix + "bn", 1, hidden, Init::ZERO);

    auto r = ad::sigmoid(ad::add(ad::add(ad::matmul(x, wr), ad::matmul(h, ur)), br));
    auto z = ad::sigmoid(ad::add(ad::add(ad::matmul(x, wz), ad::matmul(h, uz)), bz));
    auto n = ad::tanh_of(ad::add(ad::add(ad::matmul(x, wn), ad::cmul(r, ad::matmul(h, un))), bn));
    return ad::add(ad::cmul(z, h), ad::cmul(ad::affine(z, Scalar(-1), Scalar(1)), n));
}

template <typename Scalar>
SeqOut<Scalar> bigru(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x,
                     Eigen::Index hidden_half) {
    auto& tape = ctx.tape();
    const auto s = x.rows();
    MatrixX<Scalar> zero = MatrixX<Scalar>::Zero(1, hidden_half);

    std::vector<ad::Var<Scalar>> fwd(static_cast<std::size_t>(s));
    auto h = ad::constant(tape, zero);
    for (Eigen::Index t = 0; t < s; ++t) {
        h = gru_cell(ctx, prefix + "fw.", ad::row(x, t), h, hidden_half);
        fwd[static_cast<std::size_t>(t)] = h;
    }
    std::vector<ad::Var<Scalar>> bwd(static_cast<std::size_t>(s));
    h = ad::constant(tape, zero);
    for (Eigen::Index t = s - 1; t >= 0; --t) {
        h = gru_cell(ctx, prefix + "bw.", ad::row(x, t), h, hidden_half);
        bwd[static_cast<std::size_t>(t)] = h;
    }
    std::vector<ad::Var<Scalar>> rows(static_cast<std::size_t>(s));
    for (Eigen::Index t = 0; t < s; ++t) {
        rows[static_cast<std::size_t>(t)] =
            ad::concat_cols(fwd[static_cast<std::size_t>(t)], bwd[static_cast<std::size_t>(t)]);
    }
    SeqOut<Scalar> out;
    out.seq = ad::vstack(tape, rows);
    out.final_state = ad::concat_cols(fwd.back(), bwd.front());
    return out;
}

template <typename Scalar>
SeqOut<Scalar> bigru_stack(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x,
                           Eigen::Index hidden_half, int layers) {
    SeqOut<Scalar> out;
    for (int l = 0; l < layers; ++l) {
        out = bigru(ctx, prefix + std::to_string(l) + ".", x, hidden_half);
        x = out.seq;
    }
    return out;
}

template <typename Scalar>
std::pair<ad::Var<Scalar>, ad::Var<Scalar>> lstm_cell(GraphContext<Scalar>& ctx, const std::string& prefix,
                                                      ad::Var<Scalar> x, ad::Var<Scalar> h, ad::Var<Scalar> c,
                                                      Eigen::Index hidden) {
    const auto in = x.cols();
    auto gate = [&](const char* g) {
        auto w = ctx.param(prefix + "W" + g, in, hidden, Init::XAVIER);
        auto u = ctx.param(prefix + "U" + g, hidden, hidden, Init::XAVIER);
        auto b = ctx.param(prefix + "b" + g, 1, hidden, Init::ZERO);
        return ad::add(ad::add(ad::matmul(x, w), ad::matmul(h, u)), b);
    };
    auto i = ad::sigmoid(gate("i"));
    auto f = ad::sigmoid(gate("f"));
    auto o = ad::sigmoid(gate("o"));
    auto g = ad::tanh_of(gate("g"));
    auto c_new = ad::add(ad::cmul(f, c), ad::cmul(i, g));
    auto h_new = ad::cmul(o, ad::tanh_of(c_new));
    return {h_new, c_new};
}

template <typename Scalar>
SeqOut<Scalar> bilstm(GraphContext<Scalar>& ctx, const std::string& prefix, ad::Var<Scalar> x,
                      Eigen::Index hidden_half) {
    auto& tape = ctx.tape();
    const auto s = x.rows();
    MatrixX<Scalar> zero = MatrixX<Scalar>::Zero(1, hidden_half);

    std::vector<ad::Var<Scalar>> fwd(static_cast<std::size_t>(s));
    auto h = ad::constant(tape, zero);
    auto c = ad::constant(tape, zero);
    for (Eigen::Index t = 0; t < s; ++t) {
        std::tie(h, c) = lstm_cell(ctx, prefix + "fw.", ad::row(x, t), h, c, hidden_half);
        fwd[static_cast<std::size_t>(t)] = h;
    }
    std::vector<ad::Var<Scalar>> bwd(static_cast<std::size_t>(s));
    h = ad::constant(tape, zero);
    c = ad::constant(tape, zero);
    for (Eigen::Index t = s - 1; t >= 0; --t) {
        std::tie(h, c) = lstm_cell(ctx, prefix + "bw.", ad::row(x, t), h, c, hidden_half);
        bwd[static_cast<std::size_t>(t)] = h;
    }
    std::vector<ad::Var<Scalar>> rows(static_cast<std::size_t>(s));
    for (Eigen::Index t = 0; t < s; ++t) {
        rows[static_cast<std::size_t>(t)] =
            ad::concat_cols(fwd[static_cast<std::size_t>(t)], bwd[static_cast<std::size_t>(t)]);
    }
    SeqOut<Scalar> out;
    out.seq = ad::vstack(tape, rows);
    out.final_state = ad::concat_cols(fwd.back(), bwd.front());
    return out;
}

// ---------------------------------------------------------------------------
// Branch graphs. Video tensors arrive as [T*H*W, C] matrices scaled to [0,1].

// Spatio-temporal front-end: per-step features before any temporal mixing.
// Output: [T - kt + 1, zones^2 * video_channels].
template <typename Scalar>
ad::Var<Scalar> video_frontend(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> video,
                               int t, int h, int w, const std::string& prefix = "video.") {
    if (video.rows() != static_cast<Eigen::Index>(t) * h * w) {
        throw std::runtime_error("video shape mismatch: rows != t*h*w");
    }
    if (t < cfg.video_kt) throw std::runtime_error("video too short for temporal kernel");
    const ConvGeom g1 = conv3d_geom(t, h, w, cfg.video_kt, cfg.video_k, cfg.video_stride);
    auto x = ad::relu(conv_layer(ctx, prefix + "conv1.", video, g1, cfg.video_channels));
    x = res2d_layer(ctx, prefix + "res1.", x, static_cast<int>(g1.t_out), static_cast<int>(g1.h_out),
                    static_cast<int>(g1.w_out), cfg.video_k);
    auto zones = ad::gather_mean_rows(
        x, zone_groups(static_cast<int>(g1.t_out), static_cast<int>(g1.h_out), static_cast<int>(g1.w_out),
                       cfg.pool_zones));
    return ad::fold_rows(zones, static_cast<Eigen::Index>(cfg.pool_zones) * cfg.pool_zones);
}

template <typename Scalar>
ad::Var<Scalar> video_branch(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> video, int t,
                             int h, int w, const std::string& prefix = "video.") {
    auto feats = video_frontend(ctx, cfg, video, t, h, w, prefix);
    auto steps = ad::group_mean_rows(feats, adaptive_groups(feats.rows(), cfg.seq_len));
    return bigru_stack(ctx, prefix + "gru", steps, cfg.hidden_dim / 2, cfg.recurrent_layers).seq;
}

// Residual 1D front-end over MFCC frames: [N', audio_channels].
template <typename Scalar>
ad::Var<Scalar> audio_frontend(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> mfcc,
                               const std::string& prefix = "audio.") {
    if (mfcc.cols() != cfg.audio_coeffs) throw std::runtime_error("mfcc coefficient count mismatch");
    const int min_frames = cfg.audio_kernel + 2 * (cfg.audio_res_kernel - 1);
    if (mfcc.rows() < min_frames) throw std::runtime_error("audio too short for front-end kernels");
    const ConvGeom g1 = conv1d_geom(static_cast<int>(mfcc.rows()), cfg.audio_kernel, cfg.audio_stride);
    auto x = ad::relu(conv_layer(ctx, prefix + "conv1.", mfcc, g1, cfg.audio_channels));
    return res1d_layer(ctx, prefix + "res1.", x, cfg.audio_res_kernel);
}

template <typename Scalar>
ad::Var<Scalar> audio_branch(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> mfcc,
                             const std::string& prefix = "audio.") {
    auto feats = audio_frontend(ctx, cfg, mfcc, prefix);
    auto steps = ad::group_mean_rows(feats, adaptive_groups(feats.rows(), cfg.seq_len));
    return bigru_stack(ctx, prefix + "gru", steps, cfg.hidden_dim / 2, cfg.recurrent_layers).seq;
}

// ---------------------------------------------------------------------------
// Heads

template <typename Scalar>
struct FusionGraph {
    ad::Var<Scalar> logits;     // [1, n_classes]
    ad::Var<Scalar> embedding;  // [1, hidden_dim], pre-softmax fused vector
};

// Per-step [a_t ; v_t] concatenation, fusion recurrent layer, affine head.
template <typename Scalar>
FusionGraph<Scalar> fusion_head(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> v_seq,
                                ad::Var<Scalar> a_seq) {
    if (v_seq.rows() != a_seq.rows()) throw std::runtime_error("branch seq_len mismatch");
    auto x = ad::concat_cols(a_seq, v_seq);
    auto f = bigru(ctx, "fusion.gru0.", x, cfg.hidden_dim / 2);
    FusionGraph<Scalar> out;
    out.embedding = f.final_state;
    out.logits = affine_layer(ctx, "fusion.fc.", f.final_state, cfg.n_classes);
    return out;
}

template <typename Scalar>
ad::Var<Scalar> unimodal_logits(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> seq,
                                const std::string& prefix) {
    return affine_layer(ctx, prefix + "fc.", ad::mean_rows(seq), cfg.n_classes);
}

template <typename Scalar>
ad::Var<Scalar> score_head_graph(GraphContext<Scalar>& ctx, ad::Var<Scalar> seq, const std::string& prefix) {
    return affine_layer(ctx, prefix + "fc.", ad::mean_rows(seq), 1);
}

// Token ids -> embedding rows -> multilayer bidirectional LSTM -> mean pool.
// Empty input returns the learned null-prior parameter.
template <typename Scalar>
ad::Var<Scalar> chat_prior_graph(GraphContext<Scalar>& ctx, const ModelConfig& cfg,
                                 const std::vector<Eigen::Index>& token_ids) {
    if (token_ids.empty()) return ctx.param("chat.null_prior", 1, cfg.prior_dim, Init::ZERO);
    if (cfg.vocab_size <= 0) throw std::runtime_error("vocab_size not set in ModelConfig");
    auto table = ctx.param("chat.embed", cfg.vocab_size, cfg.chat_embed_dim, Init::XAVIER);
    auto x = ad::gather_rows(table, token_ids);
    SeqOut<Scalar> enc;
    for (int l = 0; l < cfg.chat_layers; ++l) {
        enc = bilstm(ctx, "chat.lstm" + std::to_string(l) + ".", x, cfg.prior_dim / 2);
        x = enc.seq;
    }
    return ad::mean_rows(x);
}

template <typename Scalar>
ad::Var<Scalar> chat_logits_graph(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> prior) {
    return affine_layer(ctx, "chat.fc.", prior, cfg.n_classes);
}

// Prior concatenated with the fused embedding before the final affine.
template <typename Scalar>
FusionGraph<Scalar> fusion_prior_fc(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> v_seq,
                                    ad::Var<Scalar> a_seq, ad::Var<Scalar> prior) {
    if (v_seq.rows() != a_seq.rows()) throw std::runtime_error("branch seq_len mismatch");
    auto x = ad::concat_cols(a_seq, v_seq);
    auto f = bigru(ctx, "fusion.gru0.", x, cfg.hidden_dim / 2);
    FusionGraph<Scalar> out;
    out.embedding = f.final_state;
    out.logits = affine_layer(ctx, "fusion.fc_prior.", ad::concat_cols(f.final_state, prior), cfg.n_classes);
    return out;
}

// Prior repeated across steps and concatenated with [a_t ; v_t] pre-fusion.
template <typename Scalar>
FusionGraph<Scalar> fusion_prior_gru(GraphContext<Scalar>& ctx, const ModelConfig& cfg, ad::Var<Scalar> v_seq,
                                     ad::Var<Scalar> a_seq, ad::Var<Scalar> prior) {
    if (v_seq.rows() != a_seq.rows()) throw std::runtime_error("branch seq_len mismatch");
    std::vector<ad::Var<Scalar>> rep(static_cast<std::size_t>(v_seq.rows()), prior);
    auto prior_steps = ad::vstack(ctx.tape(), rep);
    auto x = ad::concat_cols(ad::concat_cols(a_seq, v_seq), prior_steps);
    auto f = bigru(ctx, "fusion_tg.gru0.", x, cfg.hidden_dim / 2);
    FusionGraph<Scalar> out;
    out.embedding = f.final_state;
    out.logits = affine_layer(ctx, "fusion_tg.fc.", f.final_state, cfg.n_classes);
    return out;
}

// One independent stream per view; per-step concatenation; fusion as usual.
template <typename Scalar>
FusionGraph<Scalar> multiview_head(GraphContext<Scalar>& ctx, const ModelConfig& cfg,
                                   const std::vector<ad::Var<Scalar>>& view_seqs) {
    if (view_seqs.empty()) throw std::runtime_error("multiview requires at least one view");
    auto x = view_seqs.front();
    for (std::size_t i = 1; i < view_seqs.size(); ++i) x = ad::concat_cols(x, view_seqs[i]);
    auto f = bigru(ctx, "mv.gru0.", x, cfg.hidden_dim / 2);
    FusionGraph<Scalar> out;
    out.embedding = f.final_state;
    out.logits = affine_layer(ctx, "mv.fc.", f.final_state, cfg.n_classes);
    return out;
}

// ---------------------------------------------------------------------------
// Chat tokenization

struct Vocab {
    std::unordered_map<std::string, int> ids;  // token -> id >= 1; 0 is unknown
    int size() const { return static_cast<int>(ids.size()) + 1; }
    // Flattens messages to ids in order, truncated to max_tokens (0 = no cap).
    std::vector<Eigen::Index> encode(const std::vector<std::string>& messages, int max_tokens) const;
};

std::vector<std::string> tokenize(const std::string& text);
Vocab build_vocab(const std::vector<std::string>& messages, int min_freq = 2);
void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

// ---------------------------------------------------------------------------
// Value-level forward passes (inference)

struct BranchOutput {
    Mat hidden_seq;  // [seq_len, hidden_dim]
};

struct ClassDistribution {
    Vec probs;  // n_classes, non-negative, sums to 1
};

struct FusionResult {
    ClassDistribution dist;
    Vec embedding;
};

struct ChatPriorResult {
    Vec prior;
    ClassDistribution dist;
};

// [T*H*W, C] in [0,1] from a planar uint8 clip.
Mat clip_to_matrix(const VideoClip& clip);

BranchOutput video_branch_forward(ParamStore& params, const ModelConfig& cfg, const VideoClip& clip,
                                  std::uint64_t init_seed = 0);
Mat video_frontend_forward(ParamStore& params, const ModelConfig& cfg, const VideoClip& clip,
                           std::uint64_t init_seed = 0);
BranchOutput audio_branch_forward(ParamStore& params, const ModelConfig& cfg, const Mat& mfcc,
                                  std::uint64_t init_seed = 0);
Mat audio_frontend_forward(ParamStore& params, const ModelConfig& cfg, const Mat& mfcc,
                           std::uint64_t init_seed = 0);
FusionResult fusion_forward(ParamStore& params, const ModelConfig& cfg, const BranchOutput& v,
                            const BranchOutput& a, std::uint64_t init_seed = 0);
ClassDistribution multiview_forward(ParamStore& params, const ModelConfig& cfg,
                                    const std::vector<VideoClip>& views, std::uint64_t init_seed = 0);
ChatPriorResult chat_prior_forward(ParamStore& params, const ModelConfig& cfg, const Vocab& vocab,
                                   const std::vector<std::string>& messages, std::uint64_t init_seed = 0);
ClassDistribution integrate_prior_before_fc(ParamStore& params, const ModelConfig& cfg,
                                            const Vec& fused_embedding, const Vec& prior,
                                            std::uint64_t init_seed = 0);
ClassDistribution integrate_prior_before_gru(ParamStore& params, const ModelConfig& cfg, const BranchOutput& v,
                                             const BranchOutput& a, const Vec& prior,
                                             std::uint64_t init_seed = 0);
double score_head(ParamStore& params, const ModelConfig& cfg, const BranchOutput& branch_out,
                  const std::string& prefix = "score.video.", std::uint64_t init_seed = 0);

Vec softmax_vec(const Vec& logits);

}  // namespace streamrank::nn
