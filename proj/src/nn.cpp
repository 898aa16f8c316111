#include "streamrank/nn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <mutex>

namespace streamrank::nn {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_scale() {
    ModelConfig cfg;
    cfg.video_t = 30;
    cfg.video_h = 240;
    cfg.video_w = 320;
    cfg.hidden_dim = 256;
    cfg.video_channels = 24;
    cfg.audio_channels = 64;
    cfg.recurrent_layers = 2;
    cfg.prior_dim = 32;
    cfg.chat_embed_dim = 64;
    cfg.chat_max_tokens = 512;
    return cfg;
}

void ModelConfig::validate() const {
    if (seq_len < 1) throw std::runtime_error("seq_len must be >= 1");
    if (hidden_dim < 2 || hidden_dim % 2 != 0) throw std::runtime_error("hidden_dim must be even and >= 2");
    if (prior_dim < 2 || prior_dim % 2 != 0) throw std::runtime_error("prior_dim must be even and >= 2");
    if (n_classes != kNumClasses) throw std::runtime_error("n_classes must be 4");
    if (recurrent_layers < 1) throw std::runtime_error("recurrent_layers must be >= 1");
    if (video_t < video_kt) throw std::runtime_error("video_t shorter than temporal kernel");
    if (video_channels < 1 || audio_channels < 1) throw std::runtime_error("channel counts must be >= 1");
    if (video_stride < 1 || audio_stride < 1) throw std::runtime_error("strides must be >= 1");
    if (pool_zones < 1) throw std::runtime_error("pool_zones must be >= 1");
    if (chat_layers < 1) throw std::runtime_error("chat_layers must be >= 1");
}

std::string config_to_json(const ModelConfig& cfg) {
    ordered_json j;
    j["video_t"] = cfg.video_t;
    j["video_h"] = cfg.video_h;
    j["video_w"] = cfg.video_w;
    j["video_c"] = cfg.video_c;
    j["audio_coeffs"] = cfg.audio_coeffs;
    j["hidden_dim"] = cfg.hidden_dim;
    j["seq_len"] = cfg.seq_len;
    j["n_classes"] = cfg.n_classes;
    j["recurrent_layers"] = cfg.recurrent_layers;
    j["video_channels"] = cfg.video_channels;
    j["video_kt"] = cfg.video_kt;
    j["video_k"] = cfg.video_k;
    j["video_stride"] = cfg.video_stride;
    j["pool_zones"] = cfg.pool_zones;
    j["audio_channels"] = cfg.audio_channels;
    j["audio_kernel"] = cfg.audio_kernel;
    j["audio_stride"] = cfg.audio_stride;
    j["audio_res_kernel"] = cfg.audio_res_kernel;
    j["prior_dim"] = cfg.prior_dim;
    j["chat_embed_dim"] = cfg.chat_embed_dim;
    j["chat_layers"] = cfg.chat_layers;
    j["chat_max_tokens"] = cfg.chat_max_tokens;
    j["vocab_size"] = cfg.vocab_size;
    j["views"] = ordered_json::array();
    for (const auto& v : cfg.views) {
        j["views"].push_back({{"name", v.name}, {"y0", v.y0}, {"x0", v.x0}, {"y1", v.y1}, {"x1", v.x1}});
    }
    return j.dump();
}

std::uint64_t config_hash(const ModelConfig& cfg) { return fnv1a(config_to_json(cfg)); }

// ---------------------------------------------------------------------------
// Geometry

namespace {

// 'same' padding for a strided window: output ceil(n / stride).
struct SamePad {
    Eigen::Index out;
    Eigen::Index begin;
};

SamePad same_pad(Eigen::Index n, Eigen::Index k, Eigen::Index stride) {
    const Eigen::Index out = (n - 1) / stride + 1;
    const Eigen::Index total = std::max<Eigen::Index>((out - 1) * stride + k - n, 0);
    return {out, total / 2};
}

// Half-open boundary of slot z when n rows split into parts slots; slots may
// repeat rows when n < parts so every slot is non-empty.
std::pair<Eigen::Index, Eigen::Index> slot_bounds(Eigen::Index n, Eigen::Index parts, Eigen::Index z) {
    Eigen::Index lo = z * n / parts;
    if (lo >= n) lo = n - 1;
    Eigen::Index hi = (z + 1) * n / parts;
    if (hi <= lo) hi = lo + 1;
    if (hi > n) hi = n;
    return {lo, hi};
}

std::mutex geom_mutex;

}  // namespace

ConvGeom conv3d_geom(int t, int h, int w, int kt, int k, int stride) {
    static std::map<std::array<int, 6>, ConvGeom> cache;
    const std::array<int, 6> key{t, h, w, kt, k, stride};
    std::lock_guard<std::mutex> lock(geom_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    if (t < kt) throw std::runtime_error("conv3d: input shorter than temporal kernel");
    ConvGeom geom;
    geom.t_out = t - kt + 1;
    const SamePad py = same_pad(h, k, stride);
    const SamePad px = same_pad(w, k, stride);
    geom.h_out = py.out;
    geom.w_out = px.out;
    geom.taps = static_cast<Eigen::Index>(kt) * k * k;

    auto map = std::make_shared<std::vector<Eigen::Index>>();
    map->reserve(static_cast<std::size_t>(geom.t_out * geom.h_out * geom.w_out * geom.taps));
    for (Eigen::Index to = 0; to < geom.t_out; ++to) {
        for (Eigen::Index yo = 0; yo < geom.h_out; ++yo) {
            for (Eigen::Index xo = 0; xo < geom.w_out; ++xo) {
                for (int dt = 0; dt < kt; ++dt) {
                    const Eigen::Index ti = to + dt;
                    for (int dy = 0; dy < k; ++dy) {
                        const Eigen::Index yi = yo * stride + dy - py.begin;
                        for (int dx = 0; dx < k; ++dx) {
                            const Eigen::Index xi = xo * stride + dx - px.begin;
                            const bool in = yi >= 0 && yi < h && xi >= 0 && xi < w;
                            map->push_back(in ? (ti * h + yi) * w + xi : -1);
                        }
                    }
                }
            }
        }
    }
    geom.map = std::move(map);
    cache[key] = geom;
    return geom;
}

ConvGeom conv1d_geom(int n, int k, int stride) {
    static std::map<std::array<int, 3>, ConvGeom> cache;
    const std::array<int, 3> key{n, k, stride};
    std::lock_guard<std::mutex> lock(geom_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    if (n < k) throw std::runtime_error("conv1d: input shorter than kernel");
    ConvGeom geom;
    geom.t_out = (n - k) / stride + 1;
    geom.h_out = 1;
    geom.w_out = 1;
    geom.taps = k;
    auto map = std::make_shared<std::vector<Eigen::Index>>();
    map->reserve(static_cast<std::size_t>(geom.t_out * k));
    for (Eigen::Index i = 0; i < geom.t_out; ++i) {
        for (int j = 0; j < k; ++j) map->push_back(i * stride + j);
    }
    geom.map = std::move(map);
    cache[key] = geom;
    return geom;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> adaptive_groups(Eigen::Index n_in, Eigen::Index n_out) {
    if (n_in < 1 || n_out < 1) throw std::runtime_error("adaptive_groups: empty input or output");
    std::vector<std::pair<Eigen::Index, Eigen::Index>> groups;
    groups.reserve(static_cast<std::size_t>(n_out));
    for (Eigen::Index g = 0; g < n_out; ++g) groups.push_back(slot_bounds(n_in, n_out, g));
    return groups;
}

std::shared_ptr<const std::vector<std::vector<Eigen::Index>>> zone_groups(int t, int h, int w, int z) {
    static std::map<std::array<int, 4>, std::shared_ptr<const std::vector<std::vector<Eigen::Index>>>> cache;
    const std::array<int, 4> key{t, h, w, z};
    std::lock_guard<std::mutex> lock(geom_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    auto groups = std::make_shared<std::vector<std::vector<Eigen::Index>>>();
    groups->reserve(static_cast<std::size_t>(t) * z * z);
    for (Eigen::Index ti = 0; ti < t; ++ti) {
        for (int zy = 0; zy < z; ++zy) {
            const auto [ylo, yhi] = slot_bounds(h, z, zy);
            for (int zx = 0; zx < z; ++zx) {
                const auto [xlo, xhi] = slot_bounds(w, z, zx);
                std::vector<Eigen::Index> idx;
                idx.reserve(static_cast<std::size_t>((yhi - ylo) * (xhi - xlo)));
                for (Eigen::Index y = ylo; y < yhi; ++y) {
                    for (Eigen::Index x = xlo; x < xhi; ++x) idx.push_back((ti * h + y) * w + x);
                }
                groups->push_back(std::move(idx));
            }
        }
    }
    cache[key] = groups;
    return groups;
}

// ---------------------------------------------------------------------------
// Chat tokenization

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (const char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

Vocab build_vocab(const std::vector<std::string>& messages, int min_freq) {
    std::map<std::string, int> counts;
    for (const auto& msg : messages) {
        for (auto& tok : tokenize(msg)) ++counts[tok];
    }
    Vocab vocab;
    int next_id = 1;
    for (const auto& [tok, count] : counts) {
        if (count >= min_freq) vocab.ids[tok] = next_id++;
    }
    return vocab;
}

std::vector<Eigen::Index> Vocab::encode(const std::vector<std::string>& messages, int max_tokens) const {
    std::vector<Eigen::Index> out;
    for (const auto& msg : messages) {
        for (const auto& tok : tokenize(msg)) {
            if (max_tokens > 0 && static_cast<int>(out.size()) >= max_tokens) return out;
            auto it = ids.find(tok);
            out.push_back(it == ids.end() ? 0 : it->second);
        }
    }
    return out;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
    std::map<std::string, int> sorted(vocab.ids.begin(), vocab.ids.end());
    ordered_json j;
    for (const auto& [tok, id] : sorted) j[tok] = id;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocab: " + path);
    out << j.dump(2) << "\n";
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read vocab: " + path);
    ordered_json j = ordered_json::parse(in);
    Vocab vocab;
    for (const auto& [tok, id] : j.items()) vocab.ids[tok] = id.get<int>();
    return vocab;
}

// ---------------------------------------------------------------------------
// Value-level forward passes

Mat clip_to_matrix(const VideoClip& clip) {
    Mat m(static_cast<Eigen::Index>(clip.t) * clip.h * clip.w, clip.c);
    for (int t = 0; t < clip.t; ++t) {
        for (int y = 0; y < clip.h; ++y) {
            for (int x = 0; x < clip.w; ++x) {
                const Eigen::Index r = (static_cast<Eigen::Index>(t) * clip.h + y) * clip.w + x;
                for (int c = 0; c < clip.c; ++c) m(r, c) = clip.at(t, c, y, x) / 255.0;
            }
        }
    }
    return m;
}

Vec softmax_vec(const Vec& logits) {
    const double zmax = logits.maxCoeff();
    Vec e = (logits.array() - zmax).exp();
    return e / e.sum();
}

namespace {

void check_clip_shape(const ModelConfig& cfg, const VideoClip& clip) {
    if (clip.t != cfg.video_t || clip.h != cfg.video_h || clip.w != cfg.video_w ||
        clip.c != cfg.video_c) {
        throw std::runtime_error("video shape mismatch with model config");
    }
}

Vec softmax_of(const ad::Var<double>& logits) { return softmax_vec(logits.value().row(0).transpose()); }

}  // namespace

BranchOutput video_branch_forward(ParamStore& params, const ModelConfig& cfg, const VideoClip& clip,
                                  std::uint64_t init_seed) {
    check_clip_shape(cfg, clip);
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto video = ad::constant(tape, clip_to_matrix(clip));
    auto seq = video_branch(ctx, cfg, video, clip.t, clip.h, clip.w);
    return BranchOutput{seq.value()};
}

Mat video_frontend_forward(ParamStore& params, const ModelConfig& cfg, const VideoClip& clip,
                           std::uint64_t init_seed) {
    check_clip_shape(cfg, clip);
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto video = ad::constant(tape, clip_to_matrix(clip));
    return video_frontend(ctx, cfg, video, clip.t, clip.h, clip.w).value();
}

BranchOutput audio_branch_forward(ParamStore& params, const ModelConfig& cfg, const Mat& mfcc,
                                  std::uint64_t init_seed) {
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto x = ad::constant(tape, mfcc);
    return BranchOutput{audio_branch(ctx, cfg, x).value()};
}

Mat audio_frontend_forward(ParamStore& params, const ModelConfig& cfg, const Mat& mfcc,
                           std::uint64_t init_seed) {
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto x = ad::constant(tape, mfcc);
    return audio_frontend(ctx, cfg, x).value();
}

FusionResult fusion_forward(ParamStore& params, const ModelConfig& cfg, const BranchOutput& v,
                            const BranchOutput& a, std::uint64_t init_seed) {
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto vs = ad::constant(tape, v.hidden_seq);
    auto as = ad::constant(tape, a.hidden_seq);
    auto fused = fusion_head(ctx, cfg, vs, as);
    FusionResult out;
    out.dist.probs = softmax_of(fused.logits);
    out.embedding = fused.embedding.value().row(0).transpose();
    return out;
}

ClassDistribution multiview_forward(ParamStore& params, const ModelConfig& cfg,
                                    const std::vector<VideoClip>& views, std::uint64_t init_seed) {
    if (views.size() != cfg.views.size()) throw std::runtime_error("view-count mismatch with model config");
    if (views.empty()) throw std::runtime_error("multiview requires at least one view");
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    std::vector<ad::Var<double>> seqs;
    seqs.reserve(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& clip = views[i];
        if (clip.c != cfg.video_c) throw std::runtime_error("view channel count mismatch");
        auto x = ad::constant(tape, clip_to_matrix(clip));
        seqs.push_back(video_branch(ctx, cfg, x, clip.t, clip.h, clip.w,
                                    "view." + cfg.views[i].name + "."));
    }
    auto fused = multiview_head(ctx, cfg, seqs);
    return ClassDistribution{softmax_of(fused.logits)};
}

ChatPriorResult chat_prior_forward(ParamStore& params, const ModelConfig& cfg, const Vocab& vocab,
                                   const std::vector<std::string>& messages, std::uint64_t init_seed) {
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto prior = chat_prior_graph(ctx, cfg, vocab.encode(messages, cfg.chat_max_tokens));
    auto logits = chat_logits_graph(ctx, cfg, prior);
    ChatPriorResult out;
    out.prior = prior.value().row(0).transpose();
    out.dist.probs = softmax_of(logits);
    return out;
}

ClassDistribution integrate_prior_before_fc(ParamStore& params, const ModelConfig& cfg,
                                            const Vec& fused_embedding, const Vec& prior,
                                            std::uint64_t init_seed) {
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto emb = ad::constant(tape, Mat(fused_embedding.transpose()));
    auto pr = ad::constant(tape, Mat(prior.transpose()));
    auto logits = affine_layer(ctx, "fusion.fc_prior.", ad::concat_cols(emb, pr),
                               static_cast<Eigen::Index>(cfg.n_classes));
    return ClassDistribution{softmax_of(logits)};
}

ClassDistribution integrate_prior_before_gru(ParamStore& params, const ModelConfig& cfg, const BranchOutput& v,
                                             const BranchOutput& a, const Vec& prior,
                                             std::uint64_t init_seed) {
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto vs = ad::constant(tape, v.hidden_seq);
    auto as = ad::constant(tape, a.hidden_seq);
    auto pr = ad::constant(tape, Mat(prior.transpose()));
    auto fused = fusion_prior_gru(ctx, cfg, vs, as, pr);
    return ClassDistribution{softmax_of(fused.logits)};
}

double score_head(ParamStore& params, const ModelConfig& cfg, const BranchOutput& branch_out,
                  const std::string& prefix, std::uint64_t init_seed) {
    (void)cfg;
    ad::Tape<double> tape;
    GraphContext<double> ctx(tape, params, init_seed);
    auto seq = ad::constant(tape, branch_out.hidden_seq);
    return score_head_graph(ctx, seq, prefix).scalar();
}

}  // namespace streamrank::nn
