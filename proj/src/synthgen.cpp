#include "streamrank/synthgen.hpp"

#include "streamrank/arrayio.hpp"
#include "streamrank/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace streamrank {

namespace {

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Per-user blocky +-1 texture derived from the user id alone, so it is
// identical across every clip and seed.
Mat user_texture(const std::string& user_id, int h, int w) {
    Rng rng(fnv1a(user_id));
    const int block = 2;
    const int bh = (h + block - 1) / block, bw = (w + block - 1) / block;
    Mat blocks(bh, bw);
    for (int y = 0; y < bh; ++y) {
        for (int x = 0; x < bw; ++x) blocks(y, x) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    Mat tex(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) tex(y, x) = blocks(y / block, x / block);
    }
    return tex;
}

// The user band sits where mel filters are ~450 Hz wide, so the raw spectrum
// resolves every user (argmax bin) while cepstral features barely do; identity
// then leaks through the maskable video band rather than through audio.
double user_pitch_hz(const std::string& user_id) {
    Rng rng(fnv1a(user_id) ^ 0x5bd1e995u);
    return 4000.0 + rng.uniform() * 450.0;
}

// At full strength the rank channels sit exactly on their class parameters;
// as strength drops, a per-clip jitter blurs the effective rank value toward
// neighboring classes. Weak-signal corpora therefore carry irreducible class
// confusion instead of a merely dimmer deterministic code, which no amount of
// training can undo. Video and audio share the clip salt, so both modalities
// encode the same blurred value.
double effective_rank_value(RankSection rank, double strength, std::uint64_t clip_salt) {
    Rng rng(fnv1a("rank_jitter") ^ clip_salt);
    const double jitter = (1.0 - strength) * rng.normal(0.0, 1.0);
    return std::clamp(class_index(rank) + jitter, -0.75, 3.75);
}

// Health-bar decay; A decays slowest.
double decay_rate(double rank_value, double strength) { return strength * (0.3 + 0.2 * rank_value); }

// Guns-indicator blink half-period in frames; A blinks slowest.
int blink_half_period(double rank_value, double strength) {
    const double base = 4.0 - rank_value;
    if (strength <= 0.0) return 1;
    return std::max(1, static_cast<int>(std::lround(base / strength)));
}

// Audio burst rate per 10 seconds, linearly interpolated between the class
// anchors; A is most active.
double burst_rate_per_10s(double rank_value, double strength) {
    static const double rates[kNumClasses] = {8.0, 5.0, 3.0, 2.0};
    const int i = std::clamp(static_cast<int>(std::floor(rank_value)), 0, kNumClasses - 2);
    const double t = rank_value - i;
    return strength * (rates[i] + t * (rates[i + 1] - rates[i]));
}

}  // namespace

void SynthConfig::validate() const {
    double sum = std::accumulate(rank_fractions.begin(), rank_fractions.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("rank_fractions must sum to 1");
    if (watermark_strength < 0 || watermark_strength > 1) throw std::invalid_argument("watermark_strength must be in [0,1]");
    if (rank_signal_strength < 0 || rank_signal_strength > 1) throw std::invalid_argument("rank_signal_strength must be in [0,1]");
    if (n_users < kNumClasses) throw std::invalid_argument("need at least one user per class");
    if (videos_per_user_min < 1 || videos_per_user_max < videos_per_user_min) {
        throw std::invalid_argument("infeasible videos_per_user range");
    }
}

const std::string& skill_token() {
    static const std::string token = "clutch";
    return token;
}

VideoClip render_video(const std::string& user_id, RankSection rank, const SynthConfig& config,
                       std::uint64_t clip_salt) {
    if (config.frame_h < 16 || config.frame_w < 16) {
        throw std::invalid_argument("frame too small to contain the view rects (need >= 16x16)");
    }
    const int h = config.frame_h, w = config.frame_w, t_frames = config.n_frames;

    // The watermark band is exactly the complement of the 0.8 mask's kept
    // rect; the rank signals sit inside their view rects, restricted to the
    // kept rect so the mask removes the identity signal and nothing else.
    const PixelRect keep = center_mask_rect(h, w, 0.8);
    const PixelRect health = view_pixel_rect(view_by_name("health"), h, w);
    const PixelRect guns = view_pixel_rect(view_by_name("guns"), h, w);
    const PixelRect health_in{std::max(health.y0, keep.y0), std::max(health.x0, keep.x0),
                              std::min(health.y1, keep.y1), std::min(health.x1, keep.x1)};
    const PixelRect guns_in{std::max(guns.y0, keep.y0), std::max(guns.x0, keep.x0), std::min(guns.y1, keep.y1),
                            std::min(guns.x1, keep.x1)};

    const Mat tex = user_texture(user_id, h, w);
    Rng noise = derive_rng(config.seed ^ clip_salt, user_id + "/video");

    VideoClip clip = VideoClip::zeros(t_frames, h, w, 1, config.fps);
    const double rank_value = effective_rank_value(rank, config.rank_signal_strength, clip_salt);
    const double decay = decay_rate(rank_value, config.rank_signal_strength);
    const int half_period = blink_half_period(rank_value, config.rank_signal_strength);

    for (int ti = 0; ti < t_frames; ++ti) {
        const double progress = t_frames > 1 ? static_cast<double>(ti) / (t_frames - 1) : 0.0;
        const double fill = std::clamp(1.0 - decay * progress, 0.0, 1.0);
        const int lit_cols = static_cast<int>(std::lround(fill * health_in.width()));
        const bool blink_on = ((ti / half_period) % 2) == 0;

        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double v = 0.5 + noise.normal(0.0, config.noise_std);
                if (!keep.contains(y, x)) {
                    v += config.watermark_strength * 0.45 * tex(y, x);
                } else if (health_in.contains(y, x)) {
                    const bool lit = (x - health_in.x0) < lit_cols;
                    v += config.rank_signal_strength * (lit ? 0.45 : -0.45);
                } else if (guns_in.contains(y, x)) {
                    v += config.rank_signal_strength * (blink_on ? 0.45 : -0.45);
                }
                clip.at(ti, 0, y, x) = quantize(v);
            }
        }
    }
    return clip;
}

AudioTrack render_audio(const std::string& user_id, RankSection rank, const SynthConfig& config,
                        std::uint64_t clip_salt) {
    const auto n = static_cast<Eigen::Index>(std::llround(config.audio_s * config.audio_rate));
    AudioTrack track;
    track.sample_rate = config.audio_rate;
    track.samples.resize(n);

    Rng noise = derive_rng(config.seed ^ clip_salt, user_id + "/audio");
    for (Eigen::Index i = 0; i < n; ++i) track.samples[i] = noise.normal(0.0, config.noise_std);

    // Identity: a steady per-user hum.
    const double pitch = user_pitch_hz(user_id);
    if (config.watermark_strength > 0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            track.samples[i] += config.watermark_strength * 0.3 *
                                std::sin(2.0 * M_PI * pitch * static_cast<double>(i) / config.audio_rate);
        }
    }

    // Rank: short 2 kHz bursts, evenly spaced with a small seeded jitter.
    const double rank_value = effective_rank_value(rank, config.rank_signal_strength, clip_salt);
    const int n_bursts = static_cast<int>(
        std::lround(burst_rate_per_10s(rank_value, config.rank_signal_strength) * config.audio_s / 10.0));
    if (config.rank_signal_strength > 0 && n_bursts > 0) {
        const auto burst_len = static_cast<Eigen::Index>(std::llround(0.1 * config.audio_rate));
        Rng jitter = derive_rng(config.seed ^ clip_salt, user_id + "/bursts");
        for (int b = 0; b < n_bursts; ++b) {
            const double center = (b + 0.5) / n_bursts * config.audio_s;
            const double jitter_s = (jitter.uniform() - 0.5) * 0.2;
            auto start = static_cast<Eigen::Index>(std::llround((center + jitter_s) * config.audio_rate)) - burst_len / 2;
            start = std::clamp<Eigen::Index>(start, 0, n - burst_len);
            for (Eigen::Index i = 0; i < burst_len; ++i) {
                const double env = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (burst_len - 1));
                track.samples[start + i] += config.rank_signal_strength * 0.5 * env *
                                            std::sin(2.0 * M_PI * 2000.0 * static_cast<double>(i) / config.audio_rate);
            }
        }
    }

    for (Eigen::Index i = 0; i < n; ++i) track.samples[i] = std::clamp(track.samples[i], -1.0, 1.0);
    return track;
}

ChatLog render_chat(const std::string& user_id, RankSection rank, const SynthConfig& config) {
    static const std::vector<std::string> filler = {"gg", "nice", "lol", "stream", "game",
                                                    "hi", "wow",  "map", "round",  "play"};
    ChatLog log;
    log.user_id = user_id;

    Rng rng = derive_rng(config.seed, user_id + "/chat");
    int n_messages = 60;
    if (config.imbalanced_chat) {
        // Log-spaced counts, so the corpus always spans the 8..1200 range.
        const double u = rng.uniform();
        n_messages = static_cast<int>(std::lround(std::exp(std::log(8.0) + u * (std::log(1200.0) - std::log(8.0)))));
    }

    const double p_skill = 0.08 + config.rank_signal_strength * 0.13 * (3 - class_index(rank));
    for (int m = 0; m < n_messages; ++m) {
        const int len = rng.uniform_range(3, 12);
        std::string msg;
        for (int k = 0; k < len; ++k) {
            if (!msg.empty()) msg += ' ';
            if (rng.uniform() < p_skill) {
                msg += skill_token();
            } else {
                msg += filler[rng.uniform_int(filler.size())];
            }
        }
        log.messages.push_back(std::move(msg));
    }
    return log;
}

Manifest generate_corpus(const SynthConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    std::filesystem::create_directories(out_dir / "payloads");

    // Rank quotas per the configured fractions (largest remainder), with a
    // floor of one user per class, then a seeded shuffle over users.
    std::array<int, kNumClasses> quota{};
    std::array<double, kNumClasses> rem{};
    int assigned = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        const double q = config.rank_fractions[c] * config.n_users;
        quota[c] = static_cast<int>(std::floor(q));
        rem[c] = q - quota[c];
        assigned += quota[c];
    }
    std::array<int, kNumClasses> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (int k = 0; k < config.n_users - assigned; ++k) quota[order[k % kNumClasses]]++;
    for (int c = 0; c < kNumClasses; ++c) {
        while (quota[c] == 0) {
            const int donor = static_cast<int>(std::max_element(quota.begin(), quota.end()) - quota.begin());
            quota[donor]--;
            quota[c]++;
        }
    }

    std::vector<RankSection> user_ranks;
    for (int c = 0; c < kNumClasses; ++c) {
        for (int k = 0; k < quota[c]; ++k) user_ranks.push_back(rank_from_index(c));
    }
    Rng assign_rng = derive_rng(config.seed, "user-ranks");
    assign_rng.shuffle(user_ranks);

    Manifest manifest;
    manifest.base_dir = out_dir;
    Rng count_rng = derive_rng(config.seed, "video-counts");
    int total_videos = 0;
    for (int u = 0; u < config.n_users; ++u) {
        char user_id[16];
        std::snprintf(user_id, sizeof(user_id), "u%03d", u);
        const RankSection rank = user_ranks[static_cast<std::size_t>(u)];
        const int n_videos = count_rng.uniform_range(config.videos_per_user_min, config.videos_per_user_max);
        total_videos += n_videos;

        for (int v = 0; v < n_videos; ++v) {
            char sample_id[32];
            std::snprintf(sample_id, sizeof(sample_id), "%s_v%02d", user_id, v);
            const std::uint64_t salt = fnv1a(sample_id);

            const VideoClip clip = render_video(user_id, rank, config, salt);
            const AudioTrack audio = render_audio(user_id, rank, config, salt);

            SampleRecord rec;
            rec.sample_id = sample_id;
            rec.user_id = user_id;
            rec.game_type = GameType::CSGO;
            rec.rank = rank;
            rec.video_path = std::string("payloads/") + sample_id + "_v.bin";
            rec.audio_path = std::string("payloads/") + sample_id + "_a.bin";
            rec.duration_s = config.n_frames / config.fps;
            rec.native_fps = config.fps;

            save_video(clip, out_dir / rec.video_path);
            save_audio(audio, out_dir / rec.audio_path);
            manifest.records.push_back(std::move(rec));
        }
        manifest.chats[user_id] = render_chat(user_id, rank, config);
    }
    if (total_videos == 0) throw std::runtime_error("infeasible synth config: no videos generated");

    save_manifest(manifest, out_dir / "manifest.jsonl");
    save_chats(manifest, out_dir / "chats.jsonl");
    return manifest;
}

}  // namespace streamrank
