#include "streamrank/media.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace streamrank {

const std::vector<ViewSpec>& default_views() {
    static const std::vector<ViewSpec> views = {
        {"minimap", 0.00, 0.00, 0.18, 0.24},
        {"top", 0.30, 0.00, 0.70, 0.10},
        {"center", 0.35, 0.30, 0.65, 0.70},
        {"health", 0.00, 0.85, 0.22, 1.00},
        {"guns", 0.75, 0.80, 1.00, 1.00},
    };
    return views;
}

const ViewSpec& view_by_name(const std::string& name) {
    for (const auto& v : default_views()) {
        if (v.name == name) return v;
    }
    throw std::invalid_argument("unknown view: " + name);
}

VideoClip VideoClip::zeros(int t, int h, int w, int c, double fps) {
    VideoClip clip;
    clip.t = t;
    clip.h = h;
    clip.w = w;
    clip.c = c;
    clip.fps = fps;
    clip.data.assign(static_cast<std::size_t>(t) * c * h * w, 0);
    return clip;
}

PixelRect center_mask_rect(int h, int w, double area_fraction) {
    if (area_fraction <= 0.0 || area_fraction > 1.0) throw std::invalid_argument("area_fraction must be in (0, 1]");
    const double side = std::sqrt(area_fraction);
    const int kh = static_cast<int>(std::floor(h * side));
    const int kw = static_cast<int>(std::floor(w * side));
    const int y0 = (h - kh) / 2;
    const int x0 = (w - kw) / 2;
    return {y0, x0, y0 + kh, x0 + kw};
}

PixelRect view_pixel_rect(const ViewSpec& view, int h, int w) {
    if (!view.valid()) throw std::invalid_argument("degenerate view rect: " + view.name);
    PixelRect r;
    r.y0 = static_cast<int>(std::floor(view.y0 * h));
    r.y1 = static_cast<int>(std::floor(view.y1 * h));
    r.x0 = static_cast<int>(std::floor(view.x0 * w));
    r.x1 = static_cast<int>(std::floor(view.x1 * w));
    return r;
}

VideoClip downsample_frames(const VideoClip& clip, double target_fps) {
    if (target_fps <= 0) throw std::invalid_argument("target_fps must be > 0");
    if (target_fps > clip.fps) throw std::invalid_argument("target_fps exceeds clip fps");

    const int t_out = static_cast<int>(std::floor(clip.t * target_fps / clip.fps));
    VideoClip out = VideoClip::zeros(t_out, clip.h, clip.w, clip.c, target_fps);
    for (int k = 0; k < t_out; ++k) {
        const int src = std::min(clip.t - 1, static_cast<int>(std::floor(k * clip.fps / target_fps)));
        std::copy_n(clip.data.begin() + static_cast<std::size_t>(src) * clip.frame_size(), clip.frame_size(),
                    out.data.begin() + static_cast<std::size_t>(k) * out.frame_size());
    }
    return out;
}

VideoClip resize_frames(const VideoClip& clip, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("output dimensions must be > 0");
    if (out_w == clip.w && out_h == clip.h) return clip;

    VideoClip out = VideoClip::zeros(clip.t, out_h, out_w, clip.c, clip.fps);
    const double sy = static_cast<double>(clip.h) / out_h;
    const double sx = static_cast<double>(clip.w) / out_w;
    for (int ti = 0; ti < clip.t; ++ti) {
        for (int ci = 0; ci < clip.c; ++ci) {
            for (int y = 0; y < out_h; ++y) {
                // Center-aligned sample positions, clamped at the borders.
                const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, clip.h - 1.0);
                const int y0 = static_cast<int>(std::floor(fy));
                const int y1 = std::min(y0 + 1, clip.h - 1);
                const double wy = fy - y0;
                for (int x = 0; x < out_w; ++x) {
                    const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, clip.w - 1.0);
                    const int x0 = static_cast<int>(std::floor(fx));
                    const int x1 = std::min(x0 + 1, clip.w - 1);
                    const double wx = fx - x0;
                    const double v = (1 - wy) * ((1 - wx) * clip.at(ti, ci, y0, x0) + wx * clip.at(ti, ci, y0, x1)) +
                                     wy * ((1 - wx) * clip.at(ti, ci, y1, x0) + wx * clip.at(ti, ci, y1, x1));
                    out.at(ti, ci, y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
                }
            }
        }
    }
    return out;
}

VideoClip extract_view(const VideoClip& clip, const ViewSpec& view) {
    const PixelRect r = view_pixel_rect(view, clip.h, clip.w);
    if (r.height() <= 0 || r.width() <= 0) {
        throw std::runtime_error("view '" + view.name + "' rounds to zero area at " + std::to_string(clip.w) + "x" +
                                 std::to_string(clip.h));
    }
    VideoClip out = VideoClip::zeros(clip.t, r.height(), r.width(), clip.c, clip.fps);
    for (int ti = 0; ti < clip.t; ++ti) {
        for (int ci = 0; ci < clip.c; ++ci) {
            for (int y = r.y0; y < r.y1; ++y) {
                for (int x = r.x0; x < r.x1; ++x) {
                    out.at(ti, ci, y - r.y0, x - r.x0) = clip.at(ti, ci, y, x);
                }
            }
        }
    }
    return out;
}

VideoClip apply_center_mask(const VideoClip& clip, double area_fraction) {
    const PixelRect keep = center_mask_rect(clip.h, clip.w, area_fraction);
    VideoClip out = VideoClip::zeros(clip.t, clip.h, clip.w, clip.c, clip.fps);
    for (int ti = 0; ti < clip.t; ++ti) {
        for (int ci = 0; ci < clip.c; ++ci) {
            for (int y = keep.y0; y < keep.y1; ++y) {
                for (int x = keep.x0; x < keep.x1; ++x) {
                    out.at(ti, ci, y, x) = clip.at(ti, ci, y, x);
                }
            }
        }
    }
    return out;
}

AudioTrack resample_audio(const AudioTrack& track, double target_rate) {
    if (target_rate <= 0) throw std::invalid_argument("target_rate must be > 0");
    if (target_rate == track.sample_rate) return track;

    const auto n_in = track.samples.size();
    const auto n_out = static_cast<Eigen::Index>(std::llround(static_cast<double>(n_in) * target_rate / track.sample_rate));
    AudioTrack out;
    out.sample_rate = target_rate;
    out.samples.resize(n_out);
    if (n_in == 0) return out;
    const double step = track.sample_rate / target_rate;
    for (Eigen::Index i = 0; i < n_out; ++i) {
        const double pos = std::min(static_cast<double>(n_in - 1), i * step);
        const auto i0 = static_cast<Eigen::Index>(std::floor(pos));
        const auto i1 = std::min(i0 + 1, n_in - 1);
        const double frac = pos - static_cast<double>(i0);
        out.samples[i] = (1.0 - frac) * track.samples[i0] + frac * track.samples[i1];
    }
    return out;
}

}  // namespace streamrank
