#pragma once

#include "streamrank/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace streamrank {

// Fractional HUD sub-rectangle of a frame, (x0, y0, x1, y1) in [0, 1].
struct ViewSpec {
    std::string name;
    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;

    bool valid() const { return x0 >= 0 && x0 < x1 && x1 <= 1 && y0 >= 0 && y0 < y1 && y1 <= 1; }
};

// The five default HUD views. Coordinates are configurable; these defaults
// follow the usual CS:GO layout (minimap top-left, health bottom-left, ...).
const std::vector<ViewSpec>& default_views();
const ViewSpec& view_by_name(const std::string& name);

// Video frames, planar [t][c][h][w], 8-bit intensity.
struct VideoClip {
    std::vector<std::uint8_t> data;
    int t = 0, h = 0, w = 0, c = 1;
    double fps = 0.0;

    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
    std::size_t frame_size() const { return plane_size() * c; }

    std::uint8_t& at(int ti, int ci, int y, int x) {
        return data[(static_cast<std::size_t>(ti) * c + ci) * plane_size() + static_cast<std::size_t>(y) * w + x];
    }
    std::uint8_t at(int ti, int ci, int y, int x) const {
        return data[(static_cast<std::size_t>(ti) * c + ci) * plane_size() + static_cast<std::size_t>(y) * w + x];
    }

    static VideoClip zeros(int t, int h, int w, int c, double fps);
};

struct AudioTrack {
    Vec samples;  // amplitudes in [-1, 1]
    double sample_rate = 0.0;
};

struct MfccSequence {
    Mat coeffs;  // [frames x n_coeffs], n_coeffs = 20 by default
    double frame_hop_s = 0.0;
};

// Kept region of a centered mask covering `area_fraction` of the frame:
// floor(w*sqrt(a)) x floor(h*sqrt(a)) pixels, centered. Returned as
// {y0, x0, y1, x1} half-open bounds. Shared by apply_center_mask and the
// synthetic watermark placement so the two can never disagree.
struct PixelRect {
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0;
    bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
    int height() const { return y1 - y0; }
    int width() const { return x1 - x0; }
};

PixelRect center_mask_rect(int h, int w, double area_fraction);

// Pixel bounds of a fractional view rect at a given resolution:
// [floor(y0*h), floor(y1*h)) x [floor(x0*w), floor(x1*w)).
PixelRect view_pixel_rect(const ViewSpec& view, int h, int w);

// Nearest-frame rate reduction: output frame k is source frame
// floor(k * fps / target_fps); T' = floor(T * target_fps / fps).
VideoClip downsample_frames(const VideoClip& clip, double target_fps);

// Bilinear resize of every frame.
VideoClip resize_frames(const VideoClip& clip, int out_w, int out_h);

// Crops the view's pixel rectangle from every frame.
VideoClip extract_view(const VideoClip& clip, const ViewSpec& view);

// Zeroes every pixel outside the centered rectangle covering
// `area_fraction` of the frame area. Dimensions are unchanged.
VideoClip apply_center_mask(const VideoClip& clip, double area_fraction);

// Linear-interpolation resampling to target_rate.
AudioTrack resample_audio(const AudioTrack& track, double target_rate);

}  // namespace streamrank
