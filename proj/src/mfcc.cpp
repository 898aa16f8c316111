#include "streamrank/mfcc.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <iostream>
#include <stdexcept>
#include <vector>

namespace streamrank {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int next_pow2(int n) {
    int p = 1;
    while (p < n) p *= 2;
    return p;
}

// Triangular filters, equally spaced on the mel scale from 0 to Nyquist.
// Rows are filters, columns are FFT bins (0 .. n_fft/2).
Mat mel_filter_bank(int n_filters, int n_fft, double sample_rate) {
    const int n_bins = n_fft / 2 + 1;
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> centers(n_filters + 2);
    for (int i = 0; i < n_filters + 2; ++i) {
        centers[i] = mel_to_hz(mel_max * i / (n_filters + 1));
    }
    Mat bank = Mat::Zero(n_filters, n_bins);
    for (int f = 0; f < n_filters; ++f) {
        const double lo = centers[f], mid = centers[f + 1], hi = centers[f + 2];
        for (int b = 0; b < n_bins; ++b) {
            const double hz = b * sample_rate / n_fft;
            if (hz > lo && hz < mid) {
                bank(f, b) = (hz - lo) / (mid - lo);
            } else if (hz >= mid && hz < hi) {
                bank(f, b) = (hi - hz) / (hi - mid);
            }
        }
    }
    return bank;
}

// Orthonormal DCT-II matrix, [n_out x n_in].
Mat dct_matrix(int n_out, int n_in) {
    Mat d(n_out, n_in);
    for (int k = 0; k < n_out; ++k) {
        const double scale = (k == 0) ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
        for (int n = 0; n < n_in; ++n) {
            d(k, n) = scale * std::cos(M_PI * k * (2 * n + 1) / (2.0 * n_in));
        }
    }
    return d;
}

}  // namespace

MfccSequence compute_mfcc(const AudioTrack& track, const MfccConfig& config) {
    if (config.hop_s <= 0 || config.frame_len_s < config.hop_s) {
        throw std::invalid_argument("require frame_len_s >= hop_s > 0");
    }
    if (track.sample_rate != 16000.0) {
        std::cerr << "warning: compute_mfcc expects 16 kHz audio, got " << track.sample_rate << " Hz\n";
    }

    const auto len = track.samples.size();
    const int frame_len = static_cast<int>(std::lround(config.frame_len_s * track.sample_rate));
    const int hop = static_cast<int>(std::lround(config.hop_s * track.sample_rate));
    if (len < frame_len) throw std::runtime_error("audio track shorter than one analysis frame");

    const int n_frames = 1 + static_cast<int>((len - frame_len) / hop);
    const int n_fft = next_pow2(frame_len);
    const int n_bins = n_fft / 2 + 1;

    Vec window(frame_len);
    for (int i = 0; i < frame_len; ++i) {
        window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (frame_len - 1));
    }

    const Mat bank = mel_filter_bank(config.n_mel_filters, n_fft, track.sample_rate);
    const Mat dct = dct_matrix(config.n_coeffs, config.n_mel_filters);

    Eigen::FFT<double> fft;
    std::vector<double> buf(n_fft, 0.0);
    std::vector<std::complex<double>> spec(n_fft);

    MfccSequence out;
    out.frame_hop_s = config.hop_s;
    out.coeffs.resize(n_frames, config.n_coeffs);

    Vec magnitudes(n_bins);
    for (int f = 0; f < n_frames; ++f) {
        const auto start = static_cast<Eigen::Index>(f) * hop;
        for (int i = 0; i < frame_len; ++i) buf[i] = track.samples[start + i] * window[i];
        std::fill(buf.begin() + frame_len, buf.end(), 0.0);
        fft.fwd(spec, buf);
        for (int b = 0; b < n_bins; ++b) magnitudes[b] = std::abs(spec[b]);

        Vec mel = bank * magnitudes;
        for (int m = 0; m < config.n_mel_filters; ++m) {
            mel[m] = std::log(std::max(mel[m], config.log_floor));
        }
        out.coeffs.row(f) = (dct * mel).transpose();
    }
    return out;
}

}  // namespace streamrank
