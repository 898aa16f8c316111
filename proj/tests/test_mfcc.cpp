#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "streamrank/mfcc.hpp"

#include <cmath>

using namespace streamrank;

namespace {

AudioTrack sine(double freq_hz, double seconds, double rate) {
    AudioTrack track;
    track.sample_rate = rate;
    const auto n = static_cast<Eigen::Index>(seconds * rate);
    track.samples.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        track.samples[i] = 0.5 * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate);
    }
    return track;
}

}  // namespace

TEST_CASE("frame count formula: 1 + floor((len - frame_len) / hop)") {
    AudioTrack track;
    track.sample_rate = 16000;
    track.samples = Vec::Zero(16000);  // 1 s
    const MfccSequence seq = compute_mfcc(track);
    // frame 400 samples, hop 160: 1 + floor((16000-400)/160) = 1 + 97 = 98
    CHECK(seq.coeffs.rows() == 98);
    CHECK(seq.coeffs.cols() == 20);
    CHECK(seq.frame_hop_s == doctest::Approx(0.010));
}

TEST_CASE("silence gives constant frames with energy only in coefficient 0") {
    AudioTrack track;
    track.sample_rate = 16000;
    track.samples = Vec::Zero(8000);
    const MfccSequence seq = compute_mfcc(track);
    REQUIRE(seq.coeffs.rows() > 1);
    // All frames identical.
    for (Eigen::Index f = 1; f < seq.coeffs.rows(); ++f) {
        CHECK((seq.coeffs.row(f) - seq.coeffs.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
    // DCT of a constant log-spectrum: coefficient 0 carries it all.
    CHECK(std::abs(seq.coeffs(0, 0)) > 1.0);
    for (Eigen::Index k = 1; k < seq.coeffs.cols(); ++k) CHECK(std::abs(seq.coeffs(0, k)) < 1e-9);
}

TEST_CASE("440 Hz sine is stationary across frames") {
    // frame_len = hop = 25 ms = 11 full periods of 440 Hz at 16 kHz, so every
    // frame sees an identical waveform segment.
    MfccConfig cfg;
    cfg.frame_len_s = 0.025;
    cfg.hop_s = 0.025;
    const MfccSequence seq = compute_mfcc(sine(440.0, 2.0, 16000.0), cfg);
    REQUIRE(seq.coeffs.rows() > 10);
    Vec mean = seq.coeffs.colwise().mean().transpose();
    double max_var = 0.0;
    for (Eigen::Index k = 0; k < seq.coeffs.cols(); ++k) {
        const double var = (seq.coeffs.col(k).array() - mean[k]).square().mean();
        max_var = std::max(max_var, var);
    }
    CHECK(max_var < 1e-6);
}

TEST_CASE("different pitches give different coefficients") {
    const MfccSequence a = compute_mfcc(sine(440.0, 1.0, 16000.0));
    const MfccSequence b = compute_mfcc(sine(880.0, 1.0, 16000.0));
    const Vec ma = a.coeffs.colwise().mean().transpose();
    const Vec mb = b.coeffs.colwise().mean().transpose();
    CHECK((ma - mb).norm() > 1.0);
}

TEST_CASE("output stays finite for extreme inputs") {
    AudioTrack track;
    track.sample_rate = 16000;
    track.samples = Vec::Constant(4000, 1.0);
    track.samples[100] = -1.0;
    const MfccSequence seq = compute_mfcc(track);
    CHECK(seq.coeffs.allFinite());
}

TEST_CASE("track shorter than one frame is rejected") {
    AudioTrack track;
    track.sample_rate = 16000;
    track.samples = Vec::Zero(100);  // < 400-sample frame
    CHECK_THROWS(compute_mfcc(track));
}

TEST_CASE("same input gives bit-identical output") {
    const AudioTrack track = sine(523.25, 0.5, 16000.0);
    const MfccSequence a = compute_mfcc(track);
    const MfccSequence b = compute_mfcc(track);
    CHECK((a.coeffs - b.coeffs).cwiseAbs().maxCoeff() == 0.0);
}
