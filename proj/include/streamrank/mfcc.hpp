#pragma once

#include "streamrank/media.hpp"

namespace streamrank {

struct MfccConfig {
    int n_coeffs = 20;
    double frame_len_s = 0.025;
    double hop_s = 0.010;
    int n_mel_filters = 26;
    double log_floor = 1e-10;
};

// Hamming window -> magnitude spectrum -> triangular mel filter bank ->
// log (floored) -> DCT-II, keeping the first n_coeffs coefficients.
// Frame count is 1 + floor((len - frame_len) / hop).
MfccSequence compute_mfcc(const AudioTrack& track, const MfccConfig& config = {});

}  // namespace streamrank
