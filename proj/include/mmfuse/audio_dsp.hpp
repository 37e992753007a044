#pragma once

#include <string>

#include "mmfuse/types.hpp"

namespace mmfuse {

inline constexpr int kMelBands = 64;
inline constexpr double kMorletOmega0 = 6.0;
inline constexpr double kRolloffFraction = 0.85;

struct Spectrogram {
    Eigen::MatrixXd magnitudes; // time_frames x (window_size / 2 + 1)
    int window_size = 1024;
    int hop_length = 512;
    int sample_rate = 16000;

    Eigen::Index frames() const { return magnitudes.rows(); }
    Eigen::Index bins() const { return magnitudes.cols(); }
};

struct MelSpectrogram {
    Eigen::MatrixXd bands;   // time_frames x 64
    Eigen::MatrixXd filters; // 64 x bins, triangular, peak weight 1
};

struct Scalogram {
    Eigen::MatrixXd magnitudes; // scales x samples
    Eigen::VectorXd scales;     // seconds, strictly increasing
};

struct SpectralStats {
    double zcr = 0.0;
    double centroid_hz = 0.0;
    double bandwidth_hz = 0.0;
    double rolloff_hz = 0.0;
    double energy = 0.0;
};

/// Periodic Hann window of length n.
Eigen::VectorXd hann_window(int n);

/// Magnitude STFT with a Hann window. Frame count is 1 + (len - window) / hop.
Spectrogram stft(const Eigen::VectorXd &samples, int window_size, int hop_length, int sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters with edges equally spaced on the HTK mel scale over
/// [0, sample_rate / 2], evaluated at each FFT bin frequency.
Eigen::MatrixXd mel_filterbank(int n_bands, int window_size, int sample_rate);

/// Applies the 64-band filterbank to squared magnitudes.
MelSpectrogram mel_spectrogram(const Spectrogram &spec);

// Morlet wavelet helpers. Pseudo-frequency uses the Fourier factor
// 4*pi*s / (omega0 + sqrt(2 + omega0^2)).
double morlet_scale_to_frequency(double scale_s);
double morlet_frequency_to_scale(double freq_hz);

/// Log-spaced scales whose pseudo-frequencies run from max_hz down to min_hz.
Eigen::VectorXd morlet_scales(int count = 32, double min_hz = 50.0, double max_hz = 8000.0);

/// |W(s, n)| for each scale, computed by multiplying the zero-padded signal
/// spectrum with the analytic Morlet spectrum sqrt(2*pi*s/dt) * psi_hat(s*omega).
Scalogram cwt_scalogram(const Eigen::VectorXd &samples, const Eigen::VectorXd &scales, int sample_rate);

SpectralStats spectral_stats(const Eigen::VectorXd &samples, int sample_rate);

/// One-sided magnitude spectrum |X_k|, k = 0 .. n/2, no window.
Eigen::VectorXd magnitude_spectrum(const Eigen::VectorXd &samples);

// Debug export: one row per time frame (or scale), comma separated.
void write_csv(const std::string &path, const Eigen::MatrixXd &grid);

} // namespace mmfuse
