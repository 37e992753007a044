#include "mmfuse/audio_dsp.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mmfuse/error.hpp"

namespace mmfuse {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace

Eigen::VectorXd hann_window(int n) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

Spectrogram stft(const Eigen::VectorXd &samples, int window_size, int hop_length, int sample_rate) {
    if (!is_power_of_two(window_size)) throw InvalidInput("stft: window_size must be a power of two");
    if (hop_length <= 0) throw InvalidInput("stft: hop_length must be positive");
    if (sample_rate <= 0) throw InvalidInput("stft: sample_rate must be positive");
    if (samples.size() < window_size)
        throw InvalidInput("stft: " + std::to_string(samples.size()) + " samples is shorter than window " +
                           std::to_string(window_size));

    const Eigen::Index frames = 1 + (samples.size() - window_size) / hop_length;
    const Eigen::Index bins = window_size / 2 + 1;
    const Eigen::VectorXd window = hann_window(window_size);

    Spectrogram spec;
    spec.window_size = window_size;
    spec.hop_length = hop_length;
    spec.sample_rate = sample_rate;
    spec.magnitudes.resize(frames, bins);

    Eigen::FFT<double> fft;
    std::vector<double> frame(window_size);
    std::vector<std::complex<double>> bins_out;
    for (Eigen::Index t = 0; t < frames; ++t) {
        for (int i = 0; i < window_size; ++i) frame[i] = samples[t * hop_length + i] * window[i];
        fft.fwd(bins_out, frame);
        for (Eigen::Index k = 0; k < bins; ++k) spec.magnitudes(t, k) = std::abs(bins_out[k]);
    }
    return spec;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(int n_bands, int window_size, int sample_rate) {
    const int bins = window_size / 2 + 1;
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    Eigen::VectorXd edges(n_bands + 2);
    for (int i = 0; i < n_bands + 2; ++i) edges[i] = mel_to_hz(mel_max * i / (n_bands + 1));

    Eigen::MatrixXd filters = Eigen::MatrixXd::Zero(n_bands, bins);
    for (int b = 0; b < n_bands; ++b) {
        const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / window_size;
            if (f > lo && f <= mid)
                filters(b, k) = (f - lo) / (mid - lo);
            else if (f > mid && f < hi)
                filters(b, k) = (hi - f) / (hi - mid);
        }
    }
    return filters;
}

MelSpectrogram mel_spectrogram(const Spectrogram &spec) {
    if (spec.bins() != spec.window_size / 2 + 1) throw InvalidInput("mel_spectrogram: bin count does not match window");
    MelSpectrogram mel;
    mel.filters = mel_filterbank(kMelBands, spec.window_size, spec.sample_rate);
    mel.bands = spec.magnitudes.array().square().matrix() * mel.filters.transpose();
    return mel;
}

namespace {
double fourier_factor() { return 4.0 * std::numbers::pi / (kMorletOmega0 + std::sqrt(2.0 + kMorletOmega0 * kMorletOmega0)); }
} // namespace

double morlet_scale_to_frequency(double scale_s) { return 1.0 / (fourier_factor() * scale_s); }

double morlet_frequency_to_scale(double freq_hz) { return 1.0 / (fourier_factor() * freq_hz); }

Eigen::VectorXd morlet_scales(int count, double min_hz, double max_hz) {
    if (count < 1) throw InvalidInput("morlet_scales: count must be >= 1");
    const double s0 = morlet_frequency_to_scale(max_hz);
    const double s1 = morlet_frequency_to_scale(min_hz);
    Eigen::VectorXd scales(count);
    if (count == 1) {
        scales[0] = s0;
        return scales;
    }
    for (int i = 0; i < count; ++i) scales[i] = s0 * std::pow(s1 / s0, static_cast<double>(i) / (count - 1));
    return scales;
}

Scalogram cwt_scalogram(const Eigen::VectorXd &samples, const Eigen::VectorXd &scales, int sample_rate) {
    if (samples.size() == 0) throw InvalidInput("cwt_scalogram: empty signal");
    if (scales.size() == 0) throw InvalidInput("cwt_scalogram: no scales");
    if (sample_rate <= 0) throw InvalidInput("cwt_scalogram: sample_rate must be positive");
    for (Eigen::Index i = 0; i < scales.size(); ++i) {
        if (!(scales[i] > 0.0)) throw InvalidInput("cwt_scalogram: scale " + std::to_string(i) + " is not positive");
        if (i > 0 && !(scales[i] > scales[i - 1])) throw InvalidInput("cwt_scalogram: scales must be strictly increasing");
    }

    const auto n = static_cast<std::size_t>(samples.size());
    const std::size_t m = next_power_of_two(2 * n);
    const double dt = 1.0 / sample_rate;

    std::vector<std::complex<double>> padded(m, 0.0), spectrum, response(m), coeffs;
    for (std::size_t i = 0; i < n; ++i) padded[i] = samples[static_cast<Eigen::Index>(i)];
    Eigen::FFT<double> fft;
    fft.fwd(spectrum, padded);

    Scalogram out;
    out.scales = scales;
    out.magnitudes.resize(scales.size(), samples.size());
    const double norm0 = std::pow(std::numbers::pi, -0.25);
    for (Eigen::Index si = 0; si < scales.size(); ++si) {
        const double s = scales[si];
        const double amp = std::sqrt(2.0 * std::numbers::pi * s / dt) * norm0;
        for (std::size_t k = 0; k < m; ++k) {
            // Only positive frequencies: the analytic Morlet vanishes for omega <= 0.
            if (k == 0 || k > m / 2) {
                response[k] = 0.0;
                continue;
            }
            const double omega = 2.0 * std::numbers::pi * static_cast<double>(k) / (static_cast<double>(m) * dt);
            const double arg = s * omega - kMorletOmega0;
            response[k] = spectrum[k] * (amp * std::exp(-0.5 * arg * arg));
        }
        fft.inv(coeffs, response);
        for (std::size_t i = 0; i < n; ++i) out.magnitudes(si, static_cast<Eigen::Index>(i)) = std::abs(coeffs[i]);
    }
    return out;
}

Eigen::VectorXd magnitude_spectrum(const Eigen::VectorXd &samples) {
    const auto n = static_cast<std::size_t>(samples.size());
    std::vector<double> in(samples.data(), samples.data() + n);
    std::vector<std::complex<double>> out;
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    Eigen::VectorXd mag(static_cast<Eigen::Index>(n / 2 + 1));
    for (Eigen::Index k = 0; k < mag.size(); ++k) mag[k] = std::abs(out[static_cast<std::size_t>(k)]);
    return mag;
}

SpectralStats spectral_stats(const Eigen::VectorXd &samples, int sample_rate) {
    if (samples.size() < 2) throw InvalidInput("spectral_stats: need at least 2 samples");
    if (sample_rate <= 0) throw InvalidInput("spectral_stats: sample_rate must be positive");

    SpectralStats st;
    const Eigen::Index n = samples.size();
    Eigen::Index crossings = 0;
    for (Eigen::Index i = 1; i < n; ++i)
        if ((samples[i] >= 0.0) != (samples[i - 1] >= 0.0)) ++crossings;
    st.zcr = static_cast<double>(crossings) / static_cast<double>(n - 1);
    st.energy = samples.squaredNorm() / static_cast<double>(n);

    const Eigen::VectorXd mag = magnitude_spectrum(samples);
    const double mag_total = mag.sum();
    if (!(mag_total > 0.0)) return st; // silent: spectral terms defined as 0

    const Eigen::VectorXd freqs =
        Eigen::VectorXd::LinSpaced(mag.size(), 0.0, static_cast<double>(mag.size() - 1)) * (static_cast<double>(sample_rate) / n);
    st.centroid_hz = freqs.dot(mag) / mag_total;
    st.bandwidth_hz = std::sqrt(((freqs.array() - st.centroid_hz).square() * mag.array()).sum() / mag_total);

    const Eigen::VectorXd power = mag.array().square();
    const double target = kRolloffFraction * power.sum();
    double running = 0.0;
    st.rolloff_hz = freqs[freqs.size() - 1];
    for (Eigen::Index k = 0; k < power.size(); ++k) {
        running += power[k];
        if (running >= target) {
            st.rolloff_hz = freqs[k];
            break;
        }
    }
    return st;
}

void write_csv(const std::string &path, const Eigen::MatrixXd &grid) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(9);
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) out << (c ? "," : "") << grid(r, c);
        out << '\n';
    }
}

} // namespace mmfuse
