#pragma once

#include "underband/common.hpp"
#include "underband/io.hpp"
#include "underband/signal.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace underband {

struct StftParams {
    int window_len = 128;
    int overlap = 100;
    int n_dft = 512;

    int hop() const { return window_len - overlap; }
    int n_bins() const { return n_dft / 2 + 1; }

    void validate() const {
        require(window_len >= 2, "window_len must be at least 2");
        require(overlap >= 0, "overlap must be non-negative");
        require(overlap < window_len, "overlap must be smaller than window_len");
        require(n_dft >= window_len, "n_dft must be at least window_len");
    }
};

struct Spectrogram {
    ComplexMatrix frames;  // n_bins x n_frames
    StftParams params;
    double sample_rate_hz = 0.0;
    std::size_t original_len = 0;

    void validate() const {
        params.validate();
        require(sample_rate_hz > 0.0, "sample rate must be positive");
        require_dims(frames.rows() == params.n_bins(), "spectrogram row count != n_dft/2 + 1");
        require(original_len >= static_cast<std::size_t>(params.window_len),
                "original length shorter than one window");
        const auto expect_k =
            static_cast<Eigen::Index>((original_len - params.window_len) / params.hop() + 1);
        require_dims(frames.cols() == expect_k,
                     "spectrogram frame count inconsistent with original length");
    }
};

inline std::vector<double> hamming_window(int n) {
    require(n >= 2, "window length must be at least 2");
    std::vector<double> w(n);
    for (int k = 0; k < n; ++k)
        w[k] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * k / n);
    return w;
}

inline Spectrogram stft(const Signal& signal, const StftParams& params) {
    params.validate();
    signal.validate();
    const auto len = signal.samples.size();
    require(len >= static_cast<std::size_t>(params.window_len),
            "signal shorter than one window");

    const int hop = params.hop();
    const int n_bins = params.n_bins();
    const auto n_frames =
        static_cast<Eigen::Index>((len - params.window_len) / hop + 1);
    const auto window = hamming_window(params.window_len);

    ComplexMatrix frames(n_bins, n_frames);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> in(params.n_dft), out(params.n_dft);
    for (Eigen::Index k = 0; k < n_frames; ++k) {
        const std::size_t base = static_cast<std::size_t>(k) * hop;
        for (int j = 0; j < params.window_len; ++j)
            in[j] = signal.samples[base + j] * window[j];
        for (int j = params.window_len; j < params.n_dft; ++j) in[j] = 0.0;
        fft.fwd(out, in);
        for (int i = 0; i < n_bins; ++i) frames(i, k) = out[i];
    }
    return Spectrogram{std::move(frames), params, signal.sample_rate_hz, len};
}

inline Signal istft(const Spectrogram& spec) {
    spec.validate();
    const StftParams& p = spec.params;
    const int hop = p.hop();
    const int n_bins = p.n_bins();
    const auto n_frames = spec.frames.cols();
    const auto window = hamming_window(p.window_len);

    std::vector<double> acc(spec.original_len, 0.0);
    std::vector<double> env(spec.original_len, 0.0);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> full(p.n_dft), time(p.n_dft);
    for (Eigen::Index k = 0; k < n_frames; ++k) {
        for (int i = 0; i < n_bins; ++i) full[i] = spec.frames(i, k);
        for (int i = n_bins; i < p.n_dft; ++i) full[i] = std::conj(full[p.n_dft - i]);
        fft.inv(time, full);
        const std::size_t base = static_cast<std::size_t>(k) * hop;
        for (int j = 0; j < p.window_len && base + j < spec.original_len; ++j) {
            acc[base + j] += time[j].real() * window[j];
            env[base + j] += window[j] * window[j];
        }
    }
    double env_max = 0.0;
    for (double e : env) env_max = std::max(env_max, e);
    const double floor = 1e-12 * env_max;
    for (std::size_t i = 0; i < acc.size(); ++i)
        acc[i] = env[i] > floor ? acc[i] / env[i] : 0.0;
    return Signal{std::move(acc), spec.sample_rate_hz};
}

inline Matrix magnitude(const Spectrogram& spec) {
    return spec.frames.cwiseAbs();
}

inline Vector bin_frequencies(const StftParams& params, double sample_rate_hz) {
    const int n_bins = params.n_bins();
    Vector f(n_bins);
    for (int i = 0; i < n_bins; ++i) f[i] = i * sample_rate_hz / params.n_dft;
    return f;
}

inline Vector frame_times(const Spectrogram& spec) {
    Vector t(spec.frames.cols());
    for (Eigen::Index k = 0; k < t.size(); ++k)
        t[k] = (static_cast<double>(k) * spec.params.hop() + spec.params.window_len / 2.0) /
               spec.sample_rate_hz;
    return t;
}

// Magnitude dump: header row of frame times, first column of bin frequencies.
inline void save_spectrogram_csv(const Spectrogram& spec, const std::string& path) {
    const Matrix mag = magnitude(spec);
    const Vector freqs = bin_frequencies(spec.params, spec.sample_rate_hz);
    const Vector times = frame_times(spec);
    std::string body = "bin_hz";
    for (Eigen::Index k = 0; k < times.size(); ++k) {
        body += ',';
        body += format_double(times[k]);
    }
    body += '\n';
    for (Eigen::Index i = 0; i < mag.rows(); ++i) {
        body += format_double(freqs[i]);
        for (Eigen::Index k = 0; k < mag.cols(); ++k) {
            body += ',';
            body += format_double(mag(i, k));
        }
        body += '\n';
    }
    detail::write_file_atomic(path, body);
}

}  // namespace underband
