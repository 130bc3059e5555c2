#pragma once

#include "underband/common.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace underband {

struct Signal {
    std::vector<double> samples;
    double sample_rate_hz = 0.0;

    void validate() const {
        require(!samples.empty(), "signal has no samples");
        require(sample_rate_hz > 0.0, "sample rate must be positive");
        for (double s : samples)
            if (!std::isfinite(s)) throw NumericError("signal contains non-finite sample");
    }
};

struct FaultSignalSpec {
    double duration_s = 1.0;
    double sample_rate_hz = 50000.0;
    double fault_freq_hz = 91.5;
    double carrier_freq_hz = 20000.0;
    double decay_rate = 800.0;
    double impulse_amplitude = 1.0;
    double noise_std = 0.19;
    double noise_color_pole = 0.95;
    std::int64_t rng_seed = 0;

    void validate() const {
        require(duration_s > 0.0, "duration_s must be positive");
        require(sample_rate_hz > 0.0, "sample_rate_hz must be positive");
        require(fault_freq_hz > 0.0, "fault_freq_hz must be positive");
        require(carrier_freq_hz > 0.0, "carrier_freq_hz must be positive");
        require(decay_rate > 0.0, "decay_rate must be positive");
        require(impulse_amplitude > 0.0, "impulse_amplitude must be positive");
        require(noise_std >= 0.0, "noise_std must be non-negative");
        require(noise_color_pole >= 0.0 && noise_color_pole < 1.0,
                "noise_color_pole must lie in [0, 1)");
        require(carrier_freq_hz < sample_rate_hz / 2.0,
                "carrier_freq_hz must be below the Nyquist frequency");
        require(fault_freq_hz < carrier_freq_hz,
                "fault_freq_hz must be below carrier_freq_hz");
    }
};

namespace detail {

// Box-Muller on raw mt19937_64 words: fully pinned sequence (the standard
// normal_distribution leaves the sequence implementation-defined).
class SeededGaussian {
public:
    explicit SeededGaussian(std::int64_t seed)
        : rng_(static_cast<std::uint64_t>(seed)) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01(rng_());  // (0, 1]
        double u2 = uniform01(rng_());        // [0, 1)
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace detail

inline std::vector<double> generate_colored_noise(std::size_t n, double std_dev, double pole,
                                                  std::int64_t seed) {
    require(n > 0, "noise length must be positive");
    require(std_dev >= 0.0, "noise std must be non-negative");
    require(pole >= 0.0 && pole < 1.0, "noise pole must lie in [0, 1)");
    std::vector<double> y(n, 0.0);
    if (std_dev == 0.0) return y;

    detail::SeededGaussian gauss(seed);
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        prev = pole * prev + gauss();
        y[i] = prev;
    }
    if (n > 1) {
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        if (var > 0.0) {
            double scale = std_dev / std::sqrt(var);
            for (double& v : y) v *= scale;
        }
    }
    return y;
}

inline Signal generate_fault_signal(const FaultSignalSpec& spec) {
    spec.validate();
    const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
    require(n > 0, "spec produces an empty signal");

    std::vector<double> x(n, 0.0);
    const double fs = spec.sample_rate_hz;
    const double two_pi_fc = 2.0 * std::numbers::pi * spec.carrier_freq_hz;
    // exp(-46) < 1e-19: contributions past this point are below double noise.
    const double tail_s = 46.0 / spec.decay_rate;

    for (std::size_t k = 0;; ++k) {
        const double t_k = static_cast<double>(k) / spec.fault_freq_hz;
        if (t_k >= spec.duration_s) break;
        auto n0 = static_cast<std::size_t>(std::ceil(t_k * fs - 1e-9));
        auto n1 = static_cast<std::size_t>(std::ceil((t_k + tail_s) * fs));
        if (n1 > n) n1 = n;
        for (std::size_t i = n0; i < n1; ++i) {
            const double dt = static_cast<double>(i) / fs - t_k;
            x[i] += spec.impulse_amplitude * std::exp(-spec.decay_rate * dt) *
                    std::sin(two_pi_fc * dt);
        }
    }

    if (spec.noise_std > 0.0) {
        const auto noise =
            generate_colored_noise(n, spec.noise_std, spec.noise_color_pole, spec.rng_seed);
        for (std::size_t i = 0; i < n; ++i) x[i] += noise[i];
    }
    return Signal{std::move(x), fs};
}

}  // namespace underband
