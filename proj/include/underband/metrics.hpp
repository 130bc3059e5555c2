#pragma once

#include "underband/common.hpp"
#include "underband/io.hpp"
#include "underband/signal.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

namespace underband {

template <typename Sequence>
inline double kurtosis(const Sequence& x) {
    const auto n = static_cast<std::size_t>(x.size());
    require(n >= 4, "kurtosis needs at least 4 samples");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<double>(n);
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 <= 0.0) throw NumericError("kurtosis undefined for constant input");
    return m4 / (m2 * m2);
}

inline double sparsity_fraction(const Matrix& m, double rel_threshold) {
    require(m.size() > 0, "sparsity_fraction needs a non-empty matrix");
    require(rel_threshold > 0.0, "rel_threshold must be positive");
    const double max_abs = m.cwiseAbs().maxCoeff();
    if (max_abs == 0.0) return 1.0;
    const double thr = rel_threshold * max_abs;
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (std::abs(m(i, j)) < thr) ++count;
    return static_cast<double>(count) / static_cast<double>(m.size());
}

struct EnvelopeSpectrum {
    Vector freqs_hz;
    Vector amplitudes;
    double resolution_hz = 0.0;
};

inline EnvelopeSpectrum envelope_spectrum(const Signal& signal) {
    signal.validate();
    const auto n = signal.samples.size();
    require(n >= 16, "envelope_spectrum needs at least 16 samples");

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> buf(n), spec(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = signal.samples[i];
    fft.fwd(spec, buf);

    // Analytic signal: zero the negative frequencies, double the positive ones.
    const std::size_t half = n / 2;
    for (std::size_t k = 1; k < (n + 1) / 2; ++k) spec[k] *= 2.0;
    for (std::size_t k = half + 1; k < n; ++k) spec[k] = 0.0;
    fft.inv(buf, spec);

    std::vector<double> env(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        env[i] = std::abs(buf[i]);
        mean += env[i];
    }
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = env[i] - mean;
    fft.fwd(spec, buf);

    const auto n_out = static_cast<Eigen::Index>(half + 1);
    EnvelopeSpectrum es;
    es.freqs_hz.resize(n_out);
    es.amplitudes.resize(n_out);
    es.resolution_hz = signal.sample_rate_hz / static_cast<double>(n);
    for (Eigen::Index k = 0; k < n_out; ++k) {
        es.freqs_hz[k] = static_cast<double>(k) * es.resolution_hz;
        es.amplitudes[k] = std::abs(spec[static_cast<std::size_t>(k)]);
    }
    return es;
}

struct CyclicPeak {
    double freq_hz = 0.0;
    double amplitude = 0.0;
};

inline CyclicPeak dominant_cyclic_peak(const EnvelopeSpectrum& es, double search_lo_hz,
                                       double search_hi_hz) {
    require(es.freqs_hz.size() == es.amplitudes.size() && es.freqs_hz.size() > 1,
            "malformed envelope spectrum");
    require(search_lo_hz > 0.0, "search band must start above 0 Hz");
    require(search_lo_hz < search_hi_hz, "search band must be non-empty");
    require(search_hi_hz <= es.freqs_hz[es.freqs_hz.size() - 1] + 1e-9,
            "search band exceeds the spectrum range");

    CyclicPeak best;
    bool found = false;
    for (Eigen::Index k = 1; k < es.freqs_hz.size(); ++k) {
        const double f = es.freqs_hz[k];
        if (f < search_lo_hz || f > search_hi_hz) continue;
        if (!found || es.amplitudes[k] > best.amplitude) {
            best = CyclicPeak{f, es.amplitudes[k]};
            found = true;
        }
    }
    require(found, "no spectrum bins inside the search band");
    return best;
}

inline void save_envelope_csv(const EnvelopeSpectrum& es, const std::string& path) {
    std::string body = "frequency_hz,amplitude\n";
    for (Eigen::Index k = 0; k < es.freqs_hz.size(); ++k) {
        body += format_double(es.freqs_hz[k]);
        body += ',';
        body += format_double(es.amplitudes[k]);
        body += '\n';
    }
    detail::write_file_atomic(path, body);
}

}  // namespace underband
