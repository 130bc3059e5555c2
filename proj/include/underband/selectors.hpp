#pragma once

#include "underband/common.hpp"
#include "underband/io.hpp"
#include "underband/metrics.hpp"
#include "underband/stft.hpp"

#include <optional>
#include <string>
#include <vector>

namespace underband {

struct FilterCharacteristic {
    Vector weights;       // one weight per STFT bin, max-normalized
    Vector bin_freqs_hz;  // same length
    std::string source;   // nmu | nmf | sk | custom
    std::optional<int> rank;
    std::optional<int> trial;
    std::optional<int> column;

    void validate() const {
        require_dims(weights.size() == bin_freqs_hz.size() && weights.size() > 0,
                     "filter weights and bin frequencies must match");
        require((weights.array() >= 0.0).all(), "filter weights must be non-negative");
        require(weights.maxCoeff() > 0.0, "filter weights must not be all zero");
    }
};

struct SelectorSet {
    std::vector<FilterCharacteristic> selectors;
    int dropped_columns = 0;
};

inline SelectorSet selectors_from_w(const Matrix& w, const Vector& bin_freqs,
                                    const std::string& source,
                                    std::optional<int> rank = std::nullopt,
                                    std::optional<int> trial = std::nullopt) {
    require_dims(w.rows() == bin_freqs.size(), "W row count must match the bin count");
    require((w.array() >= 0.0).all(), "W must be non-negative");

    SelectorSet set;
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double col_max = w.col(j).maxCoeff();
        if (col_max <= 0.0) {
            ++set.dropped_columns;
            continue;
        }
        FilterCharacteristic filt;
        filt.weights = w.col(j) / col_max;
        filt.bin_freqs_hz = bin_freqs;
        filt.source = source;
        filt.rank = rank;
        filt.trial = trial;
        filt.column = static_cast<int>(j);
        set.selectors.push_back(std::move(filt));
    }
    require(!set.selectors.empty(), "all columns of W are zero");
    return set;
}

namespace detail {

inline Vector spectral_kurtosis_weights(const Matrix& s_magnitude) {
    require(s_magnitude.cols() >= 4, "spectral kurtosis needs at least 4 frames");
    const auto n_bins = s_magnitude.rows();
    const double inv_k = 1.0 / static_cast<double>(s_magnitude.cols());
    Vector weights(n_bins);
    for (Eigen::Index i = 0; i < n_bins; ++i) {
        double m2 = 0.0, m4 = 0.0;
        for (Eigen::Index k = 0; k < s_magnitude.cols(); ++k) {
            const double a2 = s_magnitude(i, k) * s_magnitude(i, k);
            m2 += a2;
            m4 += a2 * a2;
        }
        m2 *= inv_k;
        m4 *= inv_k;
        const double sk = m2 > 0.0 ? m4 / (m2 * m2) - 2.0 : 0.0;
        weights[i] = std::max(sk, 0.0);
    }
    return weights;
}

}  // namespace detail

inline FilterCharacteristic spectral_kurtosis_selector(const Spectrogram& spec) {
    spec.validate();
    Vector weights = detail::spectral_kurtosis_weights(magnitude(spec));
    const double w_max = weights.maxCoeff();
    require(w_max > 0.0, "spectral kurtosis produced no positive weights");
    FilterCharacteristic filt;
    filt.weights = weights / w_max;
    filt.bin_freqs_hz = bin_frequencies(spec.params, spec.sample_rate_hz);
    filt.source = "sk";
    filt.column = 0;
    return filt;
}

namespace detail {

inline Signal apply_weights(const Spectrogram& spec, const Vector& weights) {
    Spectrogram masked = spec;
    for (Eigen::Index i = 0; i < masked.frames.rows(); ++i)
        masked.frames.row(i) *= weights[i];
    return istft(masked);
}

}  // namespace detail

inline Signal apply_selector(const Signal& signal, const FilterCharacteristic& filt,
                             const StftParams& params) {
    params.validate();
    require_dims(filt.weights.size() == params.n_bins(),
                 "filter length must equal n_dft/2 + 1");
    filt.validate();
    return detail::apply_weights(stft(signal, params), filt.weights);
}

inline void save_filter_csv(const FilterCharacteristic& filt, const std::string& path) {
    filt.validate();
    std::string body = "frequency_hz,weight\n";
    for (Eigen::Index i = 0; i < filt.weights.size(); ++i) {
        body += format_double(filt.bin_freqs_hz[i]);
        body += ',';
        body += format_double(filt.weights[i]);
        body += '\n';
    }
    detail::write_file_atomic(path, body);
}

}  // namespace underband
