#pragma once

#include "underband/common.hpp"
#include "underband/factorize.hpp"
#include "underband/io.hpp"
#include "underband/metrics.hpp"
#include "underband/selectors.hpp"
#include "underband/signal.hpp"
#include "underband/stft.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace underband {

enum class Method { nmu, nmf, sk };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::nmu: return "nmu";
        case Method::nmf: return "nmf";
        case Method::sk: return "sk";
    }
    throw InvalidArgumentError("unknown method");
}

inline Method parse_method(const std::string& name) {
    if (name == "nmu") return Method::nmu;
    if (name == "nmf") return Method::nmf;
    if (name == "sk") return Method::sk;
    throw InvalidArgumentError("unknown method: " + name + " (expected nmu, nmf, or sk)");
}

struct ExperimentConfig {
    Method method = Method::nmu;
    int rank_min = 2;
    int rank_max = 15;
    int trials = 100;
    StftParams stft;
    SolverConfig solver;
    std::int64_t base_seed = 0;
    std::string input_label;
    std::string output_dir;
    double sample_rate_hz = 0.0;  // echoed from the input signal
    bool dump_factors = false;
    bool dump_spectrogram = false;
};

struct TrialResult {
    int rank = 0;
    int trial = 0;
    std::int64_t seed = 0;
    int best_column = 0;
    double best_kurtosis = 0.0;
    double violation = 0.0;
    double residual = 0.0;
    double w_sparsity = 0.0;
};

struct RankSummary {
    int rank = 0;
    double mean_kurtosis = 0.0;
    double std_kurtosis = 0.0;
    int representative_trial = 0;
};

struct ChosenInfo {
    int rank = 0;
    int trial = 0;
    int column = 0;
    double kurtosis = 0.0;
    std::string filter_csv;
    std::string filtered_signal;
    std::string envelope_csv;
    double envelope_peak_hz = 0.0;
    double envelope_peak_amplitude = 0.0;
};

struct Report {
    ExperimentConfig config;
    std::vector<RankSummary> ranks;
    ChosenInfo chosen;
    std::string method;
    std::map<std::string, std::string> versions;
    FilterCharacteristic chosen_filter;
    Signal filtered;
    EnvelopeSpectrum envelope;
};

inline std::int64_t trial_seed(std::int64_t base_seed, int rank, int trial) {
    return base_seed + static_cast<std::int64_t>(rank) * 1000000 + trial;
}

inline int thread_cap() {
    const char* env = std::getenv("UNDERBAND_THREADS");
    if (env == nullptr) {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }
    int value = 0;
    const std::string text(env);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    require(ec == std::errc{} && ptr == text.data() + text.size() && value >= 1,
            "UNDERBAND_THREADS must be a positive integer, got \"" + text + "\"");
    return value;
}

namespace detail {

struct TrialDetail {
    TrialResult result;
    FilterCharacteristic best_filter;
    Signal filtered;
    FactorPair factors;
    bool has_factors = false;
};

inline TrialDetail run_trial_detail(const Matrix& s_mag, const Spectrogram& spec,
                                    Method method, int rank, int trial, std::int64_t seed,
                                    const SolverConfig& solver) {
    const Vector bin_freqs = bin_frequencies(spec.params, spec.sample_rate_hz);

    TrialDetail out;
    out.result.rank = rank;
    out.result.trial = trial;
    out.result.seed = seed;

    SelectorSet set;
    if (method == Method::sk) {
        set.selectors.push_back(spectral_kurtosis_selector(spec));
        Matrix weights_col = set.selectors[0].weights;
        out.result.w_sparsity = sparsity_fraction(weights_col, 1e-3);
    } else {
        const FactorPair init =
            init_random(s_mag.rows(), s_mag.cols(), rank, seed, solver.init_scale);
        FactorPair pair;
        if (method == Method::nmu) {
            NmuState state = nmu_global(s_mag, init, solver);
            pair = std::move(state.factors);
            out.result.violation = max_violation(s_mag, pair);
        } else {
            pair = nmf_multiplicative(s_mag, init, solver);
        }
        out.result.residual = reconstruction_error(s_mag, pair);
        out.result.w_sparsity = sparsity_fraction(pair.w, 1e-3);
        set = selectors_from_w(pair.w, bin_freqs, to_string(method), rank, trial);
        out.factors = std::move(pair);
        out.has_factors = true;
    }

    bool have_best = false;
    std::size_t dead_candidates = 0;
    for (auto& filt : set.selectors) {
        Signal filtered = apply_weights(spec, filt.weights);
        double kurt;
        try {
            kurt = kurtosis(filtered.samples);
        } catch (const NumericError&) {
            ++dead_candidates;  // filter produced a constant signal; never selectable
            continue;
        }
        if (!have_best || kurt > out.result.best_kurtosis) {
            out.result.best_kurtosis = kurt;
            out.result.best_column = filt.column.value_or(0);
            out.best_filter = filt;
            out.filtered = std::move(filtered);
            have_best = true;
        }
    }
    if (!have_best)
        throw NumericError("all " + std::to_string(dead_candidates) +
                           " candidate filters produced constant signals");
    out.best_filter.rank = rank;
    out.best_filter.trial = trial;
    return out;
}

template <typename Fn>
inline void parallel_jobs(std::size_t n_jobs, int n_threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n_jobs);
    if (n_threads <= 1 || n_jobs <= 1) {
        for (std::size_t i = 0; i < n_jobs; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        const auto spawn = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n_jobs);
        pool.reserve(spawn);
        for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n_jobs; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
}

}  // namespace detail

inline TrialResult run_trial(const Matrix& s_mag, const Signal& signal, Method method,
                             int rank, std::int64_t seed, const ExperimentConfig& cfg,
                             int trial = 0) {
    cfg.stft.validate();
    cfg.solver.validate();
    const Spectrogram spec = stft(signal, cfg.stft);
    require_dims(s_mag.rows() == spec.frames.rows() && s_mag.cols() == spec.frames.cols(),
                 "magnitude matrix does not match the signal's spectrogram");
    return detail::run_trial_detail(s_mag, spec, method, rank, trial, seed, cfg.solver)
        .result;
}

inline int select_representative(const std::vector<TrialResult>& results) {
    require(!results.empty(), "no trial results");
    double mean = 0.0;
    for (const auto& r : results) mean += r.best_kurtosis;
    mean /= static_cast<double>(results.size());
    int best_trial = results[0].trial;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& r : results) {
        const double dist = std::abs(r.best_kurtosis - mean);
        if (dist < best_dist) {
            best_dist = dist;
            best_trial = r.trial;
        }
    }
    return best_trial;
}

inline int choose_rank(const std::vector<RankSummary>& summaries) {
    require(!summaries.empty(), "no rank summaries");
    int best_rank = summaries[0].rank;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (const auto& s : summaries) {
        if (s.mean_kurtosis > best_mean) {
            best_mean = s.mean_kurtosis;
            best_rank = s.rank;
        }
    }
    return best_rank;
}

inline void emit_report(const Report& report, const std::string& dir);

inline Report rank_sweep(const Signal& signal, const ExperimentConfig& config) {
    signal.validate();
    config.stft.validate();
    config.solver.validate();
    require(config.trials >= 1, "trials must be positive");

    ExperimentConfig cfg = config;
    cfg.sample_rate_hz = signal.sample_rate_hz;
    if (cfg.method == Method::sk) cfg.trials = 1;

    const Spectrogram spec = stft(signal, cfg.stft);
    const Matrix s_mag = magnitude(spec);
    const auto dim_cap = std::min(s_mag.rows(), s_mag.cols());

    std::vector<int> ranks;
    if (cfg.method == Method::sk) {
        ranks.push_back(0);  // SK has no rank; 0 marks the single deterministic pass
    } else {
        require(cfg.rank_min >= 2, "rank_min must be at least 2");
        require(cfg.rank_min <= cfg.rank_max, "rank_min must not exceed rank_max");
        require(cfg.rank_max < dim_cap,
                "rank_max must be below min(I, K) = " + std::to_string(dim_cap));
        for (int r = cfg.rank_min; r <= cfg.rank_max; ++r) ranks.push_back(r);
    }

    struct Job {
        int rank;
        int trial;
    };
    std::vector<Job> jobs;
    for (int rank : ranks)
        for (int trial = 0; trial < cfg.trials; ++trial) jobs.push_back({rank, trial});

    std::vector<TrialResult> results(jobs.size());
    detail::parallel_jobs(jobs.size(), thread_cap(), [&](std::size_t i) {
        const Job& job = jobs[i];
        const std::int64_t seed = trial_seed(cfg.base_seed, job.rank, job.trial);
        try {
            results[i] = detail::run_trial_detail(s_mag, spec, cfg.method, job.rank,
                                                  job.trial, seed, cfg.solver)
                             .result;
        } catch (const std::exception& e) {
            throw Error("rank " + std::to_string(job.rank) + ", trial " +
                        std::to_string(job.trial) + ": " + e.what());
        }
    });

    Report report;
    report.config = cfg;
    report.method = to_string(cfg.method);
    report.versions = {{"underband", kVersion},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)}};

    std::ptrdiff_t offset = 0;
    for (int rank : ranks) {
        std::vector<TrialResult> rank_results(results.begin() + offset,
                                              results.begin() + offset + cfg.trials);
        offset += cfg.trials;
        RankSummary summary;
        summary.rank = rank;
        double mean = 0.0;
        for (const auto& r : rank_results) mean += r.best_kurtosis;
        mean /= static_cast<double>(rank_results.size());
        double var = 0.0;
        for (const auto& r : rank_results) {
            const double d = r.best_kurtosis - mean;
            var += d * d;
        }
        var /= static_cast<double>(rank_results.size());
        summary.mean_kurtosis = mean;
        summary.std_kurtosis = std::sqrt(var);
        summary.representative_trial = select_representative(rank_results);
        report.ranks.push_back(summary);
    }

    const int chosen_rank = choose_rank(report.ranks);
    int rep_trial = 0;
    for (const auto& s : report.ranks)
        if (s.rank == chosen_rank) rep_trial = s.representative_trial;

    detail::TrialDetail rep;
    try {
        rep = detail::run_trial_detail(s_mag, spec, cfg.method, chosen_rank, rep_trial,
                                       trial_seed(cfg.base_seed, chosen_rank, rep_trial),
                                       cfg.solver);
    } catch (const std::exception& e) {
        throw Error(std::string("representative trial failed: ") + e.what());
    }

    report.chosen.rank = chosen_rank;
    report.chosen.trial = rep_trial;
    report.chosen.column = rep.result.best_column;
    report.chosen.kurtosis = rep.result.best_kurtosis;
    report.chosen.filter_csv = "filter.csv";
    report.chosen.filtered_signal = "filtered_signal.csv";
    report.chosen.envelope_csv = "envelope.csv";
    report.chosen_filter = std::move(rep.best_filter);
    report.filtered = std::move(rep.filtered);

    report.envelope = envelope_spectrum(report.filtered);
    const CyclicPeak peak =
        dominant_cyclic_peak(report.envelope, report.envelope.resolution_hz,
                             report.envelope.freqs_hz[report.envelope.freqs_hz.size() - 1]);
    report.chosen.envelope_peak_hz = peak.freq_hz;
    report.chosen.envelope_peak_amplitude = peak.amplitude;

    if (!cfg.output_dir.empty()) {
        emit_report(report, cfg.output_dir);
        if (cfg.dump_spectrogram)
            save_spectrogram_csv(spec,
                                 (std::filesystem::path(cfg.output_dir) / "spectrogram.csv")
                                     .string());
        if (cfg.dump_factors && rep.has_factors) {
            const Vector freqs = bin_frequencies(cfg.stft, signal.sample_rate_hz);
            const Vector times = frame_times(spec);
            std::string wbody = "bin_hz";
            for (int j = 0; j < rep.factors.rank; ++j)
                wbody += ",w" + std::to_string(j);
            wbody += '\n';
            for (Eigen::Index i = 0; i < rep.factors.w.rows(); ++i) {
                wbody += format_double(freqs[i]);
                for (Eigen::Index j = 0; j < rep.factors.w.cols(); ++j) {
                    wbody += ',';
                    wbody += format_double(rep.factors.w(i, j));
                }
                wbody += '\n';
            }
            detail::write_file_atomic(
                (std::filesystem::path(cfg.output_dir) / "w.csv").string(), wbody);

            std::string vbody = "component";
            for (Eigen::Index k = 0; k < times.size(); ++k) {
                vbody += ',';
                vbody += format_double(times[k]);
            }
            vbody += '\n';
            for (Eigen::Index j = 0; j < rep.factors.v.rows(); ++j) {
                vbody += std::to_string(j);
                for (Eigen::Index k = 0; k < rep.factors.v.cols(); ++k) {
                    vbody += ',';
                    vbody += format_double(rep.factors.v(j, k));
                }
                vbody += '\n';
            }
            detail::write_file_atomic(
                (std::filesystem::path(cfg.output_dir) / "v.csv").string(), vbody);
        }
    }
    return report;
}

namespace detail {

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

}  // namespace detail

inline void emit_report(const Report& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());

    save_filter_csv(report.chosen_filter, (fs::path(dir) / report.chosen.filter_csv).string());
    save_signal(report.filtered, (fs::path(dir) / report.chosen.filtered_signal).string(),
                SignalFormat::csv);
    save_envelope_csv(report.envelope, (fs::path(dir) / report.chosen.envelope_csv).string());

    std::string summary = "method,rank,mean_kurtosis,std_kurtosis\n";
    for (const auto& s : report.ranks) {
        summary += report.method + ',' + std::to_string(s.rank) + ',' +
                   format_double(s.mean_kurtosis) + ',' + format_double(s.std_kurtosis) +
                   '\n';
    }
    detail::write_file_atomic((fs::path(dir) / "summary.csv").string(), summary);

    const ExperimentConfig& c = report.config;
    std::string j = "{\n";
    j += "  \"config\": {\n";
    j += "    \"method\": \"" + detail::json_escape(report.method) + "\",\n";
    j += "    \"input\": \"" + detail::json_escape(c.input_label) + "\",\n";
    j += "    \"output_dir\": \"" + detail::json_escape(c.output_dir) + "\",\n";
    j += "    \"rank_min\": " + std::to_string(c.rank_min) + ",\n";
    j += "    \"rank_max\": " + std::to_string(c.rank_max) + ",\n";
    j += "    \"trials\": " + std::to_string(c.trials) + ",\n";
    j += "    \"base_seed\": " + std::to_string(c.base_seed) + ",\n";
    j += "    \"sample_rate_hz\": " + format_double(c.sample_rate_hz) + ",\n";
    j += "    \"stft\": {\"window_len\": " + std::to_string(c.stft.window_len) +
         ", \"overlap\": " + std::to_string(c.stft.overlap) +
         ", \"n_dft\": " + std::to_string(c.stft.n_dft) + "},\n";
    j += "    \"solver\": {\"max_outer_iters\": " + std::to_string(c.solver.max_outer_iters) +
         ", \"inner_iters\": " + std::to_string(c.solver.inner_iters) +
         ", \"rel_tol\": " + format_double(c.solver.rel_tol) +
         ", \"rng_seed\": " + std::to_string(c.solver.rng_seed) +
         ", \"init_scale\": " + format_double(c.solver.init_scale) +
         ", \"mu0\": " + format_double(c.solver.mu0) +
         ", \"warmup_iters\": " + std::to_string(c.solver.warmup_iters) +
         ", \"push_iters\": " + std::to_string(c.solver.push_iters) +
         ", \"feas_tol\": " + format_double(c.solver.feas_tol) +
         ", \"settle_rounds\": " + std::to_string(c.solver.settle_rounds) +
         ", \"settle_sweeps\": " + std::to_string(c.solver.settle_sweeps) +
         ", \"polish_max_iters\": " + std::to_string(c.solver.polish_max_iters) + "},\n";
    j += std::string("    \"dump_factors\": ") + (c.dump_factors ? "true" : "false") + ",\n";
    j += std::string("    \"dump_spectrogram\": ") + (c.dump_spectrogram ? "true" : "false") +
         "\n";
    j += "  },\n";
    j += "  \"method\": \"" + detail::json_escape(report.method) + "\",\n";
    j += "  \"ranks\": [\n";
    for (std::size_t i = 0; i < report.ranks.size(); ++i) {
        const auto& s = report.ranks[i];
        j += "    {\"rank\": " + std::to_string(s.rank) +
             ", \"mean_kurtosis\": " + format_double(s.mean_kurtosis) +
             ", \"std_kurtosis\": " + format_double(s.std_kurtosis) +
             ", \"representative_trial\": " + std::to_string(s.representative_trial) + "}";
        j += i + 1 < report.ranks.size() ? ",\n" : "\n";
    }
    j += "  ],\n";
    j += "  \"chosen\": {\n";
    j += "    \"rank\": " + std::to_string(report.chosen.rank) + ",\n";
    j += "    \"trial\": " + std::to_string(report.chosen.trial) + ",\n";
    j += "    \"column\": " + std::to_string(report.chosen.column) + ",\n";
    j += "    \"kurtosis\": " + format_double(report.chosen.kurtosis) + ",\n";
    j += "    \"filter_csv\": \"" + detail::json_escape(report.chosen.filter_csv) + "\",\n";
    j += "    \"filtered_signal\": \"" + detail::json_escape(report.chosen.filtered_signal) +
         "\",\n";
    j += "    \"envelope_csv\": \"" + detail::json_escape(report.chosen.envelope_csv) +
         "\",\n";
    j += "    \"envelope_peak_hz\": " + format_double(report.chosen.envelope_peak_hz) + ",\n";
    j += "    \"envelope_peak_amplitude\": " +
         format_double(report.chosen.envelope_peak_amplitude) + "\n";
    j += "  },\n";
    j += "  \"versions\": {";
    for (auto it = report.versions.begin(); it != report.versions.end(); ++it) {
        if (it != report.versions.begin()) j += ", ";
        j += "\"" + detail::json_escape(it->first) + "\": \"" +
             detail::json_escape(it->second) + "\"";
    }
    j += "}\n";
    j += "}\n";
    detail::write_file_atomic((fs::path(dir) / "report.json").string(), j);
}

namespace detail {

inline std::vector<std::pair<double, double>> load_two_column_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("unreadable file: " + path);
    std::vector<std::pair<double, double>> rows;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string token = trim(line);
        if (token.empty()) continue;
        const auto comma = token.find(',');
        double a = 0.0, b = 0.0;
        const bool ok = comma != std::string::npos &&
                        parse_double(trim(token.substr(0, comma)), a) &&
                        parse_double(trim(token.substr(comma + 1)), b);
        if (!ok) {
            if (first) {
                first = false;
                continue;  // header
            }
            throw FormatError("bad row at line " + std::to_string(line_no) + ": " + path);
        }
        first = false;
        rows.emplace_back(a, b);
    }
    if (rows.empty()) throw FormatError("no rows in file: " + path);
    return rows;
}

}  // namespace detail

inline Report parse_report(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string path = (fs::path(dir) / "report.json").string();
    std::ifstream in(path);
    if (!in) throw IoError("unreadable file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("cannot parse " + path + ": " + e.what());
    }

    try {
        Report report;
        const auto& jc = j.at("config");
        report.method = j.at("method").get<std::string>();
        report.config.method = parse_method(jc.at("method").get<std::string>());
        report.config.input_label = jc.at("input").get<std::string>();
        report.config.output_dir = jc.at("output_dir").get<std::string>();
        report.config.rank_min = jc.at("rank_min").get<int>();
        report.config.rank_max = jc.at("rank_max").get<int>();
        report.config.trials = jc.at("trials").get<int>();
        report.config.base_seed = jc.at("base_seed").get<std::int64_t>();
        report.config.sample_rate_hz = jc.at("sample_rate_hz").get<double>();
        report.config.stft.window_len = jc.at("stft").at("window_len").get<int>();
        report.config.stft.overlap = jc.at("stft").at("overlap").get<int>();
        report.config.stft.n_dft = jc.at("stft").at("n_dft").get<int>();
        const auto& js = jc.at("solver");
        report.config.solver.max_outer_iters = js.at("max_outer_iters").get<int>();
        report.config.solver.inner_iters = js.at("inner_iters").get<int>();
        report.config.solver.rel_tol = js.at("rel_tol").get<double>();
        report.config.solver.rng_seed = js.at("rng_seed").get<std::int64_t>();
        report.config.solver.init_scale = js.at("init_scale").get<double>();
        report.config.solver.mu0 = js.at("mu0").get<double>();
        report.config.solver.warmup_iters = js.at("warmup_iters").get<int>();
        report.config.solver.push_iters = js.at("push_iters").get<int>();
        report.config.solver.feas_tol = js.at("feas_tol").get<double>();
        report.config.solver.settle_rounds = js.at("settle_rounds").get<int>();
        report.config.solver.settle_sweeps = js.at("settle_sweeps").get<int>();
        report.config.solver.polish_max_iters = js.at("polish_max_iters").get<int>();
        report.config.dump_factors = jc.at("dump_factors").get<bool>();
        report.config.dump_spectrogram = jc.at("dump_spectrogram").get<bool>();

        for (const auto& jr : j.at("ranks")) {
            RankSummary s;
            s.rank = jr.at("rank").get<int>();
            s.mean_kurtosis = jr.at("mean_kurtosis").get<double>();
            s.std_kurtosis = jr.at("std_kurtosis").get<double>();
            s.representative_trial = jr.at("representative_trial").get<int>();
            report.ranks.push_back(s);
        }

        const auto& jch = j.at("chosen");
        report.chosen.rank = jch.at("rank").get<int>();
        report.chosen.trial = jch.at("trial").get<int>();
        report.chosen.column = jch.at("column").get<int>();
        report.chosen.kurtosis = jch.at("kurtosis").get<double>();
        report.chosen.filter_csv = jch.at("filter_csv").get<std::string>();
        report.chosen.filtered_signal = jch.at("filtered_signal").get<std::string>();
        report.chosen.envelope_csv = jch.at("envelope_csv").get<std::string>();
        report.chosen.envelope_peak_hz = jch.at("envelope_peak_hz").get<double>();
        report.chosen.envelope_peak_amplitude =
            jch.at("envelope_peak_amplitude").get<double>();

        for (const auto& [key, value] : j.at("versions").items())
            report.versions[key] = value.get<std::string>();

        const auto filter_rows =
            detail::load_two_column_csv((fs::path(dir) / report.chosen.filter_csv).string());
        report.chosen_filter.weights.resize(static_cast<Eigen::Index>(filter_rows.size()));
        report.chosen_filter.bin_freqs_hz.resize(
            static_cast<Eigen::Index>(filter_rows.size()));
        for (std::size_t i = 0; i < filter_rows.size(); ++i) {
            report.chosen_filter.bin_freqs_hz[static_cast<Eigen::Index>(i)] =
                filter_rows[i].first;
            report.chosen_filter.weights[static_cast<Eigen::Index>(i)] =
                filter_rows[i].second;
        }
        report.chosen_filter.source = report.method;
        report.chosen_filter.rank = report.chosen.rank;
        report.chosen_filter.trial = report.chosen.trial;
        report.chosen_filter.column = report.chosen.column;

        report.filtered =
            load_csv((fs::path(dir) / report.chosen.filtered_signal).string(),
                     report.config.sample_rate_hz);

        const auto env_rows =
            detail::load_two_column_csv((fs::path(dir) / report.chosen.envelope_csv).string());
        report.envelope.freqs_hz.resize(static_cast<Eigen::Index>(env_rows.size()));
        report.envelope.amplitudes.resize(static_cast<Eigen::Index>(env_rows.size()));
        for (std::size_t i = 0; i < env_rows.size(); ++i) {
            report.envelope.freqs_hz[static_cast<Eigen::Index>(i)] = env_rows[i].first;
            report.envelope.amplitudes[static_cast<Eigen::Index>(i)] = env_rows[i].second;
        }
        report.envelope.resolution_hz =
            env_rows.size() > 1 ? env_rows[1].first - env_rows[0].first : 0.0;
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed report in " + dir + ": " + e.what());
    }
}

namespace detail {

inline bool vec_equal(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace detail

inline bool operator==(const StftParams& a, const StftParams& b) {
    return a.window_len == b.window_len && a.overlap == b.overlap && a.n_dft == b.n_dft;
}

inline bool operator==(const SolverConfig& a, const SolverConfig& b) {
    return a.max_outer_iters == b.max_outer_iters && a.inner_iters == b.inner_iters &&
           a.rel_tol == b.rel_tol && a.rng_seed == b.rng_seed &&
           a.init_scale == b.init_scale && a.mu0 == b.mu0 &&
           a.warmup_iters == b.warmup_iters && a.push_iters == b.push_iters &&
           a.feas_tol == b.feas_tol && a.settle_rounds == b.settle_rounds &&
           a.settle_sweeps == b.settle_sweeps && a.polish_max_iters == b.polish_max_iters;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.method == b.method && a.rank_min == b.rank_min && a.rank_max == b.rank_max &&
           a.trials == b.trials && a.stft == b.stft && a.solver == b.solver &&
           a.base_seed == b.base_seed && a.input_label == b.input_label &&
           a.output_dir == b.output_dir && a.sample_rate_hz == b.sample_rate_hz &&
           a.dump_factors == b.dump_factors && a.dump_spectrogram == b.dump_spectrogram;
}

inline bool operator==(const RankSummary& a, const RankSummary& b) {
    return a.rank == b.rank && a.mean_kurtosis == b.mean_kurtosis &&
           a.std_kurtosis == b.std_kurtosis &&
           a.representative_trial == b.representative_trial;
}

inline bool operator==(const ChosenInfo& a, const ChosenInfo& b) {
    return a.rank == b.rank && a.trial == b.trial && a.column == b.column &&
           a.kurtosis == b.kurtosis && a.filter_csv == b.filter_csv &&
           a.filtered_signal == b.filtered_signal && a.envelope_csv == b.envelope_csv &&
           a.envelope_peak_hz == b.envelope_peak_hz &&
           a.envelope_peak_amplitude == b.envelope_peak_amplitude;
}

inline bool operator==(const FilterCharacteristic& a, const FilterCharacteristic& b) {
    return detail::vec_equal(a.weights, b.weights) &&
           detail::vec_equal(a.bin_freqs_hz, b.bin_freqs_hz) && a.source == b.source &&
           a.rank == b.rank && a.trial == b.trial && a.column == b.column;
}

inline bool operator==(const Report& a, const Report& b) {
    return a.config == b.config && a.ranks == b.ranks && a.chosen == b.chosen &&
           a.method == b.method && a.versions == b.versions &&
           a.chosen_filter == b.chosen_filter &&
           a.filtered.samples == b.filtered.samples &&
           a.filtered.sample_rate_hz == b.filtered.sample_rate_hz &&
           detail::vec_equal(a.envelope.freqs_hz, b.envelope.freqs_hz) &&
           detail::vec_equal(a.envelope.amplitudes, b.envelope.amplitudes);
}

}  // namespace underband
