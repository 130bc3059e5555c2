#include <catch2/catch_amalgamated.hpp>

#include <underband/harness.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

using namespace underband;

namespace {

// Stationary hum around 2 kHz plus impulsive bursts around 7 kHz: an exact
// two-band mixture whose informative band is known by construction.
Signal two_band_mixture(double fs = 20000.0, double duration_s = 0.8) {
    const auto n = static_cast<std::size_t>(fs * duration_s);
    std::vector<double> x(n);
    detail::SeededGaussian gauss(202);
    double am = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        am = 0.999 * am + 0.045 * gauss();  // slowly wandering amplitude
        x[i] = (1.0 + am) * std::sin(2.0 * std::numbers::pi * 2000.0 * t);
    }
    const double burst_rate = 20.0;
    for (int k = 0; k * fs / burst_rate < static_cast<double>(n); ++k) {
        const double t_k = static_cast<double>(k) / burst_rate;
        const auto n0 = static_cast<std::size_t>(std::ceil(t_k * fs));
        for (std::size_t i = n0; i < std::min(n, n0 + 400); ++i) {
            const double dt = static_cast<double>(i) / fs - t_k;
            x[i] += 2.0 * std::exp(-600.0 * dt) *
                    std::sin(2.0 * std::numbers::pi * 7000.0 * dt);
        }
    }
    return Signal{std::move(x), fs};
}

struct EnvGuard {
    std::string name;
    std::string saved;
    bool had = false;

    explicit EnvGuard(const std::string& var) : name(var) {
        const char* v = std::getenv(var.c_str());
        if (v != nullptr) {
            had = true;
            saved = v;
        }
    }
    void set(const std::string& value) { ::setenv(name.c_str(), value.c_str(), 1); }
    void unset() { ::unsetenv(name.c_str()); }
    ~EnvGuard() {
        if (had)
            ::setenv(name.c_str(), saved.c_str(), 1);
        else
            ::unsetenv(name.c_str());
    }
};

std::filesystem::path temp_dir(const std::string& leaf) {
    const auto dir = std::filesystem::temp_directory_path() / "underband_harness_test" / leaf;
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("method names round-trip and reject junk") {
    CHECK(to_string(Method::nmu) == "nmu");
    CHECK(parse_method("nmf") == Method::nmf);
    CHECK(parse_method("sk") == Method::sk);
    CHECK_THROWS_AS(parse_method("pca"), InvalidArgumentError);
}

TEST_CASE("trial seeds separate ranks and trials") {
    CHECK(trial_seed(5, 3, 7) == 5 + 3000000 + 7);
    CHECK(trial_seed(0, 2, 0) != trial_seed(0, 2, 1));
    CHECK(trial_seed(0, 2, 999999) != trial_seed(0, 3, 0));
}

TEST_CASE("thread cap honors the environment override") {
    EnvGuard guard("UNDERBAND_THREADS");
    guard.set("4");
    CHECK(thread_cap() == 4);
    guard.set("1");
    CHECK(thread_cap() == 1);
    guard.unset();
    CHECK(thread_cap() >= 1);
    guard.set("zero");
    CHECK_THROWS_AS(thread_cap(), InvalidArgumentError);
    guard.set("0");
    CHECK_THROWS_AS(thread_cap(), InvalidArgumentError);
}

TEST_CASE("spectral-kurtosis trials are single and deterministic") {
    const Signal sig = two_band_mixture();
    ExperimentConfig cfg;
    cfg.method = Method::sk;
    const Matrix s_mag = magnitude(stft(sig, cfg.stft));

    const TrialResult a = run_trial(s_mag, sig, Method::sk, 0, 0, cfg);
    const TrialResult b = run_trial(s_mag, sig, Method::sk, 0, 0, cfg);
    CHECK(a.best_column == 0);
    CHECK(a.best_kurtosis == b.best_kurtosis);
    CHECK(a.w_sparsity == b.w_sparsity);
}

TEST_CASE("repeated trials with one seed are identical") {
    const Signal sig = two_band_mixture();
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    const Matrix s_mag = magnitude(stft(sig, cfg.stft));

    const TrialResult a = run_trial(s_mag, sig, Method::nmf, 2, 42, cfg, 1);
    const TrialResult b = run_trial(s_mag, sig, Method::nmf, 2, 42, cfg, 1);
    CHECK(a.rank == 2);
    CHECK(a.trial == 1);
    CHECK(a.seed == 42);
    CHECK(a.best_column == b.best_column);
    CHECK(a.best_kurtosis == b.best_kurtosis);
    CHECK(a.residual == b.residual);
    CHECK(a.w_sparsity == b.w_sparsity);
}

TEST_CASE("rank-2 NMF on a two-band mixture picks the impulsive band") {
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    cfg.rank_min = 2;
    cfg.rank_max = 2;
    cfg.trials = 1;
    cfg.base_seed = 7;

    const Report report = rank_sweep(two_band_mixture(), cfg);
    Eigen::Index argmax = 0;
    report.chosen_filter.weights.maxCoeff(&argmax);
    const double peak_freq = report.chosen_filter.bin_freqs_hz[argmax];
    CHECK(std::abs(peak_freq - 7000.0) <= 1500.0);
}

TEST_CASE("degenerate sweep reduces to a single trial's data") {
    const Signal sig = two_band_mixture();
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    cfg.rank_min = 2;
    cfg.rank_max = 2;
    cfg.trials = 1;
    cfg.base_seed = 3;

    const Report report = rank_sweep(sig, cfg);
    REQUIRE(report.ranks.size() == 1);
    CHECK(report.ranks[0].rank == 2);
    CHECK(report.ranks[0].std_kurtosis == 0.0);
    CHECK(report.ranks[0].representative_trial == 0);
    CHECK(report.chosen.rank == 2);
    CHECK(report.chosen.trial == 0);

    const Matrix s_mag = magnitude(stft(sig, cfg.stft));
    const TrialResult single =
        run_trial(s_mag, sig, Method::nmf, 2, trial_seed(3, 2, 0), cfg, 0);
    CHECK(report.chosen.kurtosis == single.best_kurtosis);
    CHECK(report.ranks[0].mean_kurtosis == single.best_kurtosis);
    CHECK(report.chosen.column == single.best_column);
}

TEST_CASE("representative trial is the one closest to the mean") {
    std::vector<TrialResult> results(3);
    for (int t = 0; t < 3; ++t) results[t].trial = t;
    results[0].best_kurtosis = 10.0;
    results[1].best_kurtosis = 20.0;
    results[2].best_kurtosis = 30.0;
    CHECK(select_representative(results) == 1);

    results.resize(2);
    results[0].best_kurtosis = 10.0;
    results[1].best_kurtosis = 30.0;
    CHECK(select_representative(results) == 0);  // tie at distance 10: lowest trial

    results.resize(1);
    CHECK(select_representative(results) == 0);
}

TEST_CASE("rank choice maximizes mean kurtosis with low-rank tie-break") {
    std::vector<RankSummary> summaries(2);
    summaries[0].rank = 2;
    summaries[0].mean_kurtosis = 5.0;
    summaries[1].rank = 3;
    summaries[1].mean_kurtosis = 5.0;
    CHECK(choose_rank(summaries) == 2);

    summaries[1].mean_kurtosis = 6.0;
    CHECK(choose_rank(summaries) == 3);
}

TEST_CASE("sweep validates rank bounds against the spectrogram") {
    const Signal sig{std::vector<double>(1000, 0.0), 8000.0};
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    cfg.trials = 1;

    cfg.rank_min = 1;
    cfg.rank_max = 2;
    CHECK_THROWS_AS(rank_sweep(sig, cfg), InvalidArgumentError);

    cfg.rank_min = 3;
    cfg.rank_max = 2;
    CHECK_THROWS_AS(rank_sweep(sig, cfg), InvalidArgumentError);

    // 1000 samples -> 32 frames, so min(I, K) = 32 caps the rank.
    cfg.rank_min = 2;
    cfg.rank_max = 32;
    CHECK_THROWS_AS(rank_sweep(sig, cfg), InvalidArgumentError);

    cfg.rank_max = 5;
    cfg.trials = 0;
    CHECK_THROWS_AS(rank_sweep(sig, cfg), InvalidArgumentError);
}

TEST_CASE("trial failures carry their rank and trial context") {
    // An all-zero signal drives every NMF factor to zero, so the trial fails
    // inside the sweep and the error must say which job died.
    const Signal sig{std::vector<double>(4000, 0.0), 8000.0};
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    cfg.rank_min = 2;
    cfg.rank_max = 2;
    cfg.trials = 1;
    CHECK_THROWS_WITH(rank_sweep(sig, cfg),
                      Catch::Matchers::ContainsSubstring("rank 2, trial 0"));
}

TEST_CASE("sweep results are identical across thread counts") {
    EnvGuard guard("UNDERBAND_THREADS");
    FaultSignalSpec spec;
    spec.duration_s = 0.3;
    spec.rng_seed = 55;
    const Signal sig = generate_fault_signal(spec);

    ExperimentConfig cfg;
    cfg.method = Method::nmu;
    cfg.rank_min = 2;
    cfg.rank_max = 3;
    cfg.trials = 2;
    cfg.base_seed = 9;

    guard.set("1");
    const Report serial = rank_sweep(sig, cfg);
    guard.set("3");
    const Report threaded = rank_sweep(sig, cfg);
    CHECK(serial == threaded);
}

TEST_CASE("emitted reports parse back equal") {
    const auto dir = temp_dir("roundtrip");
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    cfg.rank_min = 2;
    cfg.rank_max = 3;
    cfg.trials = 2;
    cfg.base_seed = 1;
    cfg.input_label = "two_band_mixture";
    cfg.output_dir = dir.string();

    const Report written = rank_sweep(two_band_mixture(), cfg);
    const Report read = parse_report(dir.string());
    CHECK(written == read);

    // Summary rows: one per rank, after one header line.
    std::ifstream in(dir / "summary.csv");
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "method,rank,mean_kurtosis,std_kurtosis");
    std::size_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == written.ranks.size());
}

TEST_CASE("re-emitting over an existing directory replaces the artifacts") {
    const auto dir = temp_dir("replace");
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    cfg.rank_min = 2;
    cfg.rank_max = 2;
    cfg.trials = 1;
    cfg.output_dir = dir.string();

    const Signal sig = two_band_mixture();
    const Report first = rank_sweep(sig, cfg);
    const Report second = rank_sweep(sig, cfg);
    CHECK(first == second);
    CHECK(parse_report(dir.string()) == second);
    CHECK_FALSE(std::filesystem::exists(dir / "report.json.tmp"));
}

TEST_CASE("factor dumps annotate rows with frequencies and times") {
    const auto dir = temp_dir("dumps");
    ExperimentConfig cfg;
    cfg.method = Method::nmf;
    cfg.rank_min = 2;
    cfg.rank_max = 2;
    cfg.trials = 1;
    cfg.output_dir = dir.string();
    cfg.dump_factors = true;
    cfg.dump_spectrogram = true;

    rank_sweep(two_band_mixture(), cfg);
    std::ifstream w_in(dir / "w.csv");
    REQUIRE(w_in.good());
    std::string line;
    std::getline(w_in, line);
    CHECK(line == "bin_hz,w0,w1");

    std::ifstream v_in(dir / "v.csv");
    REQUIRE(v_in.good());
    std::getline(v_in, line);
    CHECK(line.rfind("component,", 0) == 0);

    CHECK(std::filesystem::exists(dir / "spectrogram.csv"));
}

TEST_CASE("malformed report files are rejected with format errors") {
    const auto dir = temp_dir("badreport");
    {
        std::ofstream out(dir / "report.json");
        out << "{\"config\": {}}\n";
    }
    CHECK_THROWS_AS(parse_report(dir.string()), FormatError);
    CHECK_THROWS_AS(parse_report((dir / "missing").string()), IoError);
    {
        std::ofstream out(dir / "report.json");
        out << "this is not json\n";
    }
    CHECK_THROWS_AS(parse_report(dir.string()), FormatError);
}

TEST_CASE("full sweep on the default synthetic localizes carrier and fault rate") {
    FaultSignalSpec spec;
    spec.duration_s = 0.6;
    spec.rng_seed = 3;
    const Signal sig = generate_fault_signal(spec);

    ExperimentConfig cfg;
    cfg.method = Method::nmu;
    cfg.rank_min = 2;
    cfg.rank_max = 4;
    cfg.trials = 3;
    cfg.base_seed = 17;

    const Report report = rank_sweep(sig, cfg);

    Eigen::Index argmax = 0;
    report.chosen_filter.weights.maxCoeff(&argmax);
    CHECK(std::abs(report.chosen_filter.bin_freqs_hz[argmax] - spec.carrier_freq_hz) <=
          2000.0);
    CHECK(std::abs(report.chosen.envelope_peak_hz - spec.fault_freq_hz) <=
          report.envelope.resolution_hz);
    CHECK(report.chosen.kurtosis > 3.0);
}
