#include "underband/underband.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <string>

namespace {

underband::FaultSignalSpec parse_fault_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw underband::InvalidArgumentError("cannot open synthetic spec: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw underband::InvalidArgumentError("cannot parse " + path + ": " + e.what());
    }

    underband::FaultSignalSpec spec;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "duration_s") spec.duration_s = value.get<double>();
            else if (key == "sample_rate_hz") spec.sample_rate_hz = value.get<double>();
            else if (key == "fault_freq_hz") spec.fault_freq_hz = value.get<double>();
            else if (key == "carrier_freq_hz") spec.carrier_freq_hz = value.get<double>();
            else if (key == "decay_rate") spec.decay_rate = value.get<double>();
            else if (key == "impulse_amplitude") spec.impulse_amplitude = value.get<double>();
            else if (key == "noise_std") spec.noise_std = value.get<double>();
            else if (key == "noise_color_pole") spec.noise_color_pole = value.get<double>();
            else if (key == "rng_seed") spec.rng_seed = value.get<std::int64_t>();
            else
                throw underband::InvalidArgumentError("unknown key \"" + key + "\" in " +
                                                      path);
        } catch (const nlohmann::json::exception& e) {
            throw underband::InvalidArgumentError("bad value for \"" + key + "\" in " + path +
                                                  ": " + e.what());
        }
    }
    spec.validate();
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"underband: informative-frequency-band detection for machinery signals"};
    app.require_subcommand(1);

    auto* detect = app.add_subcommand("detect", "run the band-detection experiment");
    std::string input_path, synthetic_path, method_name, out_dir;
    int rank_min = 2, rank_max = 15, trials = 100;
    std::int64_t seed = 0;
    underband::StftParams stft_params;
    int channel = 0;
    double csv_sample_rate = 0.0;
    bool dump_factors = false, dump_spectrogram = false;

    auto* input_opt = detect->add_option("--input", input_path, "input WAV or CSV signal");
    auto* synth_opt = detect->add_option("--synthetic", synthetic_path,
                                         "JSON spec for the synthetic fault signal");
    input_opt->excludes(synth_opt);
    detect->add_option("--method", method_name, "nmu | nmf | sk")
        ->required()
        ->check(CLI::IsMember({"nmu", "nmf", "sk"}));
    detect->add_option("--rank-min", rank_min, "lowest factorization rank");
    detect->add_option("--rank-max", rank_max, "highest factorization rank");
    detect->add_option("--trials", trials, "random restarts per rank");
    detect->add_option("--seed", seed, "base seed for the trial schedule");
    detect->add_option("--window", stft_params.window_len, "STFT window length");
    detect->add_option("--overlap", stft_params.overlap, "STFT window overlap");
    detect->add_option("--nfft", stft_params.n_dft, "DFT length");
    detect->add_option("--out", out_dir, "output directory")->required();
    detect->add_option("--channel", channel, "channel index for multi-channel WAV input");
    detect->add_option("--sample-rate", csv_sample_rate,
                       "sample rate in Hz (required for CSV input)");
    detect->add_flag("--dump-factors", dump_factors,
                     "also write the representative trial's W and V matrices");
    detect->add_flag("--dump-spectrogram", dump_spectrogram,
                     "also write the spectrogram magnitude matrix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    underband::Signal signal;
    underband::ExperimentConfig cfg;
    try {
        if (input_path.empty() && synthetic_path.empty())
            throw underband::InvalidArgumentError("one of --input or --synthetic is required");

        cfg.method = underband::parse_method(method_name);
        cfg.rank_min = rank_min;
        cfg.rank_max = rank_max;
        cfg.trials = trials;
        cfg.stft = stft_params;
        cfg.base_seed = seed;
        cfg.output_dir = out_dir;
        cfg.dump_factors = dump_factors;
        cfg.dump_spectrogram = dump_spectrogram;
        underband::require(trials >= 1, "--trials must be positive");
        cfg.stft.validate();

        if (!synthetic_path.empty()) {
            const auto spec = parse_fault_spec(synthetic_path);
            signal = underband::generate_fault_signal(spec);
            cfg.input_label = "synthetic:" + synthetic_path;
        } else if (input_path.size() >= 4 &&
                   input_path.compare(input_path.size() - 4, 4, ".csv") == 0) {
            underband::require(csv_sample_rate > 0.0,
                               "--sample-rate is required for CSV input");
            signal = underband::load_csv(input_path, csv_sample_rate);
            cfg.input_label = input_path;
        } else {
            signal = underband::load_wav(input_path, channel);
            cfg.input_label = input_path;
        }
    } catch (const underband::InvalidArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        const underband::Report report = underband::rank_sweep(signal, cfg);
        std::cout << "method " << report.method << ": chosen rank " << report.chosen.rank
                  << ", trial " << report.chosen.trial << ", column "
                  << report.chosen.column << "\n"
                  << "filtered-signal kurtosis "
                  << underband::format_double(report.chosen.kurtosis) << "\n"
                  << "envelope peak "
                  << underband::format_double(report.chosen.envelope_peak_hz) << " Hz\n"
                  << "report written to " << cfg.output_dir << "/report.json\n";
    } catch (const underband::InvalidArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
