#include <catch2/catch_amalgamated.hpp>

#include <underband/io.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

using namespace underband;

namespace {

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "underband_io_test";
    std::filesystem::create_directories(dir);
    return dir;
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    REQUIRE(out.good());
}

// Minimal PCM-16 mono WAV built by hand, little-endian throughout.
std::string pcm16_wav(const std::vector<std::int16_t>& samples, std::uint32_t rate,
                      std::uint16_t channels = 1) {
    std::string out;
    const auto data_size = static_cast<std::uint32_t>(samples.size() * 2);
    out += "RIFF";
    detail::append_u32(out, 4 + (8 + 16) + (8 + data_size));
    out += "WAVE";
    out += "fmt ";
    detail::append_u32(out, 16);
    detail::append_u16(out, 1);  // PCM
    detail::append_u16(out, channels);
    detail::append_u32(out, rate);
    detail::append_u32(out, rate * channels * 2);
    detail::append_u16(out, static_cast<std::uint16_t>(channels * 2));
    detail::append_u16(out, 16);
    out += "data";
    detail::append_u32(out, data_size);
    for (std::int16_t s : samples) detail::append_u16(out, static_cast<std::uint16_t>(s));
    return out;
}

}  // namespace

TEST_CASE("one second of 48 kHz PCM-16 loads as 48000 samples") {
    const auto path = temp_dir() / "one_second.wav";
    std::vector<std::int16_t> raw(48000, 0);
    raw[0] = 32767;
    raw[1] = -32768;
    write_bytes(path, pcm16_wav(raw, 48000));

    const Signal sig = load_wav(path.string());
    CHECK(sig.samples.size() == 48000);
    CHECK(sig.sample_rate_hz == 48000.0);
    CHECK(sig.samples[0] == Catch::Approx(32767.0 / 32768.0).epsilon(1e-12));
    CHECK(sig.samples[1] == -1.0);
}

TEST_CASE("stereo WAV channel selection picks the requested channel") {
    const auto path = temp_dir() / "stereo.wav";
    // Interleaved L/R frames: L = 1000, R = -2000.
    std::vector<std::int16_t> raw = {1000, -2000, 1000, -2000, 1000, -2000};
    write_bytes(path, pcm16_wav(raw, 8000, 2));

    CHECK(load_wav(path.string(), 0).samples[0] == Catch::Approx(1000.0 / 32768.0));
    CHECK(load_wav(path.string(), 1).samples[0] == Catch::Approx(-2000.0 / 32768.0));
    CHECK_THROWS_AS(load_wav(path.string(), 2), InvalidArgumentError);
}

TEST_CASE("truncated WAV header is rejected as unreadable") {
    const auto path = temp_dir() / "truncated.wav";
    write_bytes(path, std::string("RIFF\x10\x00\x00\x00WA", 10));
    try {
        load_wav(path.string());
        FAIL("expected an exception");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("unreadable file") != std::string::npos);
    }
}

TEST_CASE("missing WAV file is reported as unreadable") {
    try {
        load_wav((temp_dir() / "does_not_exist.wav").string());
        FAIL("expected an exception");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("unreadable file") != std::string::npos);
    }
}

TEST_CASE("unsupported WAV encoding is named in the error") {
    const auto path = temp_dir() / "alaw.wav";
    std::string bytes = pcm16_wav({0, 0, 0, 0}, 8000);
    bytes[20] = 6;  // format code 6 = A-law
    write_bytes(path, bytes);
    try {
        load_wav(path.string());
        FAIL("expected an exception");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("unsupported encoding") != std::string::npos);
    }
}

TEST_CASE("zero-length WAV audio is rejected") {
    const auto path = temp_dir() / "empty.wav";
    write_bytes(path, pcm16_wav({}, 8000));
    try {
        load_wav(path.string());
        FAIL("expected an exception");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("zero-length audio") != std::string::npos);
    }
}

TEST_CASE("CSV with three plain numbers loads three samples") {
    const auto path = temp_dir() / "three.csv";
    write_bytes(path, "1.0\n-2.5\n0.0\n");
    const Signal sig = load_csv(path.string(), 50000.0);
    REQUIRE(sig.samples.size() == 3);
    CHECK(sig.samples[0] == 1.0);
    CHECK(sig.samples[1] == -2.5);
    CHECK(sig.samples[2] == 0.0);
    CHECK(sig.sample_rate_hz == 50000.0);
}

TEST_CASE("CSV header line is skipped") {
    const auto path = temp_dir() / "header.csv";
    write_bytes(path, "amp\n0.25\n0.5\n");
    const Signal sig = load_csv(path.string(), 1000.0);
    REQUIRE(sig.samples.size() == 2);
    CHECK(sig.samples[0] == 0.25);
}

TEST_CASE("CSV parse error reports the offending line number") {
    const auto path = temp_dir() / "bad.csv";
    write_bytes(path, "1.0\nabc\n");
    try {
        load_csv(path.string(), 1000.0);
        FAIL("expected an exception");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("CSV with no numeric content is rejected") {
    const auto path = temp_dir() / "empty.csv";
    write_bytes(path, "header_only\n");
    CHECK_THROWS_AS(load_csv(path.string(), 1000.0), FormatError);
}

TEST_CASE("CSV save and load round-trips samples exactly") {
    std::mt19937_64 rng(99);
    std::vector<double> samples(257);
    for (double& v : samples) v = 2.0 * uniform01(rng()) - 1.0;
    const Signal sig{samples, 12345.0};

    const auto path = temp_dir() / "roundtrip.csv";
    save_signal(sig, path.string(), SignalFormat::csv);
    const Signal back = load_csv(path.string(), sig.sample_rate_hz);
    REQUIRE(back.samples.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) CHECK(back.samples[i] == samples[i]);
}

TEST_CASE("float WAV save and load agrees to single precision") {
    std::mt19937_64 rng(7);
    std::vector<double> samples(1000);
    double max_abs = 0.0;
    for (double& v : samples) {
        v = 2.0 * uniform01(rng()) - 1.0;
        max_abs = std::max(max_abs, std::abs(v));
    }
    const Signal sig{samples, 48000.0};

    const auto path = temp_dir() / "roundtrip.wav";
    save_signal(sig, path.string(), SignalFormat::wav);
    const Signal back = load_wav(path.string());
    REQUIRE(back.samples.size() == samples.size());
    CHECK(back.sample_rate_hz == 48000.0);
    const double tol = std::ldexp(max_abs, -23);
    for (std::size_t i = 0; i < samples.size(); ++i)
        CHECK(std::abs(back.samples[i] - samples[i]) <= tol);
}

TEST_CASE("unwritable path raises an I/O error") {
    const Signal sig{{1.0, 2.0}, 1000.0};
    CHECK_THROWS_AS(save_signal(sig, "/nonexistent_dir_for_sure/out.csv", SignalFormat::csv),
                    IoError);
}

TEST_CASE("atomic writes leave no temp file behind") {
    const auto path = temp_dir() / "atomic.csv";
    save_signal(Signal{{1.0, 2.0, 3.0}, 100.0}, path.string(), SignalFormat::csv);
    CHECK(std::filesystem::exists(path));
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}
