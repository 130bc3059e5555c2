#pragma once

#include "underband/common.hpp"
#include "underband/signal.hpp"

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace underband {

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void append_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void append_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("unreadable file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw IoError("unreadable file: " + path);
    return bytes;
}

// All file writers go through a temp file + rename so a crash or a concurrent
// reader never observes a half-written artifact.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out.good()) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot replace " + path + ": " + ec.message());
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

}  // namespace detail

inline Signal load_wav(const std::string& path, int channel = 0) {
    require(channel >= 0, "channel index must be non-negative");
    const auto bytes = detail::read_file_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError("unreadable file (not a RIFF/WAVE header): " + path);

    std::uint16_t format_code = 0, num_channels = 0, bits = 0, block_align = 0;
    std::uint32_t sample_rate = 0;
    bool have_fmt = false;
    std::size_t data_off = 0, data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t size = detail::read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size())
            throw FormatError("unreadable file (truncated chunk): " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) throw FormatError("unreadable file (short fmt chunk): " + path);
            format_code = detail::read_u16(bytes.data() + body);
            num_channels = detail::read_u16(bytes.data() + body + 2);
            sample_rate = detail::read_u32(bytes.data() + body + 4);
            block_align = detail::read_u16(bytes.data() + body + 12);
            bits = detail::read_u16(bytes.data() + body + 14);
            if (format_code == 0xFFFE) {
                if (size < 40)
                    throw FormatError("unreadable file (short extensible fmt chunk): " + path);
                format_code = detail::read_u16(bytes.data() + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_off = body;
            data_size = size;
        }
        pos = body + size + (size & 1u);
    }

    if (!have_fmt || data_off == 0)
        throw FormatError("unreadable file (missing fmt or data chunk): " + path);
    if (num_channels == 0 || sample_rate == 0 || block_align == 0)
        throw FormatError("unreadable file (degenerate fmt chunk): " + path);
    const bool pcm_ok = format_code == 1 && (bits == 16 || bits == 24 || bits == 32);
    const bool float_ok = format_code == 3 && (bits == 32 || bits == 64);
    if (!pcm_ok && !float_ok)
        throw FormatError("unsupported encoding (format " + std::to_string(format_code) +
                          ", " + std::to_string(bits) + "-bit): " + path);
    const std::size_t bytes_per_sample = bits / 8u;
    if (block_align != bytes_per_sample * num_channels)
        throw FormatError("unreadable file (block align mismatch): " + path);
    const std::size_t frames = data_size / block_align;
    if (frames == 0) throw FormatError("zero-length audio: " + path);
    require(channel < num_channels, "channel " + std::to_string(channel) + " out of range (" +
                                        std::to_string(num_channels) + " channels)");

    std::vector<double> samples(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const unsigned char* p =
            bytes.data() + data_off + f * block_align + channel * bytes_per_sample;
        double v = 0.0;
        if (format_code == 1) {
            if (bits == 16) {
                auto raw = static_cast<std::int16_t>(detail::read_u16(p));
                v = static_cast<double>(raw) / 32768.0;
            } else if (bits == 24) {
                std::int32_t raw = p[0] | (p[1] << 8) | (p[2] << 16);
                if (raw & 0x800000) raw |= ~0xFFFFFF;
                v = static_cast<double>(raw) / 8388608.0;
            } else {
                auto raw = static_cast<std::int32_t>(detail::read_u32(p));
                v = static_cast<double>(raw) / 2147483648.0;
            }
        } else {
            if (bits == 32) {
                float fv;
                std::uint32_t raw = detail::read_u32(p);
                std::memcpy(&fv, &raw, 4);
                v = fv;
            } else {
                std::uint64_t raw = static_cast<std::uint64_t>(detail::read_u32(p)) |
                                    (static_cast<std::uint64_t>(detail::read_u32(p + 4)) << 32);
                std::memcpy(&v, &raw, 8);
            }
        }
        samples[f] = v;
    }
    Signal out{std::move(samples), static_cast<double>(sample_rate)};
    out.validate();
    return out;
}

inline Signal load_csv(const std::string& path, double sample_rate_hz) {
    require(sample_rate_hz > 0.0, "sample rate must be positive");
    std::ifstream in(path);
    if (!in) throw IoError("unreadable file: " + path);

    std::vector<double> samples;
    std::string line;
    std::size_t line_no = 0;
    bool header_allowed = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string token = detail::trim(line);
        if (token.empty()) continue;
        double v;
        if (detail::parse_double(token, v)) {
            samples.push_back(v);
            header_allowed = false;
        } else if (header_allowed) {
            header_allowed = false;  // single leading header line
        } else {
            throw FormatError("non-numeric value at line " + std::to_string(line_no) + ": " +
                              path);
        }
    }
    if (samples.empty()) throw FormatError("no samples in file: " + path);
    Signal out{std::move(samples), sample_rate_hz};
    out.validate();
    return out;
}

enum class SignalFormat { wav, csv };

inline void save_signal(const Signal& signal, const std::string& path, SignalFormat format) {
    signal.validate();
    if (format == SignalFormat::csv) {
        std::string body;
        body.reserve(signal.samples.size() * 20);
        for (double v : signal.samples) {
            body += format_double(v);
            body += '\n';
        }
        detail::write_file_atomic(path, body);
        return;
    }

    // 32-bit IEEE-float mono WAV with a fact chunk.
    const auto frames = static_cast<std::uint32_t>(signal.samples.size());
    const std::uint32_t data_size = frames * 4;
    std::string out;
    out.reserve(58 + data_size);
    out += "RIFF";
    detail::append_u32(out, 4 + (8 + 18) + (8 + 4) + (8 + data_size));
    out += "WAVE";
    out += "fmt ";
    detail::append_u32(out, 18);
    detail::append_u16(out, 3);  // IEEE float
    detail::append_u16(out, 1);  // mono
    const auto rate = static_cast<std::uint32_t>(std::llround(signal.sample_rate_hz));
    detail::append_u32(out, rate);
    detail::append_u32(out, rate * 4);
    detail::append_u16(out, 4);
    detail::append_u16(out, 32);
    detail::append_u16(out, 0);  // extension size
    out += "fact";
    detail::append_u32(out, 4);
    detail::append_u32(out, frames);
    out += "data";
    detail::append_u32(out, data_size);
    for (double v : signal.samples) {
        const auto fv = static_cast<float>(v);
        std::uint32_t raw;
        std::memcpy(&raw, &fv, 4);
        detail::append_u32(out, raw);
    }
    detail::write_file_atomic(path, out);
}

}  // namespace underband
