#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "bioseq/signal/audio.hpp"

namespace bioseq::signal {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("wav " + path.string() + ": " + what);
}

}  // namespace

void validate(const Waveform& w) {
    if (w.sample_rate_hz <= 0) throw std::invalid_argument("waveform sample rate must be positive");
    if (w.samples.empty()) throw std::invalid_argument("waveform is empty");
    for (float s : w.samples)
        if (!std::isfinite(s)) throw std::invalid_argument("waveform has non-finite samples");
}

Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();
    if (n < 12 || std::memcmp(b, "RIFF", 4) != 0 || std::memcmp(b + 8, "WAVE", 4) != 0) fail(path, "not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= n) {
        const unsigned char* chunk = b + pos;
        const std::uint32_t size = le32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = n - body;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || avail < 16) fail(path, "truncated fmt chunk");
            format = le16(chunk + 8);
            channels = le16(chunk + 10);
            rate = le32(chunk + 12);
            bits = le16(chunk + 22);
            if (format == kFormatExtensible) {
                if (size < 40 || avail < 40) fail(path, "truncated extensible fmt chunk");
                format = le16(chunk + 8 + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_size = std::min<std::size_t>(size, avail);
            break;
        }
        pos = body + size + (size & 1u);
    }
    if (!have_fmt) fail(path, "missing fmt chunk");
    if (data == nullptr) fail(path, "missing data chunk");
    if (channels == 0 || rate == 0) fail(path, "invalid channel count or rate");

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32)
        fail(path, "unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) + " bits)");

    const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
    const std::size_t frames = data_size / frame_bytes;
    if (frames == 0) fail(path, "zero-length audio");

    Waveform w;
    w.sample_rate_hz = static_cast<int>(rate);
    w.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const unsigned char* p = data + i * frame_bytes;
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            if (pcm16) {
                acc += static_cast<std::int16_t>(le16(p + 2 * c)) / 32768.0;
            } else {
                std::uint32_t u = le32(p + 4 * c);
                float f;
                std::memcpy(&f, &u, sizeof f);
                if (!std::isfinite(f)) fail(path, "non-finite sample");
                acc += f;
            }
        }
        w.samples[i] = static_cast<float>(acc / channels);
    }
    return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
    validate(w);
    std::string out;
    auto put16 = [&](std::uint16_t v) {
        out.push_back(static_cast<char>(v & 0xff));
        out.push_back(static_cast<char>(v >> 8));
    };
    auto put32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    const auto data_bytes = static_cast<std::uint32_t>(2 * w.size());
    const auto rate = static_cast<std::uint32_t>(w.sample_rate_hz);
    out += "RIFF";
    put32(36 + data_bytes);
    out += "WAVEfmt ";
    put32(16);
    put16(kFormatPcm);
    put16(1);
    put32(rate);
    put32(rate * 2);
    put16(2);
    put16(16);
    out += "data";
    put32(data_bytes);
    for (float x : w.samples) {
        const double c = std::clamp(static_cast<double>(x), -1.0, 1.0);
        put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(path, "cannot open for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) fail(path, "write failed");
}

Waveform load_audio(const std::filesystem::path& path, int target_rate_hz) {
    if (target_rate_hz <= 0) throw std::invalid_argument("target rate must be positive");
    return resample(read_wav(path), target_rate_hz);
}

}  // namespace bioseq::signal
