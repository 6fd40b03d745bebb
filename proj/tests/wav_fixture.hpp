#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

// Writes RIFF/WAVE files byte by byte so reader tests do not share code with
// the writer under test.
namespace fixture {

enum class Encoding { pcm16, float32, pcm16_extensible, pcm24 };

inline void put16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
}
inline void put32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// interleaved: frames * channels samples
inline void write_wav(const std::filesystem::path& path, const std::vector<float>& interleaved, int channels, int rate,
                      Encoding enc) {
    const std::uint16_t bits = enc == Encoding::float32 ? 32 : enc == Encoding::pcm24 ? 24 : 16;
    std::string data;
    for (float x : interleaved) {
        if (enc == Encoding::float32) {
            std::uint32_t u;
            std::memcpy(&u, &x, 4);
            put32(data, u);
        } else {
            const double c = std::max(-1.0, std::min(1.0, static_cast<double>(x)));
            if (enc == Encoding::pcm24) {
                const auto v = static_cast<std::int32_t>(std::lround(c * 8388607.0));
                for (int i = 0; i < 3; ++i) data.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
            } else {
                put16(data, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
            }
        }
    }
    std::string fmt;
    const std::uint16_t tag = enc == Encoding::float32 ? 3 : enc == Encoding::pcm16_extensible ? 0xFFFE : 1;
    put16(fmt, tag);
    put16(fmt, static_cast<std::uint16_t>(channels));
    put32(fmt, static_cast<std::uint32_t>(rate));
    put32(fmt, static_cast<std::uint32_t>(rate * channels * bits / 8));
    put16(fmt, static_cast<std::uint16_t>(channels * bits / 8));
    put16(fmt, bits);
    if (enc == Encoding::pcm16_extensible) {
        put16(fmt, 22);
        put16(fmt, bits);
        put32(fmt, 0);
        put16(fmt, 1);  // subformat GUID starts with the PCM tag
        fmt += std::string("\x00\x00\x00\x00\x10\x00\x80\x00\x00\xAA\x00\x38\x9B\x71", 14);
    }
    std::string file = "RIFF";
    put32(file, static_cast<std::uint32_t>(4 + 8 + fmt.size() + 8 + 6 + 8 + data.size()));
    file += "WAVE";
    file += "fmt ";
    put32(file, static_cast<std::uint32_t>(fmt.size()));
    file += fmt;
    file += "LIST";  // unrelated chunk the reader must skip
    put32(file, 6);
    file += std::string("abcdef", 6);
    file += "data";
    put32(file, static_cast<std::uint32_t>(data.size()));
    file += data;
    std::ofstream(path, std::ios::binary).write(file.data(), static_cast<std::streamsize>(file.size()));
}

inline std::vector<float> sine(double freq, int rate, std::size_t n, double amp = 0.5) {
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = static_cast<float>(amp * std::sin(2.0 * 3.14159265358979323846 * freq * static_cast<double>(i) / rate));
    return v;
}

inline std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("bioseq_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixture
