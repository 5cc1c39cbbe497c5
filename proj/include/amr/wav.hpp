#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace amr {

struct WavInfo {
    int sample_rate = 0;
    int channels = 0;
    int bits_per_sample = 0;
    bool is_float = false;
    std::size_t frames = 0;
};

WavInfo read_wav_info(const std::filesystem::path &path);

// Reads `count` frames starting at `offset`, averaging channels to mono.
// Integer PCM is scaled to [-1, 1).
std::vector<float> read_wav(const std::filesystem::path &path, std::size_t offset = 0,
                            std::size_t count = static_cast<std::size_t>(-1));

// Mono IEEE float32 WAV.
void write_wav(const std::filesystem::path &path, std::span<const float> samples,
               int sample_rate);

} // namespace amr
