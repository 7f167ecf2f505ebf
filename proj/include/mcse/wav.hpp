// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mcse/stft.hpp"

namespace mcse {

enum class WavFormat { kPcm16, kFloat32 };

// Writes a RIFF/WAVE file. kFloat32 (IEEE float, format tag 3) round-trips
// bit-exactly; kPcm16 clamps to [-1, 1] and quantizes to 16 bits.
void write_wav(const std::string& path, const MultichannelWaveform& wave,
               WavFormat format = WavFormat::kFloat32);
void write_wav(const std::string& path, const Waveform& wave,
               WavFormat format = WavFormat::kFloat32);

// Reads PCM16 or float32 WAV of any channel count.
MultichannelWaveform read_wav(const std::string& path);

// Single-channel convenience; fails on multichannel files.
Waveform read_wav_mono(const std::string& path);

}  // namespace mcse
