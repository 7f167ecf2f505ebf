// SPDX-License-Identifier: Apache-2.0
#include "mcse/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "mcse/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

namespace mcse {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  out.write(reinterpret_cast<const char*>(&v), 2);
}

std::int16_t to_pcm16(Real x) {
  const long v = std::lround(std::clamp(x, -1.0, 1.0) * 32768.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L));
}

struct ChunkHeader {
  char id[4];
  std::uint32_t size;
};

bool read_chunk_header(std::ifstream& in, ChunkHeader* hdr) {
  in.read(hdr->id, 4);
  if (in.gcount() != 4) return false;
  in.read(reinterpret_cast<char*>(&hdr->size), 4);
  return in.gcount() == 4;
}

}  // namespace

void write_wav(const std::string& path, const MultichannelWaveform& wave,
               WavFormat format) {
  if (wave.num_channels() <= 0 || wave.num_samples() <= 0)
    throw InvalidInputError("write_wav: empty waveform: " + path);
  if (!wave.samples.isFinite().all())
    throw InvalidInputError("write_wav: non-finite samples: " + path);

  const std::uint16_t channels =
      static_cast<std::uint16_t>(wave.num_channels());
  const std::uint32_t rate = static_cast<std::uint32_t>(wave.sample_rate_hz);
  const bool is_float = format == WavFormat::kFloat32;
  const std::uint16_t bytes_per_sample = is_float ? 4 : 2;
  const std::uint16_t block_align = channels * bytes_per_sample;
  const std::uint32_t num_frames =
      static_cast<std::uint32_t>(wave.num_samples());
  const std::uint32_t data_bytes = num_frames * block_align;
  const std::uint32_t fact_bytes = is_float ? 12 : 0;
  const std::uint32_t riff_size = 4 + 24 + fact_bytes + 8 + data_bytes;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_wav: cannot open " + path);

  out.write("RIFF", 4);
  put_u32(out, riff_size);
  out.write("WAVE", 4);

  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, is_float ? kFormatFloat : kFormatPcm);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * block_align);
  put_u16(out, block_align);
  put_u16(out, static_cast<std::uint16_t>(8 * bytes_per_sample));

  if (is_float) {
    out.write("fact", 4);
    put_u32(out, 4);
    put_u32(out, num_frames);
  }

  out.write("data", 4);
  put_u32(out, data_bytes);

  std::vector<char> buf(static_cast<size_t>(data_bytes));
  char* p = buf.data();
  for (Index i = 0; i < wave.num_samples(); ++i) {
    for (Index m = 0; m < wave.num_channels(); ++m) {
      if (is_float) {
        const float v = static_cast<float>(wave.samples(m, i));
        std::memcpy(p, &v, 4);
        p += 4;
      } else {
        const std::int16_t v = to_pcm16(wave.samples(m, i));
        std::memcpy(p, &v, 2);
        p += 2;
      }
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write_wav: write failed: " + path);
}

void write_wav(const std::string& path, const Waveform& wave,
               WavFormat format) {
  MultichannelWaveform mc;
  mc.sample_rate_hz = wave.sample_rate_hz;
  mc.samples.resize(1, wave.num_samples());
  mc.samples.row(0) = wave.samples.transpose();
  write_wav(path, mc, format);
}

MultichannelWaveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_wav: cannot open " + path);

  char riff[4], wave_id[4];
  std::uint32_t riff_size = 0;
  in.read(riff, 4);
  in.read(reinterpret_cast<char*>(&riff_size), 4);
  in.read(wave_id, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 ||
      std::memcmp(wave_id, "WAVE", 4) != 0)
    throw IoError("read_wav: not a RIFF/WAVE file: " + path);

  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> data;

  ChunkHeader hdr{};
  while (read_chunk_header(in, &hdr)) {
    const std::uint32_t padded = hdr.size + (hdr.size & 1u);
    if (std::memcmp(hdr.id, "fmt ", 4) == 0) {
      std::vector<char> fmt(padded);
      in.read(fmt.data(), padded);
      if (hdr.size < 16) throw IoError("read_wav: short fmt chunk: " + path);
      std::memcpy(&format_tag, fmt.data() + 0, 2);
      std::memcpy(&channels, fmt.data() + 2, 2);
      std::memcpy(&rate, fmt.data() + 4, 4);
      std::memcpy(&bits, fmt.data() + 14, 2);
      have_fmt = true;
    } else if (std::memcmp(hdr.id, "data", 4) == 0) {
      data.resize(hdr.size);
      in.read(data.data(), hdr.size);
      if (in.gcount() != static_cast<std::streamsize>(hdr.size))
        throw IoError("read_wav: truncated data chunk: " + path);
      if (hdr.size & 1u) in.seekg(1, std::ios::cur);
    } else {
      in.seekg(padded, std::ios::cur);
    }
  }

  if (!have_fmt || data.empty())
    throw IoError("read_wav: missing fmt or data chunk: " + path);
  if (channels == 0) throw IoError("read_wav: zero channels: " + path);

  const bool is_float = format_tag == kFormatFloat && bits == 32;
  const bool is_pcm16 = format_tag == kFormatPcm && bits == 16;
  if (!is_float && !is_pcm16)
    throw IoError("read_wav: unsupported format (tag " +
                  std::to_string(format_tag) + ", " + std::to_string(bits) +
                  " bits): " + path);

  const size_t bytes_per_sample = is_float ? 4 : 2;
  const size_t frame_bytes = bytes_per_sample * channels;
  const size_t num_frames = data.size() / frame_bytes;
  if (num_frames == 0) throw IoError("read_wav: empty data chunk: " + path);

  MultichannelWaveform out;
  out.sample_rate_hz = static_cast<int>(rate);
  out.samples.resize(channels, static_cast<Index>(num_frames));
  const char* p = data.data();
  for (size_t i = 0; i < num_frames; ++i) {
    for (std::uint16_t m = 0; m < channels; ++m) {
      if (is_float) {
        float v;
        std::memcpy(&v, p, 4);
        p += 4;
        out.samples(m, static_cast<Index>(i)) = static_cast<Real>(v);
      } else {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        p += 2;
        out.samples(m, static_cast<Index>(i)) = v / 32768.0;
      }
    }
  }
  return out;
}

Waveform read_wav_mono(const std::string& path) {
  const MultichannelWaveform mc = read_wav(path);
  if (mc.num_channels() != 1)
    throw IoError("read_wav_mono: expected 1 channel, got " +
                  std::to_string(mc.num_channels()) + ": " + path);
  return mc.channel(0);
}

}  // namespace mcse
