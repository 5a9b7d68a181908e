#include "fxprof/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

namespace fxprof {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

double rms(const std::vector<float>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " in '" + path.string() + "'";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError("missing RIFF/WAVE header" + where);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || len > avail) throw WavError("truncated fmt chunk" + where);
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (len < 40) throw WavError("truncated WAVE_FORMAT_EXTENSIBLE header" + where);
        format = le16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<std::size_t>(len, avail);
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw WavError("no fmt chunk" + where);
  if (!data) throw WavError("no data chunk" + where);
  if (channels != 1 && channels != 2) {
    throw WavError("unsupported channel count " + std::to_string(channels) + where);
  }
  if (rate == 0) throw WavError("zero sample rate" + where);
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw WavError("unsupported codec (format " + std::to_string(format) + ", " +
                   std::to_string(bits) + " bits); only PCM16 and float32 are read" + where);
  }

  const std::size_t sample_bytes = bits / 8;
  const std::size_t frame_bytes = sample_bytes * channels;
  const std::size_t frames = data_len / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * sample_bytes;
      if (pcm16) {
        acc += static_cast<double>(static_cast<std::int16_t>(le16(p))) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(le32(p)));
      }
    }
    clip.samples[i] = static_cast<float>(acc / channels);
  }
  return clip;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path, WavFormat format) {
  const bool pcm16 = format == WavFormat::Pcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put32(out, 36 + data_len);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, pcm16 ? kFormatPcm : kFormatFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  out += "data";
  put32(out, data_len);
  for (float v : clip.samples) {
    if (pcm16) {
      const double c = std::clamp(static_cast<double>(v), -1.0, 1.0);
      const long q = std::clamp(std::lround(c * 32768.0), -32768L, 32767L);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WavError("cannot open '" + path.string() + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw WavError("failed writing '" + path.string() + "'");
}

}  // namespace fxprof
