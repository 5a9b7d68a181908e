#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace fxprof {

/// Mono waveform tagged with its sample rate. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 44100;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WavFormat { Pcm16, Float32 };

/// Reads RIFF/WAVE PCM16 or IEEE float32, mono or stereo. Stereo is averaged
/// to mono; PCM16 is scaled by 1/32768.
AudioClip load_wav(const std::filesystem::path& path);

/// Writes a mono file. PCM16 clamps to [-1, 1] before quantizing; float32
/// stores samples as they are.
void save_wav(const AudioClip& clip, const std::filesystem::path& path,
              WavFormat format = WavFormat::Pcm16);

/// Windowed-sinc resampler; output length is round(len * target_sr / sr).
AudioClip resample(const AudioClip& clip, int target_sr);

double rms(const std::vector<float>& x);

}  // namespace fxprof
