#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "fxprof/audio.hpp"

namespace fxprof::data {

/// Synthetic stand-ins for real recordings. Tones are one plucked note at a
/// time (a solo instrument); mixes layer chords, bass, drums and noise.
enum class CorpusKind { Tones, Mix };

std::optional<CorpusKind> parse_corpus_kind(std::string_view name);

inline constexpr double kCorpusRms = 0.15;

AudioClip synth_tones(std::uint64_t seed, double seconds, int sample_rate);
AudioClip synth_mix(std::uint64_t seed, double seconds, int sample_rate);

/// Writes n_files PCM16 files named clip_000.wav, ... into dir.
void write_synthetic_corpus(const std::filesystem::path& dir, CorpusKind kind, std::size_t n_files,
                            double seconds, int sample_rate, std::uint64_t seed);

}  // namespace fxprof::data
