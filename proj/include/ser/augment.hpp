#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ser/audio.hpp"
#include "ser/dataset.hpp"

namespace ser {

enum class AugmentKind { Awgn, Stretch, Pitch };

std::string augment_kind_name(AugmentKind k);
AugmentKind parse_augment_kind(const std::string& name);

// One augmentation recipe: awgn rate, stretch factor, or pitch steps in
// semitones, plus the seed that makes it reproducible.
struct AugmentSpec {
  AugmentKind kind = AugmentKind::Awgn;
  double param = 0.0;
  uint64_t seed = 0;

  void validate() const;  // errors: BadArgs on out-of-range params
  std::string tag() const;  // "kind:param:seed", used in feature origins
};

// y = x + rate * u * max|x| * g with one uniform draw u per clip and i.i.d.
// standard normal g per sample, both from seed; output clamped to [-1, 1].
AudioClip add_awgn(const AudioClip& clip, double rate, uint64_t seed);

// Hann-windowed overlap-add time-scale modification; output length
// round(len / factor), sample rate and pitch unchanged.
AudioClip time_stretch(const AudioClip& clip, double factor);

// Shifts all frequencies by 2^(steps/12) while keeping the clip length:
// stretch to len * r, resample back down to the original length.
AudioClip pitch_shift(const AudioClip& clip, double steps);

// Applies one spec to a clip, mixing the spec seed with the clip's source
// path so every clip draws distinct noise yet stays reproducible.
AudioClip apply_augment(const AudioClip& clip, const AugmentSpec& spec);

enum class AugmentScope { TrainOnly, All };

// Appends one synthesized entry per (eligible entry, spec). Eligible means
// split == train under TrainOnly; manifests without split tags treat every
// entry as eligible. Synthesized entries inherit the source's split.
// Errors: EmptySpecs.
Manifest expand(const Manifest& manifest, const std::vector<AugmentSpec>& specs,
                AugmentScope scope = AugmentScope::TrainOnly);

}  // namespace ser
