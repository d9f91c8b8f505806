#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ser {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split parse_split(const std::string& token);  // errors: UnknownSplit

struct ManifestEntry {
  std::string path;
  std::string label;
  std::optional<Split> split;
  // Set on entries synthesized by augment::expand; encoded as
  // "kind:param:seed" in feature origins.
  std::string augment_tag;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  size_t size() const { return entries.size(); }
  bool has_splits() const;
};

// Emotion name -> class id. Names are sorted ascending so ids follow
// alphabetical order regardless of manifest row order.
struct LabelMap {
  std::vector<std::string> names;

  static LabelMap from_manifest(const Manifest& m);
  static LabelMap from_names(std::vector<std::string> names);  // dedups + sorts
  int id_of(const std::string& name) const;                    // errors: UnknownLabel
  int size() const { return static_cast<int>(names.size()); }
};

struct SplitPlan {
  std::vector<int> train_idx;
  std::vector<int> val_idx;
  std::vector<int> test_idx;
  uint64_t seed = 0;
};

// Parses a manifest CSV (header path,label[,split]). Relative paths are
// resolved against the manifest's directory.
// Errors: MissingFile, MalformedCsv, DuplicatePath, UnknownSplit,
// MixedSplit, EmptyManifest.
Manifest load_manifest(const std::string& path);

void save_manifest(const Manifest& m, const std::string& path);

enum class Convention { Tess, Ravdess, Savee, EmoDb, CremaD };

Convention parse_convention(const std::string& name);
std::string convention_name(Convention c);

struct ScanResult {
  Manifest manifest;
  std::vector<std::string> skipped;  // files whose name did not decode
};

// Walks root recursively for .wav files and decodes the emotion label from
// each filename following the corpus convention. Undecodable names are
// skipped and reported.
ScanResult scan_dataset(const std::string& root, Convention convention);

// Decodes one filename; empty result means unparseable.
std::string decode_label(const std::string& filename, Convention convention);

// Stratified 80:20 split, then 20% of the remainder as validation, both via
// per-class largest-remainder allocation under a seeded shuffle.
// Errors: TooFewSamples (N < 5), TooFewPerClass (any class < 3).
SplitPlan make_split(const Manifest& manifest, uint64_t seed);

}  // namespace ser
