#include "ser/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ser/error.hpp"
#include "ser/rng.hpp"

namespace fs = std::filesystem;

namespace ser {

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& token) {
  if (token == "train") return Split::Train;
  if (token == "val") return Split::Val;
  if (token == "test") return Split::Test;
  fail("UnknownSplit", "'" + token + "' is not one of train|val|test");
}

bool Manifest::has_splits() const {
  return !entries.empty() && entries.front().split.has_value();
}

LabelMap LabelMap::from_manifest(const Manifest& m) {
  std::vector<std::string> names;
  names.reserve(m.entries.size());
  for (const auto& e : m.entries) names.push_back(e.label);
  return from_names(std::move(names));
}

LabelMap LabelMap::from_names(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return LabelMap{std::move(names)};
}

int LabelMap::id_of(const std::string& name) const {
  const auto it = std::lower_bound(names.begin(), names.end(), name);
  if (it == names.end() || *it != name) fail("UnknownLabel", "'" + name + "'");
  return static_cast<int>(it - names.begin());
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingFile", "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail("EmptyManifest", path + ": empty file");
  line = strip_cr(line);

  const auto header = split_fields(line, ',');
  const bool with_split = header.size() == 3 && header[2] == "split";
  if (!(header.size() == 2 || with_split) || header[0] != "path" || header[1] != "label") {
    fail("MalformedCsv", path + ": expected header path,label[,split]");
  }

  const fs::path base = fs::path(path).parent_path();
  Manifest m;
  std::set<std::string> seen;
  bool any_split = false, any_missing = false;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line, ',');
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      fail("MalformedCsv", path + ": bad row '" + line + "'");
    }
    ManifestEntry e;
    fs::path p(fields[0]);
    e.path = (p.is_absolute() ? p : base / p).lexically_normal().string();
    e.label = fields[1];
    if (fields.size() == 3 && !fields[2].empty()) {
      e.split = parse_split(fields[2]);
      any_split = true;
    } else {
      any_missing = true;
    }
    if (!seen.insert(e.path).second) fail("DuplicatePath", e.path);
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) fail("EmptyManifest", path + ": no rows");
  if (any_split && any_missing) {
    fail("MixedSplit", path + ": either every row carries a split tag or none does");
  }
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("UnwritablePath", "cannot write " + path);
  const bool with_split = m.has_splits();
  out << (with_split ? "path,label,split" : "path,label") << "\n";
  for (const auto& e : m.entries) {
    out << e.path << ',' << e.label;
    if (with_split) out << ',' << split_name(*e.split);
    out << "\n";
  }
}

Convention parse_convention(const std::string& name) {
  if (name == "tess") return Convention::Tess;
  if (name == "ravdess") return Convention::Ravdess;
  if (name == "savee") return Convention::Savee;
  if (name == "emodb") return Convention::EmoDb;
  if (name == "cremad") return Convention::CremaD;
  fail("BadArgs", "unknown convention '" + name + "'");
}

std::string convention_name(Convention c) {
  switch (c) {
    case Convention::Tess: return "tess";
    case Convention::Ravdess: return "ravdess";
    case Convention::Savee: return "savee";
    case Convention::EmoDb: return "emodb";
    case Convention::CremaD: return "cremad";
  }
  return "?";
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string stem_of(const std::string& filename) {
  return fs::path(filename).stem().string();
}

std::string decode_ravdess(const std::string& stem) {
  const auto f = split_fields(stem, '-');
  if (f.size() < 3) return {};
  static const std::map<std::string, std::string> codes = {
      {"01", "neutral"}, {"02", "calm"},    {"03", "happy"},   {"04", "sad"},
      {"05", "angry"},   {"06", "fearful"}, {"07", "disgust"}, {"08", "surprised"}};
  const auto it = codes.find(f[2]);
  return it == codes.end() ? std::string{} : it->second;
}

std::string decode_savee(const std::string& stem) {
  // speakers may prefix the code, e.g. DC_a01
  std::string tail = stem;
  if (const auto p = tail.rfind('_'); p != std::string::npos) tail = tail.substr(p + 1);
  std::string prefix;
  for (char c : tail) {
    if (!std::isalpha(static_cast<unsigned char>(c))) break;
    prefix += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  static const std::map<std::string, std::string> codes = {
      {"a", "angry"},   {"d", "disgust"}, {"f", "fear"},     {"h", "happy"},
      {"n", "neutral"}, {"sa", "sad"},    {"su", "surprise"}};
  const auto it = codes.find(prefix);
  return it == codes.end() ? std::string{} : it->second;
}

std::string decode_emodb(const std::string& stem) {
  if (stem.size() < 6) return {};
  switch (stem[5]) {
    case 'W': return "anger";
    case 'L': return "boredom";
    case 'E': return "disgust";
    case 'A': return "fear";
    case 'F': return "happiness";
    case 'T': return "sadness";
    case 'N': return "neutral";
    default: return {};
  }
}

std::string decode_cremad(const std::string& stem) {
  const auto f = split_fields(stem, '_');
  if (f.size() < 3) return {};
  static const std::map<std::string, std::string> codes = {
      {"ANG", "angry"}, {"DIS", "disgust"}, {"FEA", "fear"},
      {"HAP", "happy"}, {"NEU", "neutral"}, {"SAD", "sad"}};
  const auto it = codes.find(f[2]);
  return it == codes.end() ? std::string{} : it->second;
}

std::string decode_tess(const std::string& stem) {
  std::string tail = stem;
  if (const auto p = tail.rfind('_'); p != std::string::npos) tail = tail.substr(p + 1);
  if (tail.empty()) return {};
  for (char c : tail) {
    if (!std::isalpha(static_cast<unsigned char>(c))) return {};
  }
  return lower(tail);
}

}  // namespace

std::string decode_label(const std::string& filename, Convention convention) {
  const std::string stem = stem_of(filename);
  switch (convention) {
    case Convention::Ravdess: return decode_ravdess(stem);
    case Convention::Savee: return decode_savee(stem);
    case Convention::EmoDb: return decode_emodb(stem);
    case Convention::CremaD: return decode_cremad(stem);
    case Convention::Tess: return decode_tess(stem);
  }
  return {};
}

ScanResult scan_dataset(const std::string& root, Convention convention) {
  if (!fs::is_directory(root)) fail("MissingFile", root + " is not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (lower(entry.path().extension().string()) != ".wav") continue;
    paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());  // iteration order is filesystem-dependent

  ScanResult result;
  for (const auto& p : paths) {
    const std::string label = decode_label(fs::path(p).filename().string(), convention);
    if (label.empty()) {
      result.skipped.push_back(p);
      continue;
    }
    result.manifest.entries.push_back(ManifestEntry{p, label, std::nullopt, {}});
  }
  return result;
}

namespace {

// Largest-remainder allocation: per-class integer counts with total exactly
// `total`, each within 1 of its real-valued quota.
std::vector<int> allocate(const std::vector<double>& quotas, int total) {
  const int k = static_cast<int>(quotas.size());
  std::vector<int> alloc(k);
  std::vector<std::pair<double, int>> remainders(k);
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    alloc[i] = static_cast<int>(std::floor(quotas[i]));
    remainders[i] = {quotas[i] - alloc[i], i};
    assigned += alloc[i];
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < total - assigned; ++r) alloc[remainders[r % k].second] += 1;
  return alloc;
}

}  // namespace

SplitPlan make_split(const Manifest& manifest, uint64_t seed) {
  const int n = static_cast<int>(manifest.size());
  if (n < 5) fail("TooFewSamples", "need at least 5 entries, got " + std::to_string(n));

  const LabelMap labels = LabelMap::from_manifest(manifest);
  std::vector<std::vector<int>> by_class(labels.size());
  for (int i = 0; i < n; ++i) {
    by_class[labels.id_of(manifest.entries[i].label)].push_back(i);
  }
  for (int c = 0; c < labels.size(); ++c) {
    if (by_class[c].size() < 3) {
      fail("TooFewPerClass", "class '" + labels.names[c] + "' has only " +
                                 std::to_string(by_class[c].size()) + " samples");
    }
  }

  const int n_test = static_cast<int>(std::lround(0.20 * n));
  const int n_val = static_cast<int>(std::lround(0.20 * (n - n_test)));

  std::vector<double> test_quota(labels.size()), val_quota(labels.size());
  for (int c = 0; c < labels.size(); ++c) test_quota[c] = 0.20 * by_class[c].size();
  const std::vector<int> test_alloc = allocate(test_quota, n_test);
  for (int c = 0; c < labels.size(); ++c) {
    val_quota[c] = 0.20 * (by_class[c].size() - test_alloc[c]);
  }
  const std::vector<int> val_alloc = allocate(val_quota, n_val);

  SplitPlan plan;
  plan.seed = seed;
  Rng rng(mix_seed(seed, 0x5e72));
  for (int c = 0; c < labels.size(); ++c) {
    auto& idx = by_class[c];
    rng.shuffle(idx);
    int i = 0;
    for (int t = 0; t < test_alloc[c]; ++t) plan.test_idx.push_back(idx[i++]);
    for (int v = 0; v < val_alloc[c]; ++v) plan.val_idx.push_back(idx[i++]);
    for (; i < static_cast<int>(idx.size()); ++i) plan.train_idx.push_back(idx[i]);
  }
  std::sort(plan.train_idx.begin(), plan.train_idx.end());
  std::sort(plan.val_idx.begin(), plan.val_idx.end());
  std::sort(plan.test_idx.begin(), plan.test_idx.end());
  return plan;
}

}  // namespace ser
