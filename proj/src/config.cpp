#include "ser/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ser/error.hpp"

using json = nlohmann::ordered_json;

namespace ser {

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  const std::pair<AugmentKind, double> recipes[] = {
      {AugmentKind::Awgn, 0.020}, {AugmentKind::Awgn, 0.025},
      {AugmentKind::Stretch, 0.7}, {AugmentKind::Stretch, 0.8},
      {AugmentKind::Pitch, 0.6},   {AugmentKind::Pitch, 0.7}};
  uint64_t seed = 1000;
  for (const auto& [kind, param] : recipes) {
    cfg.augment.push_back(AugmentSpec{kind, param, seed++});
  }
  return cfg;
}

FrameParams RunConfig::frame_params() const {
  FrameParams p;
  p.win_ms = frame_win_ms;
  p.hop_ms = frame_hop_ms;
  p.window = WindowKind::Hamming;
  p.mel_constant = mel_constant;
  return p;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    fail("BadConfig", field + ": " + why);
  };
  if (sample_rate <= 0) bad("sample_rate", "must be positive");
  if (!(duration_s > 0)) bad("duration_s", "must be positive");
  if (!(frame_win_ms >= 20.0 && frame_win_ms <= 30.0)) {
    bad("frame.win_ms", "must be within [20, 30]");
  }
  if (!(frame_hop_ms > 0 && frame_hop_ms <= frame_win_ms)) {
    bad("frame.hop_ms", "must be in (0, win_ms]");
  }
  if (!(mel_constant > 0)) bad("mel_constant", "must be positive");
  for (size_t i = 0; i < augment.size(); ++i) {
    try {
      augment[i].validate();
    } catch (const Error& e) {
      bad("augment[" + std::to_string(i) + "]", e.what());
    }
  }
  if (train.epochs < 0) bad("train.epochs", "must be >= 0");
  if (train.batch < 1) bad("train.batch", "must be >= 1");
  if (!(train.lr > 0)) bad("train.lr", "must be positive");
  if (train.l2 < 0) bad("train.l2", "must be >= 0");
  if (!(train.width_scale > 0)) bad("train.width_scale", "must be positive");
  const int n = static_cast<int>(std::lround(1.0 / ensemble.step));
  if (!(ensemble.step > 0 && ensemble.step <= 1.0) ||
      std::fabs(n * ensemble.step - 1.0) > 1e-9) {
    bad("ensemble.step", "must divide 1 evenly");
  }
}

namespace {

json to_json(const RunConfig& cfg) {
  json j;
  j["sample_rate"] = cfg.sample_rate;
  j["duration_s"] = cfg.duration_s;
  j["frame"] = {{"win_ms", cfg.frame_win_ms}, {"hop_ms", cfg.frame_hop_ms}};
  j["mel_constant"] = cfg.mel_constant;
  json augment = json::array();
  for (const auto& a : cfg.augment) {
    augment.push_back({{"kind", augment_kind_name(a.kind)},
                       {"param", a.param},
                       {"seed", a.seed}});
  }
  j["augment"] = augment;
  j["train"] = {{"epochs", cfg.train.epochs},   {"batch", cfg.train.batch},
                {"lr", cfg.train.lr},           {"l2", cfg.train.l2},
                {"seed", cfg.train.seed},       {"width_scale", cfg.train.width_scale}};
  j["ensemble"] = {{"step", cfg.ensemble.step}};
  return j;
}

RunConfig from_json(const json& j) {
  RunConfig cfg = RunConfig::defaults();
  try {
    cfg.sample_rate = j.value("sample_rate", cfg.sample_rate);
    cfg.duration_s = j.value("duration_s", cfg.duration_s);
    if (j.contains("frame")) {
      cfg.frame_win_ms = j["frame"].value("win_ms", cfg.frame_win_ms);
      cfg.frame_hop_ms = j["frame"].value("hop_ms", cfg.frame_hop_ms);
    }
    cfg.mel_constant = j.value("mel_constant", cfg.mel_constant);
    if (j.contains("augment")) {
      cfg.augment.clear();
      for (const auto& a : j["augment"]) {
        AugmentSpec spec;
        spec.kind = parse_augment_kind(a.at("kind").get<std::string>());
        spec.param = a.at("param").get<double>();
        spec.seed = a.value("seed", 0ULL);
        cfg.augment.push_back(spec);
      }
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.batch = t.value("batch", cfg.train.batch);
      cfg.train.lr = t.value("lr", cfg.train.lr);
      cfg.train.l2 = t.value("l2", cfg.train.l2);
      cfg.train.seed = t.value("seed", cfg.train.seed);
      cfg.train.width_scale = t.value("width_scale", cfg.train.width_scale);
    }
    if (j.contains("ensemble")) {
      cfg.ensemble.step = j["ensemble"].value("step", cfg.ensemble.step);
    }
  } catch (const json::exception& e) {
    fail("BadConfig", e.what());
  }
  return cfg;
}

}  // namespace

std::string RunConfig::to_json_string() const { return to_json(*this).dump(2) + "\n"; }

RunConfig RunConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail("BadConfig", e.what());
  }
  return from_json(j);
}

void RunConfig::set_override(const std::string& key, const std::string& value) {
  auto as_int = [&](const std::string& field) {
    try {
      return std::stoi(value);
    } catch (...) {
      fail("BadConfig", field + ": '" + value + "' is not an integer");
    }
  };
  auto as_double = [&](const std::string& field) {
    try {
      return std::stod(value);
    } catch (...) {
      fail("BadConfig", field + ": '" + value + "' is not a number");
    }
  };
  auto as_u64 = [&](const std::string& field) -> uint64_t {
    try {
      return std::stoull(value);
    } catch (...) {
      fail("BadConfig", field + ": '" + value + "' is not an unsigned integer");
    }
  };

  if (key == "sample_rate") sample_rate = as_int(key);
  else if (key == "duration_s") duration_s = as_double(key);
  else if (key == "frame.win_ms") frame_win_ms = as_double(key);
  else if (key == "frame.hop_ms") frame_hop_ms = as_double(key);
  else if (key == "mel_constant") mel_constant = as_double(key);
  else if (key == "train.epochs") train.epochs = as_int(key);
  else if (key == "train.batch") train.batch = as_int(key);
  else if (key == "train.lr") train.lr = as_double(key);
  else if (key == "train.l2") train.l2 = as_double(key);
  else if (key == "train.seed") train.seed = as_u64(key);
  else if (key == "train.width_scale") train.width_scale = as_double(key);
  else if (key == "ensemble.step") ensemble.step = as_double(key);
  else fail("BadConfig", key + ": unknown config key");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingFile", "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return RunConfig::from_json_string(text);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("UnwritablePath", "cannot write " + path);
  out << cfg.to_json_string();
}

}  // namespace ser
