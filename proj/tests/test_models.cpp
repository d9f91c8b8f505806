#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ser/error.hpp"
#include "ser/model.hpp"
#include "ser/rng.hpp"

using namespace ser;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& leaf) {
  const auto dir = fs::temp_directory_path() / "ser_test_models" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

Normalizer identity_normalizer() {
  Normalizer n;
  n.mean.assign(kFeatureDim, 0.0);
  n.std.assign(kFeatureDim, 1.0);
  return n;
}

LabelMap three_labels() { return LabelMap::from_names({"angry", "happy", "sad"}); }

// 32 separable vectors over 3 classes: distinct disjoint active blocks
void separable_data(std::vector<std::vector<double>>& x, std::vector<int>& y, int n,
                    uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 3;
    std::vector<double> row(kFeatureDim);
    for (int d = 0; d < kFeatureDim; ++d) {
      row[d] = 0.1 * rng.normal();
      if (d / 50 == cls) row[d] += 3.0;
    }
    x.push_back(std::move(row));
    y.push_back(cls);
  }
}

}  // namespace

TEST_CASE("build validates its arguments") {
  CHECK_THROWS_WITH_AS(build('A', 1), doctest::Contains("BadArgs"), Error);
  CHECK_THROWS_WITH_AS(build('D', 3), doctest::Contains("BadArgs"), Error);
}

TEST_CASE("built stacks chain from (155, 1) to K classes") {
  for (char id : {'A', 'B', 'C'}) {
    BuildOptions opts;
    opts.width_scale = 1.0 / 32;
    const ModelSpec spec = build(id, 7, opts);
    nn::Network<float> net(spec.layers, spec.input_dim, 1, 1);
    CHECK(net.output_dim() == 7);

    nn::Tensor<float> x({2, spec.input_dim, 1});
    Rng rng(1);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1, 1));
    const auto probs = net.forward(x, nn::Mode::Infer);
    REQUIRE(probs.shape == std::vector<int>{2, 7});
    for (int b = 0; b < 2; ++b) {
      double sum = 0.0;
      for (int k = 0; k < 7; ++k) sum += probs.at(b, k);
      REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("model-A structure: 7 pools shrink 155 to 1") {
  const ModelSpec spec = build('A', 7);
  int pools = 0, convs = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == nn::LayerKind::MaxPool1D) ++pools;
    if (l.kind == nn::LayerKind::Conv1D) ++convs;
  }
  CHECK(pools == 7);
  CHECK(convs == 8);  // two in the first block, one in each of the other six
  int len = 155;
  for (int i = 0; i < 7; ++i) len /= 2;
  CHECK(len == 1);
}

TEST_CASE("parameter counts match an independent hand tally at 1/32 width") {
  BuildOptions opts;
  opts.width_scale = 1.0 / 32;
  // widths: 256 -> 8, 128 -> 4, 64 -> 2, 512 -> 16, dense 128 -> 4, 64 -> 2
  const long conv1 = 8 * 1 * 8 + 8;
  const long conv2 = 8 * 8 * 8 + 8;
  auto bn_of = [](long c) { return 4 * c; };  // per-channel gamma/beta/mm/mv
  const long lfab2 = 8 * 8 * 8 + 8 + bn_of(8);
  const long lfab3 = 8 * 8 * 4 + 4 + bn_of(4);
  const long lfab4 = 8 * 4 * 4 + 4 + bn_of(4);
  const long lfab5 = 8 * 4 * 4 + 4 + bn_of(4);
  const long lfab6 = 8 * 4 * 8 + 8 + bn_of(8);
  const long lfab7 = 8 * 8 * 2 + 2 + bn_of(2);
  const long head_a = (2 * 4 + 4) + (4 * 2 + 2) + (2 * 3 + 3);
  const long total_a = conv1 + bn_of(8) + conv2 + bn_of(8) + lfab2 + lfab3 + lfab4 + lfab5 +
                       lfab6 + lfab7 + head_a;
  CHECK(checkpoint_param_count(build('A', 3, opts)) == static_cast<size_t>(total_a));

  const long lstm = 4 * (16 * (16 + 2) + 16);
  const long head_b = (16 * 4 + 4) + (4 * 2 + 2) + (2 * 3 + 3);
  const long total_b = total_a - head_a + head_b + lstm;
  CHECK(checkpoint_param_count(build('B', 3, opts)) == static_cast<size_t>(total_b));

  const long gru = 3 * (16 * (16 + 2) + 16);
  const long total_c = total_a - head_a + head_b + gru;
  CHECK(checkpoint_param_count(build('C', 3, opts)) == static_cast<size_t>(total_c));
}

TEST_CASE("fit: epochs=0 returns initial weights and empty history") {
  BuildOptions opts;
  opts.width_scale = 1.0 / 32;
  const ModelSpec spec = build('A', 3, opts);
  FitConfig cfg;
  cfg.epochs = 0;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  separable_data(x, y, 6, 1);
  History history;
  const Checkpoint ck =
      fit(spec, x, y, {}, {}, cfg, identity_normalizer(), three_labels(), &history);
  CHECK(history.epochs.empty());
  CHECK(ck.weights.size() == checkpoint_param_count(spec));
  const auto probs = predict(ck, x[0]);
  REQUIRE(probs.size() == 3);
}

TEST_CASE("fit: separable data reaches full accuracy quickly") {
  BuildOptions opts;
  opts.width_scale = 1.0 / 32;
  const ModelSpec spec = build('A', 3, opts);
  FitConfig cfg;
  cfg.epochs = 300;
  cfg.batch = 32;
  cfg.lr = 1e-2;  // full-batch steps: 300 updates total, so move fast
  cfg.seed = 5;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  separable_data(x, y, 32, 2);
  History history;
  // the train set doubles as validation so accuracy is measured infer-mode
  const Checkpoint ck = fit(spec, x, y, x, y, cfg, identity_normalizer(), three_labels(),
                            &history);
  double best = 0.0;
  int reached_at = -1;
  for (const auto& e : history.epochs) {
    if (e.val_acc > best) best = e.val_acc;
    if (best >= 1.0 && reached_at < 0) reached_at = e.epoch;
  }
  INFO("full accuracy reached at epoch ", reached_at);
  CHECK(best == doctest::Approx(1.0));
  CHECK(ck.weights.size() == checkpoint_param_count(spec));
}

TEST_CASE("fit is deterministic per seed") {
  BuildOptions opts;
  opts.width_scale = 1.0 / 32;
  const ModelSpec spec = build('C', 3, opts);
  FitConfig cfg;
  cfg.epochs = 4;
  cfg.batch = 8;
  cfg.seed = 77;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  separable_data(x, y, 24, 3);

  History h1, h2;
  const Checkpoint c1 = fit(spec, x, y, x, y, cfg, identity_normalizer(), three_labels(), &h1);
  const Checkpoint c2 = fit(spec, x, y, x, y, cfg, identity_normalizer(), three_labels(), &h2);
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (size_t i = 0; i < h1.epochs.size(); ++i) {
    REQUIRE(h1.epochs[i].train_loss == h2.epochs[i].train_loss);
    REQUIRE(h1.epochs[i].val_acc == h2.epochs[i].val_acc);
  }
  CHECK(c1.weights == c2.weights);

  cfg.seed = 78;
  History h3;
  const Checkpoint c3 = fit(spec, x, y, x, y, cfg, identity_normalizer(), three_labels(), &h3);
  CHECK(c1.weights != c3.weights);
}

TEST_CASE("checkpoint save/load round trip is bit-identical for A, B and C") {
  BuildOptions opts;
  opts.width_scale = 1.0 / 32;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  separable_data(x, y, 9, 4);
  FitConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 4;

  Rng rng(11);
  std::vector<double> probe(kFeatureDim);
  for (auto& v : probe) v = rng.uniform(-2, 2);

  for (char id : {'A', 'B', 'C'}) {
    const ModelSpec spec = build(id, 3, opts);
    const Checkpoint ck = fit(spec, x, y, x, y, cfg, identity_normalizer(), three_labels());
    const auto before = predict(ck, probe);

    const std::string dir = temp_dir(std::string("ck_") + id);
    save(ck, dir);
    const Checkpoint back = load(dir);
    CHECK(back.weights == ck.weights);
    CHECK(back.labels.names == ck.labels.names);
    CHECK(back.spec.num_classes == 3);

    // load -> save reproduces both files byte for byte
    const std::string dir2 = temp_dir(std::string("ck2_") + id);
    save(back, dir2);
    for (const char* leaf : {"manifest.json", "weights.bin"}) {
      std::ifstream f1(fs::path(dir) / leaf, std::ios::binary);
      std::ifstream f2(fs::path(dir2) / leaf, std::ios::binary);
      std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
      std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
      REQUIRE(s1 == s2);
    }

    const auto after = predict(back, probe);
    REQUIRE(after.size() == before.size());
    for (size_t k = 0; k < before.size(); ++k) {
      REQUIRE(after[k] == before[k]);  // exact float equality
    }

    double sum = 0.0;
    for (float p : after) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("checkpoint error taxonomy") {
  BuildOptions opts;
  opts.width_scale = 1.0 / 32;
  const ModelSpec spec = build('A', 3, opts);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  separable_data(x, y, 6, 5);
  FitConfig cfg;
  cfg.epochs = 0;
  const Checkpoint ck = fit(spec, x, y, {}, {}, cfg, identity_normalizer(), three_labels());

  SUBCASE("truncated weight blob") {
    const std::string dir = temp_dir("trunc");
    save(ck, dir);
    fs::resize_file(fs::path(dir) / "weights.bin", 16);
    CHECK_THROWS_WITH_AS(load(dir), doctest::Contains("BlobLength"), Error);
  }
  SUBCASE("version mismatch") {
    const std::string dir = temp_dir("version");
    save(ck, dir);
    std::ifstream in(fs::path(dir) / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"format_version\": 9");
    std::ofstream(fs::path(dir) / "manifest.json") << text;
    CHECK_THROWS_WITH_AS(load(dir), doctest::Contains("VersionMismatch"), Error);
  }
  SUBCASE("wrong vector length") {
    CHECK_THROWS_WITH_AS(predict(ck, std::vector<double>(42, 0.0)),
                         doctest::Contains("ShapeMismatch"), Error);
  }
  SUBCASE("missing directory") {
    CHECK_THROWS_WITH_AS(load("/nonexistent/ck"), doctest::Contains("MissingFile"), Error);
  }
}

TEST_CASE("repeated predict calls are identical and dropout stays inert") {
  BuildOptions opts;
  opts.width_scale = 1.0 / 32;
  const ModelSpec spec = build('B', 3, opts);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  separable_data(x, y, 6, 6);
  FitConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 4;
  const Checkpoint ck = fit(spec, x, y, x, y, cfg, identity_normalizer(), three_labels());

  const auto p1 = predict(ck, x[0]);
  const auto p2 = predict(ck, x[0]);
  CHECK(p1 == p2);

  const auto batch = predict_batch(ck, x);
  CHECK(batch[0] == p1);  // chunked batch path agrees with single predict
}

TEST_CASE("history csv is deterministic") {
  History h;
  h.epochs.push_back({0, 1.5, 0.25, 1.4, 0.5});
  h.epochs.push_back({1, 0.9, 0.75, 1.0, 0.75});
  const std::string dir = temp_dir("hist");
  write_history_csv(h, dir + "/history.csv");
  write_history_csv(h, dir + "/history2.csv");
  std::ifstream a(dir + "/history.csv"), b(dir + "/history2.csv");
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(sa.substr(0, 46) == "epoch,train_loss,train_acc,val_loss,val_acc\n0,");
}
