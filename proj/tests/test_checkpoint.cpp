#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgecap/checkpoint.hpp"
#include "edgecap/decode.hpp"
#include "edgecap/model.hpp"
#include "edgecap/rng.hpp"

using namespace edgecap;

namespace {

Vocab toy_vocab(int extra_words) {
  Vocab v = Vocab::with_specials();
  for (int i = 0; i < extra_words; ++i) v.add("w" + std::to_string(i));
  return v;
}

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.variant = FusionVariant::early;
  cfg.edge = EdgeDetector::sobel;
  cfg.input_size = 8;
  cfg.conv_channels = {4};
  cfg.feature_dim = 8;
  cfg.l1_out = 8;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  cfg.l2_out = 8;
  cfg.max_caption_len = 6;
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST_CASE("model config JSON round trip covers every field") {
  ModelConfig cfg = toy_config();
  cfg.edge_params.canny_low_frac = 0.05;
  cfg.edge_params.canny_high_frac = 0.4;
  cfg.train.epochs = 13;
  cfg.train.batch_size = 5;
  cfg.train.adam.lr = 0.01;
  cfg.train.adam.beta1 = 0.8;
  cfg.train.max_steps = 99;
  cfg.train.stop_accuracy = 0.5;
  cfg.train.shuffle = false;

  const ModelConfig back = model_config_from_json(model_config_to_json(cfg));
  CHECK(back.variant == cfg.variant);
  CHECK(back.edge == cfg.edge);
  CHECK(back.edge_params.canny_low_frac == cfg.edge_params.canny_low_frac);
  CHECK(back.edge_params.canny_high_frac == cfg.edge_params.canny_high_frac);
  CHECK(back.input_size == cfg.input_size);
  CHECK(back.conv_channels == cfg.conv_channels);
  CHECK(back.feature_dim == cfg.feature_dim);
  CHECK(back.l1_out == cfg.l1_out);
  CHECK(back.embed_dim == cfg.embed_dim);
  CHECK(back.hidden_dim == cfg.hidden_dim);
  CHECK(back.l2_out == cfg.l2_out);
  CHECK(back.max_caption_len == cfg.max_caption_len);
  CHECK(back.seed == cfg.seed);
  CHECK(back.train.epochs == cfg.train.epochs);
  CHECK(back.train.batch_size == cfg.train.batch_size);
  CHECK(back.train.adam.lr == cfg.train.adam.lr);
  CHECK(back.train.adam.beta1 == cfg.train.adam.beta1);
  CHECK(back.train.max_steps == cfg.train.max_steps);
  CHECK(back.train.stop_accuracy == cfg.train.stop_accuracy);
  CHECK(back.train.shuffle == cfg.train.shuffle);

  // missing optional fields fall back to defaults
  const ModelConfig sparse = model_config_from_json(nlohmann::json{{"variant", "single"}});
  CHECK(sparse.variant == FusionVariant::single);
  CHECK(sparse.embed_dim == 256);
}

TEST_CASE("checkpoint round trip is bitwise lossless") {
  CaptionModel model = build_model(toy_config(), toy_vocab(6));
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(model);
  REQUIRE(bytes.size() > 16);
  CHECK(bytes[0] == 'J');
  CHECK(bytes[1] == 'S');
  CHECK(bytes[2] == 'S');
  CHECK(bytes[3] == 'F');
  CHECK(bytes[4] == '1');

  CaptionModel loaded = deserialize_checkpoint(bytes);
  CHECK(loaded.vocab.tokens == model.vocab.tokens);
  auto va = model.param_views();
  auto vb = loaded.param_views();
  REQUIRE(va.size() == vb.size());
  for (std::size_t i = 0; i < va.size(); ++i) {
    CHECK(va[i].name == vb[i].name);
    CHECK(va[i].shape == vb[i].shape);
    REQUIRE(va[i].size == vb[i].size);
    for (long j = 0; j < va[i].size; ++j) CHECK(va[i].data[j] == vb[i].data[j]);
  }

  // serialize(deserialize(x)) reproduces x exactly
  CHECK(serialize_checkpoint(loaded) == bytes);
}

TEST_CASE("checkpoint file save/load round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "edgecap_ckpt";
  std::filesystem::create_directories(dir);
  CaptionModel model = build_model(toy_config(), toy_vocab(3));
  save_checkpoint(model, dir / "m.jssf");
  CaptionModel loaded = load_checkpoint(dir / "m.jssf");
  CHECK(serialize_checkpoint(loaded) == serialize_checkpoint(model));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.jssf"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint corruption: magic, truncation, trailing garbage") {
  CaptionModel model = build_model(toy_config(), toy_vocab(3));
  const std::vector<std::uint8_t> good = serialize_checkpoint(model);

  std::vector<std::uint8_t> bad_magic = good;
  bad_magic[4] = '9';
  CHECK_THROWS_WITH_AS(deserialize_checkpoint(bad_magic), doctest::Contains("JSSF1"),
                       PersistenceError);

  std::vector<std::uint8_t> truncated(good.begin(), good.begin() + good.size() / 2);
  CHECK_THROWS_AS(deserialize_checkpoint(truncated), PersistenceError);

  std::vector<std::uint8_t> tiny(good.begin(), good.begin() + 3);
  CHECK_THROWS_AS(deserialize_checkpoint(tiny), PersistenceError);

  std::vector<std::uint8_t> trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_checkpoint(trailing), PersistenceError);
}

TEST_CASE("checkpoint shape validation names the offending tensor") {
  // Serialize a model, then edit the embedded config to expect different dims.
  CaptionModel model = build_model(toy_config(), toy_vocab(3));
  std::vector<std::uint8_t> bytes = serialize_checkpoint(model);

  // Config block starts after magic (5) + version (1): u32 length + JSON.
  const std::size_t len_at = 6;
  const std::uint32_t cfg_len = static_cast<std::uint32_t>(bytes[len_at]) |
                                (static_cast<std::uint32_t>(bytes[len_at + 1]) << 8) |
                                (static_cast<std::uint32_t>(bytes[len_at + 2]) << 16) |
                                (static_cast<std::uint32_t>(bytes[len_at + 3]) << 24);
  const std::string cfg_text(bytes.begin() + 10, bytes.begin() + 10 + cfg_len);
  nlohmann::json cfg_json = nlohmann::json::parse(cfg_text);
  cfg_json["hidden_dim"] = 16;  // checkpoint tensors were built with 8
  const std::string edited = cfg_json.dump();
  std::vector<std::uint8_t> patched(bytes.begin(), bytes.begin() + 6);
  const std::uint32_t new_len = static_cast<std::uint32_t>(edited.size());
  for (int b = 0; b < 4; ++b) patched.push_back(static_cast<std::uint8_t>(new_len >> (8 * b)));
  patched.insert(patched.end(), edited.begin(), edited.end());
  patched.insert(patched.end(), bytes.begin() + 10 + cfg_len, bytes.end());

  CHECK_THROWS_AS(deserialize_checkpoint(patched), ShapeError);
}

TEST_CASE("archive round trip preserves features and captions") {
  Archive archive;
  archive.feature_dim = 3;
  Vec f1(3), f2(3);
  f1 << 0.25, -1.0, 3.5;
  f2 << 0.0, 0.125, -2.0;
  archive.entries.push_back({"images/a.ppm", f1, {{4, 5, 6}, {7, 8}}});
  archive.entries.push_back({"images/b.ppm", f2, {{9}}});

  const std::vector<std::uint8_t> bytes = serialize_archive(archive);
  CHECK(bytes[3] == 'A');
  const Archive back = deserialize_archive(bytes);
  CHECK(back.feature_dim == 3);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[0].source == "images/a.ppm");
  CHECK(back.entries[0].feature == f1);  // bitwise
  CHECK(back.entries[0].captions == archive.entries[0].captions);
  CHECK(back.entries[1].feature == f2);
  CHECK(serialize_archive(back) == bytes);

  const auto dir = std::filesystem::temp_directory_path() / "edgecap_arch";
  std::filesystem::create_directories(dir);
  save_archive(archive, dir / "a.jssa");
  const Archive from_file = load_archive(dir / "a.jssa");
  CHECK(serialize_archive(from_file) == bytes);
  std::filesystem::remove_all(dir);

  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_archive(bad), PersistenceError);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 2);
  CHECK_THROWS_AS(deserialize_archive(cut), PersistenceError);
}

TEST_CASE("a loaded checkpoint behaves identically to the original model") {
  CaptionModel model = build_model(toy_config(), toy_vocab(6));
  CaptionModel loaded = deserialize_checkpoint(serialize_checkpoint(model));

  Rng rng(5);
  Image img = Image::zeros(8, 8, 3);
  for (long i = 0; i < img.sample_count(); ++i) img.data[i] = rng.uniform();
  const ImageContext ca = encode_image(model, img);
  const ImageContext cb = encode_image(loaded, img);
  const StepResult a = model_step(model, ca, Vocab::kStart, initial_state(model));
  const StepResult b = model_step(loaded, cb, Vocab::kStart, initial_state(loaded));
  CHECK(a.probs == b.probs);  // bitwise
}
