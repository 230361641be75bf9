#include <doctest.h>

#include <cmath>
#include <vector>

#include "edgecap/model.hpp"
#include "edgecap/netpbm.hpp"
#include "edgecap/rng.hpp"

using namespace edgecap;

namespace {

Vocab toy_vocab(int extra_words) {
  Vocab v = Vocab::with_specials();
  for (int i = 0; i < extra_words; ++i) v.add("w" + std::to_string(i));
  return v;
}

ModelConfig toy_config(FusionVariant variant, EdgeDetector edge) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.edge = edge;
  cfg.input_size = 8;
  cfg.conv_channels = {4};
  cfg.feature_dim = 8;
  cfg.l1_out = 8;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  cfg.l2_out = 8;
  cfg.max_caption_len = 6;
  cfg.seed = 11;
  return cfg;
}

Image random_image(int size, Rng& rng) {
  Image img = Image::zeros(size, size, 3);
  for (long i = 0; i < img.sample_count(); ++i) img.data[i] = rng.uniform();
  return img;
}

long total_params(CaptionModel& model) {
  long total = 0;
  for (const ParamView& v : model.param_views()) total += v.size;
  return total;
}

}  // namespace

TEST_CASE("config validation enforces variant/edge pairing and positive dims") {
  ModelConfig ok = toy_config(FusionVariant::early, EdgeDetector::laplacian);
  ok.validate();

  ModelConfig none_edge = toy_config(FusionVariant::early, EdgeDetector::none);
  CHECK_THROWS_AS(none_edge.validate(), ConfigError);
  ModelConfig late_none = toy_config(FusionVariant::late, EdgeDetector::none);
  CHECK_THROWS_AS(late_none.validate(), ConfigError);
  toy_config(FusionVariant::single, EdgeDetector::none).validate();
  toy_config(FusionVariant::single, EdgeDetector::sobel).validate();

  ModelConfig bad_dim = toy_config(FusionVariant::early, EdgeDetector::sobel);
  bad_dim.embed_dim = 0;
  CHECK_THROWS_AS(bad_dim.validate(), ConfigError);
  ModelConfig bad_channels = toy_config(FusionVariant::early, EdgeDetector::sobel);
  bad_channels.conv_channels.clear();
  CHECK_THROWS_AS(bad_channels.validate(), ConfigError);
  ModelConfig bad_len = toy_config(FusionVariant::early, EdgeDetector::sobel);
  bad_len.max_caption_len = 0;
  CHECK_THROWS_AS(bad_len.validate(), ConfigError);
}

TEST_CASE("fusion variant strings round trip") {
  CHECK(fusion_from_string("single") == FusionVariant::single);
  CHECK(fusion_from_string("early") == FusionVariant::early);
  CHECK(fusion_from_string("late") == FusionVariant::late);
  CHECK(to_string(FusionVariant::late) == "late");
  CHECK_THROWS_AS(fusion_from_string("middle"), ParameterError);
}

TEST_CASE("default-dimension model: L2 input is 512, L3 output is vocab size") {
  ModelConfig cfg;  // full-scale defaults
  cfg.validate();
  CHECK(cfg.l2_in() == 512);
  const Vocab v = toy_vocab(30);
  CaptionModel model = build_model(cfg, v);
  REQUIRE(model.l2.size() == 1);
  CHECK(model.l2[0].in_dim() == 512);
  CHECK(model.l2[0].out_dim() == 256);
  CHECK(model.l3.out_dim() == v.size());
  CHECK(model.l3.in_dim() == 256);
  CHECK(model.encoders.size() == 2);
}

TEST_CASE("build_model is seed-deterministic and validates the vocab") {
  const ModelConfig cfg = toy_config(FusionVariant::early, EdgeDetector::laplacian);
  const Vocab v = toy_vocab(5);
  CaptionModel a = build_model(cfg, v);
  CaptionModel b = build_model(cfg, v);
  const auto va = a.param_views();
  const auto vb = b.param_views();
  REQUIRE(va.size() == vb.size());
  for (std::size_t i = 0; i < va.size(); ++i) {
    CHECK(va[i].name == vb[i].name);
    REQUIRE(va[i].size == vb[i].size);
    for (long j = 0; j < va[i].size; ++j) CHECK(va[i].data[j] == vb[i].data[j]);
  }

  ModelConfig other = cfg;
  other.seed = 12;
  CaptionModel c = build_model(other, v);
  bool any_diff = false;
  const auto vc = c.param_views();
  for (std::size_t i = 0; i < va.size() && !any_diff; ++i)
    for (long j = 0; j < va[i].size; ++j)
      if (va[i].data[j] != vc[i].data[j]) {
        any_diff = true;
        break;
      }
  CHECK(any_diff);

  Vocab broken;
  broken.tokens = {"x"};
  broken.index["x"] = 0;
  CHECK_THROWS_AS(build_model(cfg, broken), ConfigError);
}

TEST_CASE("early variant has more parameters than single at identical dims") {
  const Vocab v = toy_vocab(5);
  CaptionModel early =
      build_model(toy_config(FusionVariant::early, EdgeDetector::laplacian), v);
  CaptionModel single =
      build_model(toy_config(FusionVariant::single, EdgeDetector::laplacian), v);
  CHECK(total_params(early) > total_params(single));
}

TEST_CASE("stream preparation: counts per variant, edge companion, resizing") {
  Rng rng(21);
  const Image img = random_image(8, rng);

  const auto single = prepare_streams(toy_config(FusionVariant::single, EdgeDetector::none), img);
  REQUIRE(single.planes.size() == 1);

  const auto early = prepare_streams(toy_config(FusionVariant::early, EdgeDetector::laplacian), img);
  REQUIRE(early.planes.size() == 2);
  CHECK(early.planes[0].rows() == 3);
  CHECK(early.planes[0].cols() == 64);

  // constant image -> edge companion is the zero image
  const Image flat = Image::constant(8, 8, 3, 0.5);
  const auto flat_early =
      prepare_streams(toy_config(FusionVariant::early, EdgeDetector::laplacian), flat);
  CHECK(flat_early.planes[1].isZero());

  // single + detector uses the edge-only stream
  const auto edge_single =
      prepare_streams(toy_config(FusionVariant::single, EdgeDetector::laplacian), flat);
  REQUIRE(edge_single.planes.size() == 1);
  CHECK(edge_single.planes[0].isZero());

  // larger input is resampled to cfg.input_size
  const Image big = random_image(16, rng);
  const auto resized = prepare_streams(toy_config(FusionVariant::single, EdgeDetector::none), big);
  CHECK(resized.planes[0].cols() == 64);
}

TEST_CASE("encode_image: zero model gives zero context; dims per variant") {
  const Vocab v = toy_vocab(4);
  CaptionModel model = build_model(toy_config(FusionVariant::single, EdgeDetector::none), v);
  zero_params(model);
  const ImageContext ctx = encode_image(model, Image::zeros(8, 8, 3));
  REQUIRE(ctx.ctx.size() == 1);
  CHECK(ctx.ctx[0].size() == 8);
  CHECK(ctx.ctx[0].isZero());

  CaptionModel early = build_model(toy_config(FusionVariant::early, EdgeDetector::sobel), v);
  Rng rng(3);
  const ImageContext ectx = encode_image(early, random_image(8, rng));
  REQUIRE(ectx.ctx.size() == 1);
  CHECK(ectx.ctx[0].size() == 8);
  CHECK(context_feature(early, ectx).size() == 8);

  CaptionModel late = build_model(toy_config(FusionVariant::late, EdgeDetector::sobel), v);
  const ImageContext lctx = encode_image(late, random_image(8, rng));
  REQUIRE(lctx.ctx.size() == 2);
  CHECK(context_feature(late, lctx).size() == 16);
}

TEST_CASE("model_step emits a probability distribution for every variant") {
  const Vocab v = toy_vocab(4);
  Rng rng(9);
  for (FusionVariant variant :
       {FusionVariant::single, FusionVariant::early, FusionVariant::late}) {
    CaptionModel model = build_model(toy_config(variant, EdgeDetector::laplacian), v);
    const Image img = random_image(8, rng);
    const ImageContext ctx = encode_image(model, img);
    DecoderState state = initial_state(model);
    for (int t = 0; t < 3; ++t) {
      const StepResult r = model_step(model, ctx, t == 0 ? Vocab::kStart : 4, state);
      REQUIRE(r.probs.size() == v.size());
      CHECK(r.probs.minCoeff() > 0.0);
      CHECK(r.probs.sum() == doctest::Approx(1.0).epsilon(1e-9));
      state = r.state;
    }
  }
}

TEST_CASE("model_step: zero model is uniform; repeated calls are bitwise equal") {
  const Vocab v = toy_vocab(4);
  CaptionModel model = build_model(toy_config(FusionVariant::early, EdgeDetector::laplacian), v);
  zero_params(model);
  const ImageContext ctx = encode_image(model, Image::zeros(8, 8, 3));
  const StepResult r = model_step(model, ctx, Vocab::kStart, initial_state(model));
  for (int i = 0; i < v.size(); ++i) {
    CHECK(r.probs[i] == doctest::Approx(1.0 / v.size()).epsilon(1e-12));
  }

  CaptionModel rnd = build_model(toy_config(FusionVariant::early, EdgeDetector::laplacian), v);
  Rng rng(17);
  const Image img = random_image(8, rng);
  const ImageContext rctx = encode_image(rnd, img);
  const StepResult a = model_step(rnd, rctx, Vocab::kStart, initial_state(rnd));
  const StepResult b = model_step(rnd, rctx, Vocab::kStart, initial_state(rnd));
  CHECK(a.probs == b.probs);

  CHECK_THROWS_AS(model_step(rnd, rctx, v.size(), initial_state(rnd)), IndexError);
}

TEST_CASE("caption loss masks padding and counts non-pad tokens") {
  const Vocab v = toy_vocab(4);
  CaptionModel model = build_model(toy_config(FusionVariant::early, EdgeDetector::laplacian), v);
  Rng rng(31);
  const PreparedImage streams = prepare_streams(model.cfg, random_image(8, rng));
  const std::vector<int> short_form = {4, 5, Vocab::kEnd};
  const std::vector<int> padded = {4, 5, Vocab::kEnd, Vocab::kPad, Vocab::kPad, Vocab::kPad};
  const SampleStats a = caption_forward(model, streams, short_form);
  const SampleStats b = caption_forward(model, streams, padded);
  CHECK(a.tokens == 3);
  CHECK(b.tokens == 3);
  CHECK(a.loss_sum == doctest::Approx(b.loss_sum).epsilon(1e-15));
  CHECK(a.correct == b.correct);
}

TEST_CASE("full-model gradient matches finite differences on toy configs") {
  const Vocab v = toy_vocab(8);  // vocab size 12
  Rng rng(47);
  const Image img = random_image(8, rng);
  const std::vector<int> tokens = {4, 7, 5, Vocab::kEnd};

  for (FusionVariant variant :
       {FusionVariant::single, FusionVariant::early, FusionVariant::late}) {
    CAPTURE(to_string(variant));
    CaptionModel model = build_model(toy_config(variant, EdgeDetector::laplacian), v);
    const PreparedImage streams = prepare_streams(model.cfg, img);
    CaptionModel grads = zero_like(model);
    caption_loss_and_grad(model, streams, tokens, grads);

    auto views = model.param_views();
    auto aviews = grads.param_views();
    const double err = grad_check(
        [&] { return caption_forward(model, streams, tokens).loss_sum; }, views, aviews);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("make_train_items shares prepared images across captions") {
  const Vocab v = toy_vocab(6);
  CaptionModel model = build_model(toy_config(FusionVariant::early, EdgeDetector::laplacian), v);

  const auto dir = std::filesystem::temp_directory_path() / "edgecap_items";
  std::filesystem::create_directories(dir / "images");
  Rng rng(5);
  Dataset ds;
  ds.root = dir;
  for (int i = 0; i < 2; ++i) {
    const std::string name = "images/i" + std::to_string(i) + ".ppm";
    save_netpbm_file(random_image(8, rng), dir / name);
    ds.items.push_back({name, Split::train, {"w0 w1", "w1 w2 w3"}});
  }
  const auto items = make_train_items(model, ds, Split::train);
  REQUIRE(items.size() == 4);
  CHECK(items[0].streams.get() == items[1].streams.get());
  CHECK(items[2].streams.get() == items[3].streams.get());
  CHECK(items[0].streams.get() != items[2].streams.get());
  CHECK(items[0].tokens.size() == static_cast<std::size_t>(model.cfg.max_caption_len));
  std::filesystem::remove_all(dir);
}

TEST_CASE("training with lr=0 changes nothing and logs equal losses") {
  const Vocab v = toy_vocab(6);
  ModelConfig cfg = toy_config(FusionVariant::early, EdgeDetector::laplacian);
  cfg.train.epochs = 2;
  cfg.train.batch_size = 2;
  cfg.train.adam.lr = 0.0;
  CaptionModel model = build_model(cfg, v);

  Rng rng(8);
  std::vector<TrainItem> items;
  for (int i = 0; i < 4; ++i) {
    auto prep = std::make_shared<PreparedImage>(prepare_streams(cfg, random_image(8, rng)));
    items.push_back({prep, {4, 5, Vocab::kEnd, Vocab::kPad, Vocab::kPad, Vocab::kPad}});
  }

  CaptionModel before = build_model(cfg, v);
  const TrainingLog log = train_model(model, items);
  const auto va = model.param_views();
  const auto vb = before.param_views();
  for (std::size_t i = 0; i < va.size(); ++i)
    for (long j = 0; j < va[i].size; ++j) CHECK(va[i].data[j] == vb[i].data[j]);
  CHECK(log.initial_loss == log.final_loss);  // exact: no update happened
  CHECK(log.total_steps == 4);                // 2 batches x 2 epochs
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
  const Vocab v = toy_vocab(6);
  ModelConfig cfg = toy_config(FusionVariant::early, EdgeDetector::laplacian);
  cfg.train.epochs = 3;
  cfg.train.batch_size = 2;

  Rng rng(13);
  std::vector<TrainItem> items;
  for (int i = 0; i < 4; ++i) {
    auto prep = std::make_shared<PreparedImage>(prepare_streams(cfg, random_image(8, rng)));
    items.push_back({prep, {4, static_cast<int>(5 + i % 2), Vocab::kEnd, Vocab::kPad,
                            Vocab::kPad, Vocab::kPad}});
  }

  CaptionModel m1 = build_model(cfg, v);
  CaptionModel m2 = build_model(cfg, v);
  const TrainingLog l1 = train_model(m1, items);
  const TrainingLog l2 = train_model(m2, items);
  REQUIRE(l1.epochs.size() == l2.epochs.size());
  for (std::size_t e = 0; e < l1.epochs.size(); ++e) {
    CHECK(l1.epochs[e].loss == l2.epochs[e].loss);
    CHECK(l1.epochs[e].accuracy == l2.epochs[e].accuracy);
  }
  CHECK(l1.final_loss == l2.final_loss);
  const auto va = m1.param_views();
  const auto vb = m2.param_views();
  for (std::size_t i = 0; i < va.size(); ++i)
    for (long j = 0; j < va[i].size; ++j) CHECK(va[i].data[j] == vb[i].data[j]);
}

TEST_CASE("a tiny model memorizes a 4-image set within the step budget") {
  const Vocab v = toy_vocab(8);
  ModelConfig cfg = toy_config(FusionVariant::early, EdgeDetector::laplacian);
  cfg.train.epochs = 2000;  // one batch per epoch; max_steps is the real cap
  cfg.train.batch_size = 4;
  cfg.train.max_steps = 2000;
  cfg.train.stop_accuracy = 0.995;
  CaptionModel model = build_model(cfg, v);

  Rng rng(23);
  std::vector<TrainItem> items;
  for (int i = 0; i < 4; ++i) {
    auto prep = std::make_shared<PreparedImage>(prepare_streams(cfg, random_image(8, rng)));
    items.push_back({prep, {4 + i, 4 + (i + 1) % 4, 8 + i % 4, Vocab::kEnd, Vocab::kPad,
                            Vocab::kPad}});
  }

  const TrainingLog log = train_model(model, items);
  const SampleStats eval = evaluate_teacher_forced(model, items);
  const double accuracy = static_cast<double>(eval.correct) / static_cast<double>(eval.tokens);
  CHECK(accuracy >= 0.99);
  CHECK(log.final_loss < log.initial_loss);
  CHECK(log.total_steps <= 2000);
}

TEST_CASE("train_model rejects an empty item list") {
  const Vocab v = toy_vocab(4);
  CaptionModel model = build_model(toy_config(FusionVariant::single, EdgeDetector::none), v);
  std::vector<TrainItem> empty;
  CHECK_THROWS_AS(train_model(model, empty), DataError);
}
