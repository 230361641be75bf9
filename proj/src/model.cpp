#include "edgecap/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "edgecap/io_util.hpp"
#include "edgecap/netpbm.hpp"

namespace edgecap {

FusionVariant fusion_from_string(const std::string& name) {
  if (name == "single") return FusionVariant::single;
  if (name == "early") return FusionVariant::early;
  if (name == "late") return FusionVariant::late;
  throw ParameterError("model: unknown fusion variant \"" + name + "\"");
}

std::string to_string(FusionVariant v) {
  switch (v) {
    case FusionVariant::single: return "single";
    case FusionVariant::early: return "early";
    case FusionVariant::late: return "late";
  }
  throw ParameterError("model: invalid fusion variant value");
}

void ModelConfig::validate() const {
  if (input_size < 1 || feature_dim < 1 || l1_out < 1 || embed_dim < 1 || hidden_dim < 1 ||
      l2_out < 1)
    throw ConfigError("model config: all dimensions must be positive");
  if (max_caption_len < 2)
    throw ConfigError("model config: max_caption_len must be >= 2 (one word plus <end>)");
  if (conv_channels.empty()) throw ConfigError("model config: conv_channels must be nonempty");
  if (variant != FusionVariant::single && edge == EdgeDetector::none)
    throw ConfigError("model config: " + to_string(variant) +
                      " fusion requires an edge detector");
  if (train.batch_size < 1) throw ConfigError("model config: batch_size must be >= 1");
  if (train.epochs < 0) throw ConfigError("model config: epochs must be >= 0");
  // Throws if the spatial size cannot survive the block depth.
  ConvEncoderParams::build(input_size, conv_channels, feature_dim);
}

std::vector<ParamView> CaptionModel::param_views() {
  std::vector<ParamView> out;
  for (size_t e = 0; e < encoders.size(); ++e)
    encoders[e].collect("e" + std::to_string(e + 1), out);
  for (size_t s = 0; s < l1.size(); ++s) {
    const std::string p = "s" + std::to_string(s + 1);
    l1[s].collect(p + ".l1", out);
    embed[s].collect(p + ".embed", out);
    lstm[s].collect(p + ".lstm", out);
    l2[s].collect(p + ".l2", out);
  }
  l3.collect("l3", out);
  return out;
}

CaptionModel build_model(const ModelConfig& cfg, const Vocab& vocab) {
  cfg.validate();
  if (vocab.size() < 4 || vocab.token(Vocab::kPad) != "<pad>" ||
      vocab.token(Vocab::kStart) != "<start>" || vocab.token(Vocab::kEnd) != "<end>" ||
      vocab.token(Vocab::kUnk) != "<unk>")
    throw ConfigError("model: vocabulary must begin with <pad>, <start>, <end>, <unk>");

  CaptionModel m;
  m.cfg = cfg;
  m.vocab = vocab;
  for (int e = 0; e < cfg.num_encoders(); ++e)
    m.encoders.push_back(ConvEncoderParams::build(cfg.input_size, cfg.conv_channels,
                                                  cfg.feature_dim));
  for (int s = 0; s < cfg.num_decoder_streams(); ++s) {
    m.l1.push_back(LinearParams::zeros(cfg.l1_in(), cfg.l1_out));
    m.embed.push_back(EmbeddingParams::zeros(vocab.size(), cfg.embed_dim));
    m.lstm.push_back(LstmParams::zeros(cfg.embed_dim, cfg.hidden_dim));
    m.l2.push_back(LinearParams::zeros(cfg.l2_in(), cfg.l2_out));
  }
  m.l3 = LinearParams::zeros(cfg.l3_in(), vocab.size());

  Rng rng(cfg.seed);
  for (auto& enc : m.encoders) enc.init(rng);
  for (size_t s = 0; s < m.l1.size(); ++s) {
    m.l1[s].init(rng);
    m.embed[s].init(rng);
    m.lstm[s].init(rng);
    m.l2[s].init(rng);
  }
  m.l3.init(rng);
  return m;
}

CaptionModel zero_like(const CaptionModel& model) {
  CaptionModel z;
  z.cfg = model.cfg;
  z.vocab = model.vocab;
  for (const auto& enc : model.encoders) {
    ConvEncoderParams e;
    e.input_size = enc.input_size;
    for (const auto& b : enc.blocks)
      e.blocks.push_back(ConvLayerParams::zeros(b.in_channels, b.out_channels));
    e.head = LinearParams::zeros(enc.head.in_dim(), enc.head.out_dim());
    z.encoders.push_back(std::move(e));
  }
  for (size_t s = 0; s < model.l1.size(); ++s) {
    z.l1.push_back(LinearParams::zeros(model.l1[s].in_dim(), model.l1[s].out_dim()));
    z.embed.push_back(
        EmbeddingParams::zeros(model.embed[s].vocab_size(), model.embed[s].embed_dim()));
    z.lstm.push_back(LstmParams::zeros(model.lstm[s].input_dim(), model.lstm[s].hidden_dim()));
    z.l2.push_back(LinearParams::zeros(model.l2[s].in_dim(), model.l2[s].out_dim()));
  }
  z.l3 = LinearParams::zeros(model.l3.in_dim(), model.l3.out_dim());
  return z;
}

void zero_params(CaptionModel& model) {
  for (ParamView& v : model.param_views())
    Eigen::Map<Vec>(v.data, v.size).setZero();
}

void scale_params(CaptionModel& model, double factor) {
  for (ParamView& v : model.param_views())
    Eigen::Map<Vec>(v.data, v.size) *= factor;
}

namespace {

Image ensure_three_channels(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1)
    throw ParameterError("model: expected 1- or 3-channel image, got " +
                         std::to_string(img.channels));
  Image out = Image::zeros(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double v = img.at(y, x, 0);
      out.at(y, x, 0) = v;
      out.at(y, x, 1) = v;
      out.at(y, x, 2) = v;
    }
  return out;
}

}  // namespace

PreparedImage prepare_streams(const ModelConfig& cfg, const Image& original) {
  Image base = original;
  if (base.width != cfg.input_size || base.height != cfg.input_size)
    base = resize_bilinear(base, cfg.input_size, cfg.input_size);
  base = ensure_three_channels(base);

  PreparedImage out;
  if (cfg.variant == FusionVariant::single) {
    // Baseline stream: the raw image, or the edge-aware image alone when a
    // detector is configured (detectors are comparable without fusion).
    out.planes.push_back(image_planes(
        cfg.edge == EdgeDetector::none ? base
                                       : edge_aware_image(base, cfg.edge, cfg.edge_params)));
  } else {
    out.planes.push_back(image_planes(base));
    out.planes.push_back(image_planes(edge_aware_image(base, cfg.edge, cfg.edge_params)));
  }
  return out;
}

ImageContext encode_streams(const CaptionModel& model, const PreparedImage& streams,
                            EncodeCache* cache) {
  if (streams.planes.size() != model.encoders.size())
    throw ShapeError("model: prepared image has " + std::to_string(streams.planes.size()) +
                     " streams, model expects " + std::to_string(model.encoders.size()));
  const ModelConfig& cfg = model.cfg;
  if (cache) {
    cache->enc.assign(model.encoders.size(), {});
    cache->enc_out.clear();
    cache->l1_in.clear();
  }
  std::vector<Vec> feats(model.encoders.size());
  for (size_t e = 0; e < model.encoders.size(); ++e)
    feats[e] = conv_encode(model.encoders[e], streams.planes[e], cache ? &cache->enc[e] : nullptr);
  if (cache) cache->enc_out = feats;

  std::vector<Vec> l1_in;
  if (cfg.variant == FusionVariant::early)
    l1_in.push_back(positionwise_concat(feats[0], feats[1]));
  else
    l1_in = feats;

  ImageContext ctx;
  for (size_t s = 0; s < model.l1.size(); ++s)
    ctx.ctx.push_back(linear_forward(model.l1[s], l1_in[s]));
  if (cache) {
    cache->l1_in = std::move(l1_in);
    cache->valid = true;
  }
  return ctx;
}

ImageContext encode_image(const CaptionModel& model, const Image& original) {
  return encode_streams(model, prepare_streams(model.cfg, original));
}

Vec context_feature(const CaptionModel&, const ImageContext& ctx) {
  if (ctx.ctx.empty()) throw ShapeError("model: empty image context");
  if (ctx.ctx.size() == 1) return ctx.ctx[0];
  return concat(ctx.ctx[0], ctx.ctx[1]);
}

DecoderState initial_state(const CaptionModel& model) {
  DecoderState st;
  for (size_t s = 0; s < model.lstm.size(); ++s)
    st.streams.push_back({Vec::Zero(model.cfg.hidden_dim), Vec::Zero(model.cfg.hidden_dim)});
  return st;
}

StepResult model_step(const CaptionModel& model, const ImageContext& ctx, int prev_token,
                      const DecoderState& state) {
  if (ctx.ctx.size() != model.l1.size() || state.streams.size() != model.lstm.size())
    throw ShapeError("model: context/state stream count mismatch");
  StepResult out;
  Vec l3_in;
  for (size_t s = 0; s < model.lstm.size(); ++s) {
    const Vec x = embedding_lookup(model.embed[s], prev_token);
    LstmState next =
        lstm_step(model.lstm[s], x, state.streams[s].h, state.streams[s].c);
    const Vec z = concat(ctx.ctx[s], next.h);
    const Vec l2_out = linear_forward(model.l2[s], z);
    l3_in = s == 0 ? l2_out : concat(l3_in, l2_out);
    out.state.streams.push_back(std::move(next));
  }
  out.probs = softmax(linear_forward(model.l3, l3_in));
  return out;
}

namespace {

// Everything one decode step must retain for backprop, per decoder stream.
struct StepCache {
  int input_token = 0;
  int target_token = 0;
  std::vector<LstmCache> lstm;
  std::vector<Vec> z;
  std::vector<Vec> l2_out;
  Vec l3_in;
  Vec probs;
};

long true_length(const std::vector<int>& tokens) {
  for (size_t t = 0; t < tokens.size(); ++t)
    if (tokens[t] == Vocab::kPad) return static_cast<long>(t);
  return static_cast<long>(tokens.size());
}

SampleStats run_caption(const CaptionModel& model, const PreparedImage& streams,
                        const std::vector<int>& tokens, CaptionModel* grads) {
  if (tokens.empty()) throw DataError("model: empty token sequence");
  const ModelConfig& cfg = model.cfg;
  const int n_streams = cfg.num_decoder_streams();
  const long T = true_length(tokens);
  if (T == 0) throw DataError("model: caption is all padding");

  EncodeCache enc_cache;
  const ImageContext ctx = encode_streams(model, streams, grads ? &enc_cache : nullptr);

  std::vector<StepCache> steps;
  steps.reserve(grads ? static_cast<size_t>(T) : 0);
  std::vector<LstmState> state;
  for (int s = 0; s < n_streams; ++s)
    state.push_back({Vec::Zero(cfg.hidden_dim), Vec::Zero(cfg.hidden_dim)});

  SampleStats stats;
  for (long t = 0; t < T; ++t) {
    StepCache sc;
    sc.input_token = t == 0 ? Vocab::kStart : tokens[static_cast<size_t>(t - 1)];
    sc.target_token = tokens[static_cast<size_t>(t)];
    sc.lstm.resize(static_cast<size_t>(n_streams));
    for (int s = 0; s < n_streams; ++s) {
      const Vec x = embedding_lookup(model.embed[s], sc.input_token);
      LstmState next = lstm_step(model.lstm[s], x, state[s].h, state[s].c,
                                 grads ? &sc.lstm[static_cast<size_t>(s)] : nullptr);
      Vec z = concat(ctx.ctx[static_cast<size_t>(s)], next.h);
      Vec l2_out = linear_forward(model.l2[s], z);
      sc.l3_in = s == 0 ? l2_out : concat(sc.l3_in, l2_out);
      if (grads) {
        sc.z.push_back(std::move(z));
        sc.l2_out.push_back(std::move(l2_out));
      }
      state[s] = std::move(next);
    }
    sc.probs = softmax(linear_forward(model.l3, sc.l3_in));

    stats.loss_sum += cross_entropy(sc.probs, sc.target_token);
    stats.tokens += 1;
    Eigen::Index argmax = 0;
    sc.probs.maxCoeff(&argmax);
    if (static_cast<int>(argmax) == sc.target_token) stats.correct += 1;
    if (grads) steps.push_back(std::move(sc));
  }
  if (!grads) return stats;

  // Backward through time.
  std::vector<Vec> dctx(static_cast<size_t>(n_streams));
  std::vector<Vec> dh_next(static_cast<size_t>(n_streams));
  std::vector<Vec> dc_next(static_cast<size_t>(n_streams));
  for (int s = 0; s < n_streams; ++s) {
    dctx[s] = Vec::Zero(cfg.l1_out);
    dh_next[s] = Vec::Zero(cfg.hidden_dim);
    dc_next[s] = Vec::Zero(cfg.hidden_dim);
  }
  for (long t = T - 1; t >= 0; --t) {
    StepCache& sc = steps[static_cast<size_t>(t)];
    const Vec dlogits = cross_entropy_backward(sc.probs, sc.target_token);
    const Vec dl3_in = linear_backward(model.l3, sc.l3_in, dlogits, grads->l3);
    for (int s = 0; s < n_streams; ++s) {
      const Vec dl2_out = n_streams == 1
                              ? dl3_in
                              : Vec(dl3_in.segment(static_cast<long>(s) * cfg.l2_out, cfg.l2_out));
      const Vec dz = linear_backward(model.l2[s], sc.z[static_cast<size_t>(s)], dl2_out,
                                     grads->l2[static_cast<size_t>(s)]);
      dctx[s] += dz.head(cfg.l1_out);
      const Vec dh_total = dz.tail(cfg.hidden_dim) + dh_next[s];
      const LstmInputGrads g =
          lstm_backward(model.lstm[s], sc.lstm[static_cast<size_t>(s)], dh_total, dc_next[s],
                        grads->lstm[static_cast<size_t>(s)]);
      embedding_backward(sc.input_token, g.dx, grads->embed[static_cast<size_t>(s)]);
      dh_next[s] = g.dh;
      dc_next[s] = g.dc;
    }
  }

  // Context and encoder gradients.
  std::vector<Vec> dl1_in(static_cast<size_t>(n_streams));
  for (int s = 0; s < n_streams; ++s)
    dl1_in[s] = linear_backward(model.l1[s], enc_cache.l1_in[static_cast<size_t>(s)], dctx[s],
                                grads->l1[static_cast<size_t>(s)]);
  if (cfg.variant == FusionVariant::early) {
    Vec d0, d1;
    split_positionwise(dl1_in[0], d0, d1);
    conv_encode_backward(model.encoders[0], enc_cache.enc[0], d0, grads->encoders[0]);
    conv_encode_backward(model.encoders[1], enc_cache.enc[1], d1, grads->encoders[1]);
  } else {
    for (size_t e = 0; e < model.encoders.size(); ++e)
      conv_encode_backward(model.encoders[e], enc_cache.enc[e], dl1_in[e], grads->encoders[e]);
  }
  return stats;
}

}  // namespace

SampleStats caption_forward(const CaptionModel& model, const PreparedImage& streams,
                            const std::vector<int>& tokens) {
  return run_caption(model, streams, tokens, nullptr);
}

SampleStats caption_loss_and_grad(const CaptionModel& model, const PreparedImage& streams,
                                  const std::vector<int>& tokens, CaptionModel& grads) {
  return run_caption(model, streams, tokens, &grads);
}

std::vector<TrainItem> make_train_items(const CaptionModel& model, const Dataset& dataset,
                                        Split split) {
  std::vector<TrainItem> items;
  for (const DatasetItem* d : split_view(dataset, split)) {
    const Image img = load_netpbm(read_file_bytes(dataset.root / d->filename));
    auto prepared = std::make_shared<PreparedImage>(prepare_streams(model.cfg, img));
    for (const std::string& raw : d->captions)
      items.push_back({prepared, encode_caption(model.vocab, raw, model.cfg.max_caption_len)});
  }
  return items;
}

SampleStats evaluate_teacher_forced(const CaptionModel& model,
                                    const std::vector<TrainItem>& items) {
  SampleStats total;
  for (const TrainItem& item : items) {
    const SampleStats s = caption_forward(model, *item.streams, item.tokens);
    total.loss_sum += s.loss_sum;
    total.tokens += s.tokens;
    total.correct += s.correct;
  }
  return total;
}

TrainingLog train_model(CaptionModel& model, const std::vector<TrainItem>& items,
                        std::ostream* progress) {
  if (items.empty()) throw DataError("train: no training items");
  const TrainHyper& hyper = model.cfg.train;

  TrainingLog log;
  {
    const SampleStats s0 = evaluate_teacher_forced(model, items);
    log.initial_loss = s0.loss_sum / static_cast<double>(s0.tokens);
  }

  std::vector<ParamView> params = model.param_views();
  CaptionModel grad_model = zero_like(model);
  std::vector<ParamView> grads = grad_model.param_views();
  AdamState opt(params, hyper.adam);
  Rng shuffle_rng = Rng(model.cfg.seed).fork(0x747261696eULL);

  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), size_t{0});

  bool done = false;
  for (int epoch = 0; epoch < hyper.epochs && !done; ++epoch) {
    if (hyper.shuffle) {
      for (size_t i = order.size() - 1; i > 0; --i) {
        const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(static_cast<int>(i + 1)));
        std::swap(order[i], order[j]);
      }
    }
    SampleStats epoch_stats;
    for (size_t begin = 0; begin < order.size() && !done; begin += hyper.batch_size) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(hyper.batch_size));
      zero_params(grad_model);
      SampleStats batch;
      for (size_t i = begin; i < end; ++i) {
        const TrainItem& item = items[order[i]];
        const SampleStats s = caption_loss_and_grad(model, *item.streams, item.tokens, grad_model);
        batch.loss_sum += s.loss_sum;
        batch.tokens += s.tokens;
        batch.correct += s.correct;
      }
      scale_params(grad_model, 1.0 / static_cast<double>(batch.tokens));
      opt.step(params, grads);
      log.total_steps += 1;
      epoch_stats.loss_sum += batch.loss_sum;
      epoch_stats.tokens += batch.tokens;
      epoch_stats.correct += batch.correct;
      if (hyper.max_steps > 0 && log.total_steps >= hyper.max_steps) done = true;
    }
    EpochStats es;
    es.epoch = epoch + 1;
    es.loss = epoch_stats.loss_sum / static_cast<double>(epoch_stats.tokens);
    es.accuracy = static_cast<double>(epoch_stats.correct) / static_cast<double>(epoch_stats.tokens);
    es.steps = log.total_steps;
    log.epochs.push_back(es);
    if (progress)
      *progress << "epoch " << es.epoch << " loss " << es.loss << " acc " << es.accuracy
                << " steps " << es.steps << "\n";
    if (hyper.stop_accuracy > 0.0 && es.accuracy >= hyper.stop_accuracy) done = true;
  }

  const SampleStats sf = evaluate_teacher_forced(model, items);
  log.final_loss = sf.loss_sum / static_cast<double>(sf.tokens);
  return log;
}

}  // namespace edgecap
