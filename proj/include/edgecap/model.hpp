#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "edgecap/conv_encoder.hpp"
#include "edgecap/dataset.hpp"
#include "edgecap/image.hpp"
#include "edgecap/nn.hpp"

namespace edgecap {

enum class FusionVariant { single, early, late };

FusionVariant fusion_from_string(const std::string& name);
std::string to_string(FusionVariant v);

struct TrainHyper {
  int epochs = 30;
  int batch_size = 16;
  AdamConfig adam;
  long max_steps = 0;         // 0 = no cap on optimizer steps
  double stop_accuracy = 0.0;  // stop once teacher-forced accuracy reaches this (0 = off)
  bool shuffle = true;
};

struct ModelConfig {
  FusionVariant variant = FusionVariant::early;
  EdgeDetector edge = EdgeDetector::laplacian;
  EdgeParams edge_params;
  int input_size = 64;
  std::vector<int> conv_channels = {16, 32, 64};
  int feature_dim = 128;
  int l1_out = 256;
  int embed_dim = 256;
  int hidden_dim = 256;
  int l2_out = 256;
  int max_caption_len = 20;
  std::uint64_t seed = 1;
  TrainHyper train;

  // Throws ConfigError on inconsistent settings.
  void validate() const;

  int num_encoders() const { return variant == FusionVariant::single ? 1 : 2; }
  int num_decoder_streams() const { return variant == FusionVariant::late ? 2 : 1; }
  // Fused feature width entering L1 for one decoder stream.
  int l1_in() const { return variant == FusionVariant::early ? 2 * feature_dim : feature_dim; }
  int l2_in() const { return l1_out + hidden_dim; }
  int l3_in() const { return num_decoder_streams() * l2_out; }
};

// Encoder(s) + per-stream decoder path (L1, embedding X, LSTM D, L2) + the
// shared output projection L3. Early fusion interleaves the two encoder
// features before the single decoder path; late fusion runs two full paths
// and joins them at L3.
struct CaptionModel {
  ModelConfig cfg;
  Vocab vocab;
  std::vector<ConvEncoderParams> encoders;  // e1 (+ e2 for early/late)
  std::vector<LinearParams> l1;             // one per decoder stream
  std::vector<EmbeddingParams> embed;
  std::vector<LstmParams> lstm;
  std::vector<LinearParams> l2;
  LinearParams l3;

  // Stable traversal: e1, e2, s1.{l1,embed,lstm,l2}, s2..., l3. Checkpoint
  // record order and optimizer state layout both follow it.
  std::vector<ParamView> param_views();
};

CaptionModel build_model(const ModelConfig& cfg, const Vocab& vocab);

// Same shapes, all parameters zero: gradient accumulator.
CaptionModel zero_like(const CaptionModel& model);
void zero_params(CaptionModel& model);
void scale_params(CaptionModel& model, double factor);

// Encoder input planes, one matrix per encoder (original first, edge-aware
// companion second). Resample to cfg.input_size happens here, so results can
// be cached per image across training epochs.
struct PreparedImage {
  std::vector<Mat> planes;
};

PreparedImage prepare_streams(const ModelConfig& cfg, const Image& original);

// Per-stream L1 outputs, computed once per image and fed into every decode
// step.
struct ImageContext {
  std::vector<Vec> ctx;
};

struct EncodeCache {
  std::vector<ConvEncoderCache> enc;
  std::vector<Vec> enc_out;
  std::vector<Vec> l1_in;
  bool valid = false;
};

ImageContext encode_streams(const CaptionModel& model, const PreparedImage& streams,
                            EncodeCache* cache = nullptr);
ImageContext encode_image(const CaptionModel& model, const Image& original);

// Retrieval feature for an image: the context vector, streams concatenated
// for the late variant.
Vec context_feature(const CaptionModel& model, const ImageContext& ctx);

struct DecoderState {
  std::vector<LstmState> streams;
};

DecoderState initial_state(const CaptionModel& model);

struct StepResult {
  Vec probs;
  DecoderState state;
};

// One decode step: h' = D(X(prev), state); probs = softmax(L3(L2(ctx (+) h')))
// with per-stream L2 outputs concatenated for the late variant.
StepResult model_step(const CaptionModel& model, const ImageContext& ctx, int prev_token,
                      const DecoderState& state);

struct SampleStats {
  double loss_sum = 0.0;  // summed cross-entropy over non-pad positions
  long tokens = 0;
  long correct = 0;
};

// Teacher-forced forward pass over one encoded caption (<end>-terminated,
// <pad>-padded token ids).
SampleStats caption_forward(const CaptionModel& model, const PreparedImage& streams,
                            const std::vector<int>& tokens);

// Forward + backward; accumulates d(loss_sum)/d(params) into `grads`.
SampleStats caption_loss_and_grad(const CaptionModel& model, const PreparedImage& streams,
                                  const std::vector<int>& tokens, CaptionModel& grads);

struct TrainItem {
  std::shared_ptr<const PreparedImage> streams;  // shared across captions of one image
  std::vector<int> tokens;
};

// One TrainItem per (image, caption) pair, captions encoded against
// model.vocab and images prepared against model.cfg.
std::vector<TrainItem> make_train_items(const CaptionModel& model, const Dataset& dataset,
                                        Split split);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;      // running mean over the epoch's pre-update batch passes
  double accuracy = 0.0;  // running teacher-forced token accuracy, same passes
  long steps = 0;         // cumulative optimizer steps
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  double initial_loss = 0.0;  // dedicated pass before any update
  double final_loss = 0.0;    // dedicated pass after the last update
  long total_steps = 0;
};

// Mini-batch Adam with deterministic shuffling (model seed). Optional
// `progress` receives one line per epoch.
TrainingLog train_model(CaptionModel& model, const std::vector<TrainItem>& items,
                        std::ostream* progress = nullptr);

SampleStats evaluate_teacher_forced(const CaptionModel& model,
                                    const std::vector<TrainItem>& items);

}  // namespace edgecap
