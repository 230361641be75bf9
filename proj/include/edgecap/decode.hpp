#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "edgecap/dataset.hpp"
#include "edgecap/model.hpp"

namespace edgecap {

struct Hypothesis {
  std::vector<int> tokens;  // generated ids; includes the terminating <end>
  double log_prob = 0.0;
  bool finished = false;
};

// Length-normalized score used for beam ranking.
inline double hypothesis_score(const Hypothesis& h, double alpha) {
  const double len = static_cast<double>(std::max<size_t>(1, h.tokens.size()));
  return h.log_prob / std::pow(len, alpha);
}

// ---------------------------------------------------------------------------
// Generic decoding core. A Stepper supplies:
//   using State = ...;
//   State init() const;
//   std::pair<Vec, State> step(int prev_token, const State&) const;
// Token conventions follow Vocab: decoding starts from <start> and a
// hypothesis terminates on <end> or at max_len tokens.
// ---------------------------------------------------------------------------

template <typename Stepper>
Hypothesis greedy_decode_with(const Stepper& stepper, int max_len) {
  if (max_len < 1) throw ParameterError("greedy_decode: max_len must be >= 1");
  Hypothesis hyp;
  typename Stepper::State state = stepper.init();
  int prev = Vocab::kStart;
  for (int t = 0; t < max_len; ++t) {
    auto [probs, next] = stepper.step(prev, state);
    Eigen::Index best = 0;
    probs.maxCoeff(&best);  // first maximum = lowest token index on ties
    hyp.tokens.push_back(static_cast<int>(best));
    hyp.log_prob += std::log(probs[best]);
    state = std::move(next);
    prev = static_cast<int>(best);
    if (prev == Vocab::kEnd) break;
  }
  hyp.finished = true;
  return hyp;
}

namespace detail {

inline bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Ranking used both during expansion and for the final ordering: higher score
// first, then lexicographically smaller token sequence.
inline bool beam_order(const Hypothesis& a, const Hypothesis& b, double alpha) {
  const double sa = hypothesis_score(a, alpha);
  const double sb = hypothesis_score(b, alpha);
  if (sa != sb) return sa > sb;
  return lex_less(a.tokens, b.tokens);
}

}  // namespace detail

// Synchronous beam search. Each round expands every live hypothesis over the
// full vocabulary; finished hypotheses stay frozen in the pool and compete
// for the B slots. Score = log_prob / len^alpha.
template <typename Stepper>
std::vector<Hypothesis> beam_search_with(const Stepper& stepper, int beam_width, int max_len,
                                         double alpha) {
  if (beam_width < 1) throw ParameterError("beam_search: beam width must be >= 1");
  if (max_len < 1) throw ParameterError("beam_search: max_len must be >= 1");

  struct Item {
    Hypothesis hyp;
    typename Stepper::State state;
  };
  std::vector<Item> pool;
  pool.push_back({Hypothesis{}, stepper.init()});

  for (int t = 0; t < max_len; ++t) {
    bool any_live = false;
    std::vector<Item> candidates;
    for (Item& item : pool) {
      if (item.hyp.finished) {
        candidates.push_back(std::move(item));
        continue;
      }
      any_live = true;
      const int prev = item.hyp.tokens.empty() ? Vocab::kStart : item.hyp.tokens.back();
      auto [probs, next] = stepper.step(prev, item.state);
      for (int v = 0; v < static_cast<int>(probs.size()); ++v) {
        Item child;
        child.hyp = item.hyp;
        child.hyp.tokens.push_back(v);
        child.hyp.log_prob += std::log(probs[v]);
        child.hyp.finished = v == Vocab::kEnd || static_cast<int>(child.hyp.tokens.size()) == max_len;
        child.state = next;
        candidates.push_back(std::move(child));
      }
    }
    if (!any_live) {
      pool = std::move(candidates);
      break;
    }
    std::sort(candidates.begin(), candidates.end(), [alpha](const Item& a, const Item& b) {
      return detail::beam_order(a.hyp, b.hyp, alpha);
    });
    if (static_cast<int>(candidates.size()) > beam_width) candidates.resize(beam_width);
    pool = std::move(candidates);
  }

  std::vector<Hypothesis> out;
  for (Item& item : pool)
    if (item.hyp.finished) out.push_back(std::move(item.hyp));
  std::sort(out.begin(), out.end(), [alpha](const Hypothesis& a, const Hypothesis& b) {
    return detail::beam_order(a, b, alpha);
  });
  return out;
}

// Caption-model adapter for the generic core.
class ModelStepper {
 public:
  ModelStepper(const CaptionModel& model, const ImageContext& ctx) : model_(model), ctx_(ctx) {}

  using State = DecoderState;
  State init() const { return initial_state(model_); }
  std::pair<Vec, State> step(int prev, const State& state) const {
    StepResult r = model_step(model_, ctx_, prev, state);
    return {std::move(r.probs), std::move(r.state)};
  }

 private:
  const CaptionModel& model_;
  const ImageContext& ctx_;
};

Hypothesis greedy_decode(const CaptionModel& model, const ImageContext& ctx, int max_len);
std::vector<Hypothesis> beam_search(const CaptionModel& model, const ImageContext& ctx,
                                    int beam_width, int max_len, double alpha);

// ---------------------------------------------------------------------------
// KNN archive and comparison-based re-ranking
// ---------------------------------------------------------------------------

struct ArchiveEntry {
  std::string source;                     // dataset filename
  Vec feature;                            // context feature of the stored image
  std::vector<std::vector<int>> captions;  // gold captions as content token ids
};

struct Archive {
  int feature_dim = 0;
  std::vector<ArchiveEntry> entries;
};

// One entry per image of `split` (default: train).
Archive build_archive(const CaptionModel& model, const Dataset& dataset,
                      Split split = Split::train);

struct KnnHit {
  int index = 0;
  double similarity = 0.0;
};

// Top-k by cosine similarity, descending; ties by ascending entry index.
// Zero-vector similarity is 0.
std::vector<KnnHit> knn_retrieve(const Archive& archive, const Vec& query, int k);

enum class ConsensusMetric { bleu2, cider };

ConsensusMetric consensus_metric_from_string(const std::string& name);
std::string to_string(ConsensusMetric m);

// Mean over references of the per-reference sentence score (smoothed BLEU-2
// by default; tf-weighted CIDEr-style similarity selectable). BLEU-2 scores
// are floored at kBleuSmoothEps per reference, so a fully disjoint pair
// contributes exactly the floor no matter how long the sequences are.
double consensus_score(const std::vector<int>& candidate,
                       const std::vector<std::vector<int>>& references,
                       ConsensusMetric metric = ConsensusMetric::bleu2);

struct CbbsConfig {
  int beam_width = 5;
  int k = 5;
  double alpha = 0.7;
  ConsensusMetric metric = ConsensusMetric::bleu2;
  int max_len = 0;  // 0 = model's max caption length
};

// Beam search, then consensus re-ranking against the pooled gold captions of
// the query's k nearest archive neighbours. Falls back to the beam top-1
// when k = 0 or the archive is empty.
Hypothesis cbbs_decode(const CaptionModel& model, const ImageContext& ctx, const Archive& archive,
                       const CbbsConfig& cfg);

// Token ids with specials removed (decode output -> consensus/caption form).
std::vector<int> strip_specials(const std::vector<int>& tokens);

// Final detokenized caption text for a hypothesis.
std::string caption_text(const Vocab& vocab, const Hypothesis& hyp);

}  // namespace edgecap
