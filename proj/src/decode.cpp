#include "edgecap/decode.hpp"

#include <cmath>
#include <map>

#include "edgecap/io_util.hpp"
#include "edgecap/metrics.hpp"
#include "edgecap/netpbm.hpp"

namespace edgecap {

Hypothesis greedy_decode(const CaptionModel& model, const ImageContext& ctx, int max_len) {
  return greedy_decode_with(ModelStepper(model, ctx), max_len);
}

std::vector<Hypothesis> beam_search(const CaptionModel& model, const ImageContext& ctx,
                                    int beam_width, int max_len, double alpha) {
  return beam_search_with(ModelStepper(model, ctx), beam_width, max_len, alpha);
}

Archive build_archive(const CaptionModel& model, const Dataset& dataset, Split split) {
  Archive archive;
  for (const DatasetItem* item : split_view(dataset, split)) {
    const Image img = load_netpbm(read_file_bytes(dataset.root / item->filename));
    const ImageContext ctx = encode_image(model, img);
    ArchiveEntry entry;
    entry.source = item->filename;
    entry.feature = context_feature(model, ctx);
    for (const std::string& raw : item->captions) {
      std::vector<int> ids;
      for (const std::string& tok : tokenize(raw)) ids.push_back(model.vocab.id(tok));
      entry.captions.push_back(std::move(ids));
    }
    archive.entries.push_back(std::move(entry));
  }
  if (!archive.entries.empty())
    archive.feature_dim = static_cast<int>(archive.entries[0].feature.size());
  for (const ArchiveEntry& e : archive.entries) {
    if (static_cast<int>(e.feature.size()) != archive.feature_dim)
      throw ShapeError("archive: inconsistent feature dimensions");
    if (e.captions.empty()) throw DataError("archive: entry \"" + e.source + "\" has no captions");
  }
  return archive;
}

std::vector<KnnHit> knn_retrieve(const Archive& archive, const Vec& query, int k) {
  if (k < 0) throw ParameterError("knn_retrieve: k must be >= 0");
  if (k > static_cast<int>(archive.entries.size()))
    throw ParameterError("knn_retrieve: k = " + std::to_string(k) + " exceeds archive size " +
                         std::to_string(archive.entries.size()));
  std::vector<KnnHit> hits;
  const double qn = query.norm();
  for (size_t i = 0; i < archive.entries.size(); ++i) {
    const Vec& f = archive.entries[i].feature;
    if (f.size() != query.size())
      throw ShapeError("knn_retrieve: query dimension " + std::to_string(query.size()) +
                       " does not match archive dimension " + std::to_string(f.size()));
    const double fn = f.norm();
    const double sim = qn == 0.0 || fn == 0.0 ? 0.0 : query.dot(f) / (qn * fn);
    hits.push_back({static_cast<int>(i), sim});
  }
  std::sort(hits.begin(), hits.end(), [](const KnnHit& a, const KnnHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.index < b.index;
  });
  hits.resize(static_cast<size_t>(k));
  return hits;
}

ConsensusMetric consensus_metric_from_string(const std::string& name) {
  if (name == "bleu2") return ConsensusMetric::bleu2;
  if (name == "cider") return ConsensusMetric::cider;
  throw ParameterError("consensus: unknown metric \"" + name + "\"");
}

std::string to_string(ConsensusMetric m) {
  switch (m) {
    case ConsensusMetric::bleu2: return "bleu2";
    case ConsensusMetric::cider: return "cider";
  }
  throw ParameterError("consensus: invalid metric value");
}

namespace {

TokenSeq ids_to_words(const std::vector<int>& ids) {
  TokenSeq out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(std::to_string(id));
  return out;
}

// tf-weighted CIDEr-style pair similarity (idf is degenerate for a single
// candidate/reference pair): mean over n of clipped cosine with the Gaussian
// length penalty, x10.
double cider_pair(const std::vector<int>& cand, const std::vector<int>& ref) {
  constexpr int kMaxN = 4;
  constexpr double kSigma = 6.0;
  double total = 0.0;
  for (int n = 1; n <= kMaxN; ++n) {
    std::map<std::vector<int>, double> c_tf, r_tf;
    for (size_t i = 0; i + n <= cand.size(); ++i)
      c_tf[std::vector<int>(cand.begin() + i, cand.begin() + i + n)] += 1.0;
    for (size_t i = 0; i + n <= ref.size(); ++i)
      r_tf[std::vector<int>(ref.begin() + i, ref.begin() + i + n)] += 1.0;
    double dot = 0.0, cn = 0.0, rn = 0.0;
    for (const auto& [gram, w] : c_tf) cn += w * w;
    for (const auto& [gram, w] : r_tf) rn += w * w;
    for (const auto& [gram, w] : c_tf) {
      const auto it = r_tf.find(gram);
      if (it != r_tf.end()) dot += std::min(w, it->second) * it->second;
    }
    const double denom = std::sqrt(cn) * std::sqrt(rn);
    const double cos = denom == 0.0 ? 0.0 : dot / denom;
    const double delta = static_cast<double>(cand.size()) - static_cast<double>(ref.size());
    total += std::exp(-delta * delta / (2.0 * kSigma * kSigma)) * cos;
  }
  return 10.0 * total / kMaxN;
}

}  // namespace

double consensus_score(const std::vector<int>& candidate,
                       const std::vector<std::vector<int>>& references, ConsensusMetric metric) {
  if (references.empty()) throw ParameterError("consensus_score: references must be nonempty");
  const TokenSeq cand_words = ids_to_words(candidate);
  double sum = 0.0;
  for (const std::vector<int>& ref : references) {
    if (metric == ConsensusMetric::bleu2) {
      // Per-reference scores floor at the smoothing constant: a pair sharing
      // no tokens contributes exactly that floor whatever its lengths, so
      // "identical + disjoint" averages stay length-independent.
      sum += std::max(bleu_sentence_smoothed(cand_words, {ids_to_words(ref)}, 2), kBleuSmoothEps);
    } else {
      sum += cider_pair(candidate, ref);
    }
  }
  return sum / static_cast<double>(references.size());
}

std::vector<int> strip_specials(const std::vector<int>& tokens) {
  std::vector<int> out;
  for (int id : tokens) {
    if (id == Vocab::kEnd) break;
    if (id == Vocab::kPad || id == Vocab::kStart || id == Vocab::kUnk) continue;
    out.push_back(id);
  }
  return out;
}

Hypothesis cbbs_decode(const CaptionModel& model, const ImageContext& ctx, const Archive& archive,
                       const CbbsConfig& cfg) {
  const int max_len = cfg.max_len > 0 ? cfg.max_len : model.cfg.max_caption_len;
  std::vector<Hypothesis> candidates = beam_search(model, ctx, cfg.beam_width, max_len, cfg.alpha);
  if (candidates.empty()) throw ContractViolation("cbbs: beam search returned no hypotheses");
  const int k = std::min<int>(cfg.k, static_cast<int>(archive.entries.size()));
  if (k <= 0) return candidates[0];

  const Vec query = context_feature(model, ctx);
  std::vector<std::vector<int>> references;
  for (const KnnHit& hit : knn_retrieve(archive, query, k))
    for (const std::vector<int>& cap : archive.entries[static_cast<size_t>(hit.index)].captions)
      references.push_back(cap);

  // Candidates arrive ordered by (beam score, lexicographic); keeping only
  // strictly better consensus scores realizes the declared tie-break.
  size_t best = 0;
  double best_score = -1.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const double s = consensus_score(strip_specials(candidates[i].tokens), references, cfg.metric);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return candidates[best];
}

std::string caption_text(const Vocab& vocab, const Hypothesis& hyp) {
  TokenSeq words;
  for (int id : strip_specials(hyp.tokens)) words.push_back(vocab.token(id));
  return join_tokens(words);
}

}  // namespace edgecap
