#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgecap/errors.hpp"

namespace edgecap {

using TokenSeq = std::vector<std::string>;
using RefSet = std::vector<TokenSeq>;

// Lowercase, strip non-alphanumerics except intra-word hyphens, split on
// whitespace, drop empties. Idempotent.
TokenSeq tokenize(std::string_view raw);
std::string join_tokens(const TokenSeq& tokens);

// Seven-metric row in the conventional captioning column order.
struct EvalReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double meteor = 0, rouge_l = 0, cider = 0;
};

inline constexpr const char* kReportColumns[7] = {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4",
                                                  "METEOR", "ROUGE-L", "CIDEr"};

// Numerator substituted for zero clipped counts in smoothed sentence BLEU.
inline constexpr double kBleuSmoothEps = 0.1;

// Corpus BLEU-1..max_n: clipped counts summed over the corpus, brevity
// penalty from per-sentence closest reference lengths, geometric mean of
// p_1..p_k. Any p_n = 0 zeroes BLEU-k for k >= n.
std::array<double, 4> bleu_corpus(const std::vector<TokenSeq>& cands,
                                  const std::vector<RefSet>& refs, int max_n = 4);

// Sentence BLEU-n with add-eps smoothing; in (0, 1] for nonempty candidates.
double bleu_sentence_smoothed(const TokenSeq& cand, const RefSet& refs, int n = 2);

// Mean over sentences of the best-reference LCS F-beta score.
double rouge_l(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs,
               double beta = 1.2);

// CIDEr-D: per-n TF-IDF vectors (one document per image's reference set),
// clipped cosine with a Gaussian length penalty, averaged over n and
// references, scaled by 10. Mean over images.
double cider_d(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs, int max_n = 4,
               double sigma = 6.0);

// Exact-match METEOR variant: greedy unigram alignment, harmonic F with
// recall weight 0.9, chunk penalty 0.5*(chunks/m)^3, best reference by
// score. No stemming or synonym resources, so values are not comparable to
// METEOR scores computed with the full resource stack.
double meteor_lite(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs);

EvalReport evaluate_all(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs);

// Table emission. A row with no report renders as FAILED.
using ReportRow = std::pair<std::string, std::optional<EvalReport>>;
std::string report_csv(const std::vector<ReportRow>& rows);
// Markdown table; per-column maxima are bolded when mark_maxima is set.
std::string report_markdown(const std::vector<ReportRow>& rows, bool mark_maxima = true);

}  // namespace edgecap
