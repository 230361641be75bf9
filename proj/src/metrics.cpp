#include "edgecap/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

namespace edgecap {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// n-gram key: tokens joined with an unprintable separator.
using CountMap = std::unordered_map<std::string, int>;

CountMap ngram_counts(const TokenSeq& tokens, int n) {
  CountMap counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

void check_corpus(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs,
                  const char* op) {
  if (cands.empty() || cands.size() != refs.size()) {
    throw ParameterError(std::string(op) + ": corpus must be nonempty and aligned");
  }
  for (const RefSet& rs : refs) {
    if (rs.empty()) {
      throw ParameterError(std::string(op) + ": every reference set must be nonempty");
    }
  }
}

long lcs_length(const TokenSeq& a, const TokenSeq& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0 || m == 0) return 0;
  std::vector<long> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

TokenSeq tokenize(std::string_view raw) {
  TokenSeq out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    // strip non-alphanumerics; keep hyphens with word characters on both sides
    std::string cleaned;
    for (std::size_t i = 0; i < word.size(); ++i) {
      const char c = word[i];
      if (is_word_char(c)) {
        cleaned += c;
      } else if (c == '-' && i > 0 && i + 1 < word.size() && is_word_char(word[i - 1]) &&
                 is_word_char(word[i + 1])) {
        cleaned += c;
      }
    }
    if (!cleaned.empty()) out.push_back(cleaned);
    word.clear();
  };
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::array<double, 4> bleu_corpus(const std::vector<TokenSeq>& cands,
                                  const std::vector<RefSet>& refs, int max_n) {
  check_corpus(cands, refs, "bleu_corpus");
  if (max_n < 1 || max_n > 4) {
    throw ParameterError("bleu_corpus: max_n must be in [1, 4]");
  }
  std::array<long, 4> clipped{0, 0, 0, 0};
  std::array<long, 4> total{0, 0, 0, 0};
  long cand_len = 0;
  long ref_len = 0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    const TokenSeq& cand = cands[s];
    cand_len += static_cast<long>(cand.size());
    // closest reference length; ties go to the shorter
    long best_ref = static_cast<long>(refs[s][0].size());
    for (const TokenSeq& ref : refs[s]) {
      const long len = static_cast<long>(ref.size());
      const long d_new = std::abs(len - static_cast<long>(cand.size()));
      const long d_old = std::abs(best_ref - static_cast<long>(cand.size()));
      if (d_new < d_old || (d_new == d_old && len < best_ref)) best_ref = len;
    }
    ref_len += best_ref;
    for (int n = 1; n <= max_n; ++n) {
      const CountMap cand_counts = ngram_counts(cand, n);
      CountMap max_ref_counts;
      for (const TokenSeq& ref : refs[s]) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) {
          max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
        }
      }
      for (const auto& [gram, count] : cand_counts) {
        const auto it = max_ref_counts.find(gram);
        clipped[n - 1] += std::min(count, it == max_ref_counts.end() ? 0 : it->second);
      }
      total[n - 1] += std::max<long>(0, static_cast<long>(cand.size()) - n + 1);
    }
  }
  const double bp = cand_len == 0 ? 0.0
                    : cand_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / cand_len);
  std::array<double, 4> bleu{0, 0, 0, 0};
  double log_sum = 0.0;
  bool dead = false;
  for (int n = 1; n <= max_n; ++n) {
    const double p = total[n - 1] > 0 ? static_cast<double>(clipped[n - 1]) / total[n - 1] : 0.0;
    if (p <= 0.0) dead = true;
    if (!dead) {
      log_sum += std::log(p);
      bleu[n - 1] = bp * std::exp(log_sum / n);
    }
  }
  return bleu;
}

double bleu_sentence_smoothed(const TokenSeq& cand, const RefSet& refs, int n) {
  if (refs.empty()) {
    throw ParameterError("bleu_sentence_smoothed: references must be nonempty");
  }
  if (n < 1) {
    throw ParameterError("bleu_sentence_smoothed: n must be >= 1");
  }
  if (cand.empty()) return 0.0;
  // Effective order caps at the candidate length so an identical single-token
  // pair scores 1.0 rather than paying the smoothing floor on orders it
  // cannot contain.
  const int n_eff = std::min(n, static_cast<int>(cand.size()));
  double log_sum = 0.0;
  for (int k = 1; k <= n_eff; ++k) {
    const CountMap cand_counts = ngram_counts(cand, k);
    CountMap max_ref_counts;
    for (const TokenSeq& ref : refs) {
      for (const auto& [gram, count] : ngram_counts(ref, k)) {
        max_ref_counts[gram] = std::max(max_ref_counts[gram], count);
      }
    }
    long clipped = 0;
    for (const auto& [gram, count] : cand_counts) {
      const auto it = max_ref_counts.find(gram);
      clipped += std::min(count, it == max_ref_counts.end() ? 0 : it->second);
    }
    const long total = std::max<long>(1, static_cast<long>(cand.size()) - k + 1);
    const double numer = clipped > 0 ? static_cast<double>(clipped) : kBleuSmoothEps;
    log_sum += std::log(numer / static_cast<double>(total));
  }
  // closest reference length for the brevity penalty
  long best_ref = static_cast<long>(refs[0].size());
  for (const TokenSeq& ref : refs) {
    const long len = static_cast<long>(ref.size());
    const long d_new = std::abs(len - static_cast<long>(cand.size()));
    const long d_old = std::abs(best_ref - static_cast<long>(cand.size()));
    if (d_new < d_old || (d_new == d_old && len < best_ref)) best_ref = len;
  }
  const double c = static_cast<double>(cand.size());
  const double bp = c >= static_cast<double>(best_ref) ? 1.0 : std::exp(1.0 - best_ref / c);
  return bp * std::exp(log_sum / n_eff);
}

double rouge_l(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs, double beta) {
  check_corpus(cands, refs, "rouge_l");
  const double b2 = beta * beta;
  double sum = 0.0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    double best = 0.0;
    for (const TokenSeq& ref : refs[s]) {
      if (cands[s].empty() || ref.empty()) continue;
      const double lcs = static_cast<double>(lcs_length(cands[s], ref));
      const double p = lcs / static_cast<double>(cands[s].size());
      const double r = lcs / static_cast<double>(ref.size());
      if (p <= 0.0 && r <= 0.0) continue;
      const double f = (1.0 + b2) * p * r / (r + b2 * p);
      best = std::max(best, f);
    }
    sum += best;
  }
  return sum / static_cast<double>(cands.size());
}

double cider_d(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs, int max_n,
               double sigma) {
  check_corpus(cands, refs, "cider_d");
  const std::size_t num_images = refs.size();

  // Document frequency: an n-gram counts once per image whose reference set
  // contains it.
  std::unordered_map<std::string, int> doc_freq[4];
  for (const RefSet& rs : refs) {
    for (int n = 1; n <= max_n; ++n) {
      std::unordered_set<std::string> seen;
      for (const TokenSeq& ref : rs) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) {
          seen.insert(gram);
        }
      }
      for (const std::string& gram : seen) {
        ++doc_freq[n - 1][gram];
      }
    }
  }
  const double log_images = std::log(static_cast<double>(num_images));
  auto idf = [&](int n, const std::string& gram) {
    const auto it = doc_freq[n - 1].find(gram);
    const double df = it == doc_freq[n - 1].end() ? 0.0 : static_cast<double>(it->second);
    return log_images - std::log(std::max(1.0, df));
  };

  struct TfIdf {
    std::unordered_map<std::string, double> weights[4];
    double norm[4] = {0, 0, 0, 0};
  };
  auto build = [&](const TokenSeq& tokens) {
    TfIdf v;
    for (int n = 1; n <= max_n; ++n) {
      for (const auto& [gram, count] : ngram_counts(tokens, n)) {
        const double w = count * idf(n, gram);
        v.weights[n - 1][gram] = w;
        v.norm[n - 1] += w * w;
      }
      v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
    }
    return v;
  };

  double corpus_sum = 0.0;
  for (std::size_t s = 0; s < num_images; ++s) {
    const TfIdf cand = build(cands[s]);
    const double cand_len = static_cast<double>(cands[s].size());
    double image_sum = 0.0;
    for (const TokenSeq& ref : refs[s]) {
      const TfIdf rv = build(ref);
      const double delta = cand_len - static_cast<double>(ref.size());
      const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
      for (int n = 1; n <= max_n; ++n) {
        double dot = 0.0;
        for (const auto& [gram, w] : cand.weights[n - 1]) {
          const auto it = rv.weights[n - 1].find(gram);
          if (it != rv.weights[n - 1].end()) {
            dot += std::min(w, it->second) * it->second;
          }
        }
        const double denom = cand.norm[n - 1] * rv.norm[n - 1];
        image_sum += denom > 0.0 ? penalty * dot / denom : 0.0;
      }
    }
    corpus_sum += 10.0 * image_sum / (static_cast<double>(max_n) * refs[s].size());
  }
  return corpus_sum / static_cast<double>(num_images);
}

double meteor_lite(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs) {
  check_corpus(cands, refs, "meteor_lite");
  double sum = 0.0;
  for (std::size_t s = 0; s < cands.size(); ++s) {
    double best = 0.0;
    for (const TokenSeq& ref : refs[s]) {
      // greedy left-to-right exact alignment, each reference token used once
      std::vector<bool> used(ref.size(), false);
      std::vector<long> match_ref;  // per matched candidate position, ref index
      std::vector<long> match_cand;
      for (std::size_t ci = 0; ci < cands[s].size(); ++ci) {
        for (std::size_t ri = 0; ri < ref.size(); ++ri) {
          if (!used[ri] && ref[ri] == cands[s][ci]) {
            used[ri] = true;
            match_cand.push_back(static_cast<long>(ci));
            match_ref.push_back(static_cast<long>(ri));
            break;
          }
        }
      }
      const double m = static_cast<double>(match_ref.size());
      if (m == 0.0) continue;
      long chunks = 1;
      for (std::size_t k = 1; k < match_ref.size(); ++k) {
        if (match_cand[k] != match_cand[k - 1] + 1 || match_ref[k] != match_ref[k - 1] + 1) {
          ++chunks;
        }
      }
      const double p = m / static_cast<double>(cands[s].size());
      const double r = m / static_cast<double>(ref.size());
      const double f = p * r / (0.9 * p + 0.1 * r);
      const double frag = static_cast<double>(chunks) / m;
      const double score = f * (1.0 - 0.5 * frag * frag * frag);
      best = std::max(best, score);
    }
    sum += best;
  }
  return sum / static_cast<double>(cands.size());
}

EvalReport evaluate_all(const std::vector<TokenSeq>& cands, const std::vector<RefSet>& refs) {
  EvalReport report;
  const auto bleu = bleu_corpus(cands, refs, 4);
  report.bleu1 = bleu[0];
  report.bleu2 = bleu[1];
  report.bleu3 = bleu[2];
  report.bleu4 = bleu[3];
  report.meteor = meteor_lite(cands, refs);
  report.rouge_l = rouge_l(cands, refs);
  report.cider = cider_d(cands, refs);
  return report;
}

namespace {

std::array<double, 7> report_values(const EvalReport& r) {
  return {r.bleu1, r.bleu2, r.bleu3, r.bleu4, r.meteor, r.rouge_l, r.cider};
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "label";
  for (const char* col : kReportColumns) {
    out += ',';
    out += col;
  }
  out += '\n';
  for (const auto& [label, report] : rows) {
    out += label;
    if (report.has_value()) {
      for (double v : report_values(*report)) {
        out += ',';
        out += format_value(v);
      }
    } else {
      for (int i = 0; i < 7; ++i) out += ",FAILED";
    }
    out += '\n';
  }
  return out;
}

std::string report_markdown(const std::vector<ReportRow>& rows, bool mark_maxima) {
  // column maxima over successful rows; ties all marked
  std::array<double, 7> maxima;
  maxima.fill(-1.0);
  if (mark_maxima) {
    for (const auto& [label, report] : rows) {
      if (!report.has_value()) continue;
      const auto values = report_values(*report);
      for (int i = 0; i < 7; ++i) maxima[i] = std::max(maxima[i], values[i]);
    }
  }
  std::string out = "| Label |";
  for (const char* col : kReportColumns) {
    out += ' ';
    out += col;
    out += " |";
  }
  out += "\n|---|";
  for (int i = 0; i < 7; ++i) out += "---|";
  out += '\n';
  for (const auto& [label, report] : rows) {
    out += "| " + label + " |";
    if (report.has_value()) {
      const auto values = report_values(*report);
      for (int i = 0; i < 7; ++i) {
        const std::string text = format_value(values[i]);
        const bool is_max = mark_maxima && values[i] >= maxima[i];
        out += ' ';
        out += is_max ? "**" + text + "**" : text;
        out += " |";
      }
    } else {
      for (int i = 0; i < 7; ++i) out += " FAILED |";
    }
    out += '\n';
  }
  return out;
}

}  // namespace edgecap
