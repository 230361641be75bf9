#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "edgecap/errors.hpp"
#include "edgecap/metrics.hpp"

namespace edgecap {

enum class Split { train, val, test };

Split split_from_string(const std::string& name);
std::string to_string(Split split);

struct DatasetItem {
  std::string filename;  // relative to Dataset::root
  Split split = Split::train;
  std::vector<std::string> captions;  // raw sentences
};

struct Dataset {
  std::filesystem::path root;
  std::vector<DatasetItem> items;
};

// Expects {"images":[{"filename","split","sentences":[{"raw"}...]}...]};
// schema violations raise FormatError naming the JSON path.
Dataset load_dataset_json(const std::filesystem::path& path);
void write_dataset_json(const Dataset& dataset, const std::filesystem::path& path);

// Token/index bijection with pinned special tokens.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnk = 3;

  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  static Vocab with_specials();
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens.size()); }
  // <unk> for out-of-vocabulary words.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  void add(const std::string& token);
};

// Vocabulary from the train split only: tokens with frequency >= min_count,
// ordered by (descending count, ascending lexicographic) after the specials.
Vocab build_vocab(const Dataset& dataset, int min_count = 2);

std::vector<const DatasetItem*> split_view(const Dataset& dataset, Split split);

// Token ids for one caption: tokenized words (plus <end>), padded with <pad>
// to max_len. Raises DataError when the caption does not fit.
std::vector<int> encode_caption(const Vocab& vocab, const std::string& raw, int max_len);

// Words for decoded token ids, stopping at <end> and skipping specials.
TokenSeq decode_tokens(const Vocab& vocab, const std::vector<int>& ids);

}  // namespace edgecap
