#include "edgecap/dataset.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "edgecap/io_util.hpp"

namespace edgecap {

using nlohmann::json;

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ParameterError("dataset: unknown split \"" + name + "\"");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw ParameterError("dataset: invalid split value");
}

Dataset load_dataset_json(const std::filesystem::path& path) {
  const std::string text = read_file_text(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError("dataset: " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array())
    throw FormatError("dataset: " + path.string() + ": missing \"images\" array");

  Dataset out;
  out.root = path.parent_path();
  const json& images = doc["images"];
  for (size_t i = 0; i < images.size(); ++i) {
    const json& entry = images[i];
    const std::string where = "images[" + std::to_string(i) + "]";
    if (!entry.is_object())
      throw FormatError("dataset: " + where + " is not an object");
    DatasetItem item;
    if (!entry.contains("filename") || !entry["filename"].is_string())
      throw FormatError("dataset: " + where + ".filename missing or not a string");
    item.filename = entry["filename"].get<std::string>();
    if (!entry.contains("split") || !entry["split"].is_string())
      throw FormatError("dataset: " + where + ".split missing or not a string");
    try {
      item.split = split_from_string(entry["split"].get<std::string>());
    } catch (const ParameterError&) {
      throw FormatError("dataset: " + where + ".split has unknown value \"" +
                        entry["split"].get<std::string>() + "\"");
    }
    if (!entry.contains("sentences") || !entry["sentences"].is_array())
      throw FormatError("dataset: " + where + ".sentences missing or not an array");
    const json& sentences = entry["sentences"];
    for (size_t s = 0; s < sentences.size(); ++s) {
      const json& sent = sentences[s];
      if (!sent.is_object() || !sent.contains("raw") || !sent["raw"].is_string())
        throw FormatError("dataset: " + where + ".sentences[" + std::to_string(s) +
                          "].raw missing or not a string");
      item.captions.push_back(sent["raw"].get<std::string>());
    }
    if (item.captions.empty())
      throw FormatError("dataset: " + where + " has no sentences");
    out.items.push_back(std::move(item));
  }
  return out;
}

void write_dataset_json(const Dataset& dataset, const std::filesystem::path& path) {
  json images = json::array();
  for (const DatasetItem& item : dataset.items) {
    json sentences = json::array();
    for (const std::string& raw : item.captions) sentences.push_back({{"raw", raw}});
    images.push_back({{"filename", item.filename},
                      {"split", to_string(item.split)},
                      {"sentences", std::move(sentences)}});
  }
  json doc{{"images", std::move(images)}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

Vocab Vocab::with_specials() {
  Vocab v;
  v.tokens = {"<pad>", "<start>", "<end>", "<unk>"};
  for (int i = 0; i < static_cast<int>(v.tokens.size()); ++i) v.index[v.tokens[i]] = i;
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  static const std::vector<std::string> kSpecials = {"<pad>", "<start>", "<end>", "<unk>"};
  if (tokens.size() < kSpecials.size())
    throw ParameterError("vocab: token list shorter than the special-token prefix");
  for (size_t i = 0; i < kSpecials.size(); ++i)
    if (tokens[i] != kSpecials[i])
      throw ParameterError("vocab: token " + std::to_string(i) + " must be " + kSpecials[i] +
                           ", got \"" + tokens[i] + "\"");
  for (const std::string& t : tokens) v.add(t);
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size())
    throw IndexError("vocab: token id " + std::to_string(id) + " out of range [0, " +
                     std::to_string(size()) + ")");
  return tokens[static_cast<size_t>(id)];
}

void Vocab::add(const std::string& token) {
  if (index.count(token))
    throw ParameterError("vocab: duplicate token \"" + token + "\"");
  index[token] = size();
  tokens.push_back(token);
}

Vocab build_vocab(const Dataset& dataset, int min_count) {
  if (min_count < 1) throw ParameterError("vocab: min_count must be >= 1");
  std::unordered_map<std::string, long> counts;
  long train_items = 0;
  for (const DatasetItem& item : dataset.items) {
    if (item.split != Split::train) continue;
    ++train_items;
    for (const std::string& raw : item.captions)
      for (const std::string& tok : tokenize(raw)) ++counts[tok];
  }
  if (train_items == 0) throw DataError("vocab: dataset has no train split to build from");
  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v = Vocab::with_specials();
  for (const auto& [tok, n] : kept) v.add(tok);
  return v;
}

std::vector<const DatasetItem*> split_view(const Dataset& dataset, Split split) {
  std::vector<const DatasetItem*> out;
  for (const DatasetItem& item : dataset.items)
    if (item.split == split) out.push_back(&item);
  return out;
}

std::vector<int> encode_caption(const Vocab& vocab, const std::string& raw, int max_len) {
  if (max_len < 1) throw ParameterError("encode_caption: max_len must be >= 1");
  const TokenSeq words = tokenize(raw);
  if (static_cast<int>(words.size()) + 1 > max_len)
    throw DataError("encode_caption: caption needs " + std::to_string(words.size() + 1) +
                    " slots but max_len is " + std::to_string(max_len) + ": \"" + raw + "\"");
  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(max_len));
  for (const std::string& w : words) ids.push_back(vocab.id(w));
  ids.push_back(Vocab::kEnd);
  while (static_cast<int>(ids.size()) < max_len) ids.push_back(Vocab::kPad);
  return ids;
}

TokenSeq decode_tokens(const Vocab& vocab, const std::vector<int>& ids) {
  TokenSeq out;
  for (int id : ids) {
    if (id == Vocab::kEnd) break;
    if (id == Vocab::kPad || id == Vocab::kStart || id == Vocab::kUnk) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

}  // namespace edgecap
