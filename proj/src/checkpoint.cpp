#include "edgecap/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "edgecap/io_util.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialized artifacts assume a little-endian host");

namespace edgecap {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[] = "JSSF1";
constexpr char kArchiveMagic[] = "JSSA1";
constexpr std::uint8_t kFormatVersion = 1;

class Writer {
 public:
  std::vector<std::uint8_t> take() { return std::move(buf_); }

  void magic(const char* m) { buf_.insert(buf_.end(), m, m + 5); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void f64_span(const double* data, long n) {
    const size_t at = buf_.size();
    buf_.resize(at + static_cast<size_t>(n) * 8);
    std::memcpy(buf_.data() + at, data, static_cast<size_t>(n) * 8);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void expect_magic(const char* m) {
    need(5);
    if (std::memcmp(bytes_.data() + at_, m, 5) != 0)
      throw PersistenceError(what_ + ": bad magic, expected \"" + std::string(m, 5) + "\"");
    at_ += 5;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[at_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[at_ + i]) << (8 * i);
    at_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[at_ + i]) << (8 * i);
    at_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void f64_span(double* out, long n) {
    need(static_cast<size_t>(n) * 8);
    std::memcpy(out, bytes_.data() + at_, static_cast<size_t>(n) * 8);
    at_ += static_cast<size_t>(n) * 8;
  }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + at_), len);
    at_ += len;
    return s;
  }
  void expect_done() const {
    if (at_ != bytes_.size())
      throw PersistenceError(what_ + ": " + std::to_string(bytes_.size() - at_) +
                             " trailing bytes");
  }

 private:
  void need(size_t n) const {
    if (at_ + n > bytes_.size())
      throw PersistenceError(what_ + ": truncated at byte " + std::to_string(at_));
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string what_;
  size_t at_ = 0;
};

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"variant", to_string(cfg.variant)},
              {"edge", to_string(cfg.edge)},
              {"canny_low_frac", cfg.edge_params.canny_low_frac},
              {"canny_high_frac", cfg.edge_params.canny_high_frac},
              {"input_size", cfg.input_size},
              {"conv_channels", cfg.conv_channels},
              {"feature_dim", cfg.feature_dim},
              {"l1_out", cfg.l1_out},
              {"embed_dim", cfg.embed_dim},
              {"hidden_dim", cfg.hidden_dim},
              {"l2_out", cfg.l2_out},
              {"max_caption_len", cfg.max_caption_len},
              {"seed", cfg.seed},
              {"train",
               {{"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"lr", cfg.train.adam.lr},
                {"beta1", cfg.train.adam.beta1},
                {"beta2", cfg.train.adam.beta2},
                {"eps", cfg.train.adam.eps},
                {"max_steps", cfg.train.max_steps},
                {"stop_accuracy", cfg.train.stop_accuracy},
                {"shuffle", cfg.train.shuffle}}}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  try {
    if (j.contains("variant")) cfg.variant = fusion_from_string(j.at("variant").get<std::string>());
    if (j.contains("edge")) cfg.edge = edge_detector_from_string(j.at("edge").get<std::string>());
    if (j.contains("canny_low_frac")) cfg.edge_params.canny_low_frac = j.at("canny_low_frac");
    if (j.contains("canny_high_frac")) cfg.edge_params.canny_high_frac = j.at("canny_high_frac");
    if (j.contains("input_size")) cfg.input_size = j.at("input_size");
    if (j.contains("conv_channels"))
      cfg.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    if (j.contains("feature_dim")) cfg.feature_dim = j.at("feature_dim");
    if (j.contains("l1_out")) cfg.l1_out = j.at("l1_out");
    if (j.contains("embed_dim")) cfg.embed_dim = j.at("embed_dim");
    if (j.contains("hidden_dim")) cfg.hidden_dim = j.at("hidden_dim");
    if (j.contains("l2_out")) cfg.l2_out = j.at("l2_out");
    if (j.contains("max_caption_len")) cfg.max_caption_len = j.at("max_caption_len");
    if (j.contains("seed")) cfg.seed = j.at("seed");
    if (j.contains("train")) {
      const json& t = j.at("train");
      if (t.contains("epochs")) cfg.train.epochs = t.at("epochs");
      if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size");
      if (t.contains("lr")) cfg.train.adam.lr = t.at("lr");
      if (t.contains("beta1")) cfg.train.adam.beta1 = t.at("beta1");
      if (t.contains("beta2")) cfg.train.adam.beta2 = t.at("beta2");
      if (t.contains("eps")) cfg.train.adam.eps = t.at("eps");
      if (t.contains("max_steps")) cfg.train.max_steps = t.at("max_steps");
      if (t.contains("stop_accuracy")) cfg.train.stop_accuracy = t.at("stop_accuracy");
      if (t.contains("shuffle")) cfg.train.shuffle = t.at("shuffle");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return cfg;
}

std::vector<std::uint8_t> serialize_checkpoint(CaptionModel& model) {
  Writer w;
  w.magic(kCheckpointMagic);
  w.u8(kFormatVersion);
  w.str(model_config_to_json(model.cfg).dump());
  w.u32(static_cast<std::uint32_t>(model.vocab.size()));
  for (const std::string& tok : model.vocab.tokens) w.str(tok);
  const std::vector<ParamView> views = model.param_views();
  w.u32(static_cast<std::uint32_t>(views.size()));
  for (const ParamView& v : views) {
    w.str(v.name);
    w.u8(static_cast<std::uint8_t>(v.shape.size()));
    for (long d : v.shape) w.u32(static_cast<std::uint32_t>(d));
    w.f64_span(v.data, v.size);
  }
  return w.take();
}

CaptionModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes, "checkpoint");
  r.expect_magic(kCheckpointMagic);
  const std::uint8_t version = r.u8();
  if (version != kFormatVersion)
    throw PersistenceError("checkpoint: unsupported version " + std::to_string(version));

  json cfg_json;
  try {
    cfg_json = json::parse(r.str());
  } catch (const json::parse_error& e) {
    throw PersistenceError(std::string("checkpoint: config block: ") + e.what());
  }
  const ModelConfig cfg = model_config_from_json(cfg_json);

  const std::uint32_t vocab_count = r.u32();
  std::vector<std::string> tokens;
  tokens.reserve(vocab_count);
  for (std::uint32_t i = 0; i < vocab_count; ++i) tokens.push_back(r.str());
  Vocab vocab;
  try {
    vocab = Vocab::from_tokens(tokens);
  } catch (const ParameterError& e) {
    throw PersistenceError(std::string("checkpoint vocab block invalid: ") + e.what());
  }

  CaptionModel model = build_model(cfg, vocab);
  std::vector<ParamView> views = model.param_views();
  std::unordered_map<std::string, ParamView*> by_name;
  for (ParamView& v : views) by_name[v.name] = &v;

  const std::uint32_t records = r.u32();
  if (records != views.size())
    throw PersistenceError("checkpoint: expected " + std::to_string(views.size()) +
                           " tensor records, found " + std::to_string(records));
  std::unordered_map<std::string, bool> seen;
  for (std::uint32_t i = 0; i < records; ++i) {
    const std::string name = r.str();
    const auto it = by_name.find(name);
    if (it == by_name.end())
      throw PersistenceError("checkpoint: unknown tensor record \"" + name + "\"");
    if (seen[name]) throw PersistenceError("checkpoint: duplicate tensor record \"" + name + "\"");
    seen[name] = true;
    ParamView& v = *it->second;
    const std::uint8_t rank = r.u8();
    std::vector<long> dims;
    for (std::uint8_t d = 0; d < rank; ++d) dims.push_back(static_cast<long>(r.u32()));
    if (dims != v.shape) {
      std::string got, want;
      for (long d : dims) got += (got.empty() ? "" : "x") + std::to_string(d);
      for (long d : v.shape) want += (want.empty() ? "" : "x") + std::to_string(d);
      throw ShapeError("checkpoint: tensor \"" + name + "\" has shape " + got +
                       ", config requires " + want);
    }
    r.f64_span(v.data, v.size);
  }
  r.expect_done();
  return model;
}

void save_checkpoint(CaptionModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

CaptionModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path));
}

std::vector<std::uint8_t> serialize_archive(const Archive& archive) {
  Writer w;
  w.magic(kArchiveMagic);
  w.u8(kFormatVersion);
  w.str(json{{"feature_dim", archive.feature_dim},
             {"entries", archive.entries.size()}}
            .dump());
  w.u32(static_cast<std::uint32_t>(archive.entries.size()));
  for (const ArchiveEntry& e : archive.entries) {
    w.str(e.source);
    w.u32(static_cast<std::uint32_t>(e.feature.size()));
    w.f64_span(e.feature.data(), e.feature.size());
    w.u32(static_cast<std::uint32_t>(e.captions.size()));
    for (const std::vector<int>& cap : e.captions) {
      w.u32(static_cast<std::uint32_t>(cap.size()));
      for (int id : cap) w.u32(static_cast<std::uint32_t>(id));
    }
  }
  return w.take();
}

Archive deserialize_archive(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes, "archive");
  r.expect_magic(kArchiveMagic);
  const std::uint8_t version = r.u8();
  if (version != kFormatVersion)
    throw PersistenceError("archive: unsupported version " + std::to_string(version));
  json meta;
  try {
    meta = json::parse(r.str());
  } catch (const json::parse_error& e) {
    throw PersistenceError(std::string("archive: meta block: ") + e.what());
  }
  Archive archive;
  archive.feature_dim = meta.value("feature_dim", 0);
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchiveEntry e;
    e.source = r.str();
    const std::uint32_t dim = r.u32();
    if (archive.feature_dim != 0 && static_cast<int>(dim) != archive.feature_dim)
      throw ShapeError("archive: entry " + std::to_string(i) + " feature dimension " +
                       std::to_string(dim) + " does not match header " +
                       std::to_string(archive.feature_dim));
    e.feature = Vec::Zero(dim);
    r.f64_span(e.feature.data(), e.feature.size());
    const std::uint32_t caps = r.u32();
    if (caps == 0)
      throw PersistenceError("archive: entry " + std::to_string(i) + " has no captions");
    for (std::uint32_t c = 0; c < caps; ++c) {
      const std::uint32_t len = r.u32();
      std::vector<int> ids(len);
      for (std::uint32_t t = 0; t < len; ++t) ids[t] = static_cast<int>(r.u32());
      e.captions.push_back(std::move(ids));
    }
    archive.entries.push_back(std::move(e));
  }
  r.expect_done();
  return archive;
}

void save_archive(const Archive& archive, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_archive(archive));
}

Archive load_archive(const std::filesystem::path& path) {
  return deserialize_archive(read_file_bytes(path));
}

}  // namespace edgecap
