#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "edgecap/model.hpp"

namespace edgecap::cli {

struct DecodeOptions {
  std::string strategy = "greedy";  // greedy | beam | cbbs | gold
  int beam_width = 5;
  int knn_k = 5;
  double alpha = 0.7;
  std::string consensus = "bleu2";
};

// JSON experiment file + flag overrides. Schema documented in the README.
struct ExperimentConfig {
  std::filesystem::path dataset;
  int vocab_min_count = 2;
  ModelConfig model;
  DecodeOptions decode;
  std::vector<std::string> compare_edges = {"original", "laplacian"};
  std::vector<std::string> compare_fusions = {"single", "early", "late"};
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Flag overrides applied on top of a config file (absent = keep file value).
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> edge;
  std::optional<std::string> fusion;
  std::optional<std::string> strategy;
  std::optional<int> beam_width;
  std::optional<int> knn_k;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov);

// Commands return process exit codes: 0 success, 2 usage/config errors,
// 1 anything else. Human-readable progress goes to `out`, errors to `err`.

int cmd_gen_synth(int n, std::uint64_t seed, const std::filesystem::path& out_dir,
                  std::ostream& out, std::ostream& err);

int cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out,
              std::ostream& err);

int cmd_caption(const std::filesystem::path& checkpoint, const std::filesystem::path& image,
                const DecodeOptions& decode, const std::optional<std::filesystem::path>& archive,
                std::ostream& out, std::ostream& err);

int cmd_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                 const std::string& split, const DecodeOptions& decode,
                 const std::optional<std::filesystem::path>& archive,
                 const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

int cmd_compare(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                std::ostream& out, std::ostream& err);

int cmd_build_archive(const std::filesystem::path& checkpoint,
                      const std::filesystem::path& dataset, const std::string& split,
                      const std::filesystem::path& out_file, std::ostream& out, std::ostream& err);

int cmd_edges(const std::filesystem::path& image, const std::string& detector,
              const std::filesystem::path& out_file, std::ostream& out, std::ostream& err);

// Full argv dispatch used by the binary; exposed for end-to-end tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace edgecap::cli
