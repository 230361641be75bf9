#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edgecap/cli.hpp"
#include "edgecap/errors.hpp"

namespace edgecap::cli {

namespace {

// CLI11 works on mutable char*; keep copies alive for the parse.
struct Argv {
  explicit Argv(int argc, const char* const* argv) {
    for (int i = 0; i < argc; ++i) storage.emplace_back(argv[i]);
    for (std::string& s : storage) ptrs.push_back(s.data());
  }
  std::vector<std::string> storage;
  std::vector<char*> ptrs;
};

ExperimentConfig resolve_config(const std::string& config_path, const Overrides& ov) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);
  apply_overrides(cfg, ov);
  return cfg;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"edge-aware image captioning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path = "out";
  Overrides ov;
  std::string edge_flag, fusion_flag, strategy_flag;
  std::uint64_t seed_flag = 0;
  int beam_flag = 0, knn_flag = -1;

  auto add_common = [&](CLI::App* cmd, bool with_model_flags) {
    cmd->add_option("--config", config_path, "experiment config JSON");
    cmd->add_option("--out", out_path, "output directory");
    cmd->add_option("--seed", seed_flag, "override the random seed");
    if (with_model_flags) {
      cmd->add_option("--edge", edge_flag, "edge detector: none|canny|sobel|laplacian");
      cmd->add_option("--fusion", fusion_flag, "fusion variant: single|early|late");
    }
    cmd->add_option("--strategy", strategy_flag, "decode strategy: greedy|beam|cbbs");
    cmd->add_option("--beam", beam_flag, "beam width");
    cmd->add_option("--knn", knn_flag, "neighbours for cbbs consensus");
  };

  // Overrides only count once parsing has converted and assigned the flag
  // values, so they are collected per subcommand after parse().
  auto collect_overrides = [&](CLI::App* cmd) {
    auto took = [&](const std::string& name) {
      const CLI::Option* o = cmd->get_option_no_throw(name);
      return o != nullptr && o->count() > 0;
    };
    if (took("--seed")) ov.seed = seed_flag;
    if (took("--edge")) ov.edge = edge_flag;
    if (took("--fusion")) ov.fusion = fusion_flag;
    if (took("--strategy")) ov.strategy = strategy_flag;
    if (took("--beam")) ov.beam_width = beam_flag;
    if (took("--knn")) ov.knn_k = knn_flag;
  };

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic scene corpus");
  int gen_n = 100;
  std::uint64_t gen_seed = 7;
  gen->add_option("--n", gen_n, "number of scenes (>= 10)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", out_path, "corpus directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train one captioning model");
  add_common(train, true);
  train->get_option("--config")->required();

  // caption
  auto* caption = app.add_subcommand("caption", "caption a single image");
  std::string ckpt_path, image_path, archive_path;
  std::string eval_split = "test", arch_split = "train";
  caption->add_option("checkpoint", ckpt_path, "model checkpoint (.jssf)")->required();
  caption->add_option("image", image_path, "NetPBM image")->required();
  caption->add_option("--archive", archive_path, "feature archive (.jssa) for cbbs");
  add_common(caption, false);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "decode a split and score it");
  evaluate->add_option("checkpoint", ckpt_path, "model checkpoint (.jssf)")->required();
  evaluate->add_option("dataset", image_path, "dataset JSON")->required();
  evaluate->add_option("--split", eval_split, "train|val|test");
  evaluate->add_option("--archive", archive_path, "feature archive (.jssa) for cbbs");
  add_common(evaluate, false);

  // compare
  auto* compare = app.add_subcommand("compare", "train and score the fusion/edge matrix");
  add_common(compare, true);
  compare->get_option("--config")->required();

  // build-archive
  auto* barch = app.add_subcommand("build-archive", "store split features + captions for cbbs");
  barch->add_option("checkpoint", ckpt_path, "model checkpoint (.jssf)")->required();
  barch->add_option("dataset", image_path, "dataset JSON")->required();
  barch->add_option("--split", arch_split, "split to archive");
  barch->add_option("--out", out_path, "archive file path")->required();

  // edges
  auto* edges = app.add_subcommand("edges", "export an edge map as PGM");
  std::string edges_detector = "laplacian";
  edges->add_option("image", image_path, "NetPBM image")->required();
  edges->add_option("--edge", edges_detector, "canny|sobel|laplacian");
  edges->add_option("--out", out_path, "output PGM path")->required();

  Argv args(argc, argv);
  try {
    app.parse(static_cast<int>(args.ptrs.size()), args.ptrs.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) {
      if (gen_n < 10) {
        err << "error: gen-synth requires --n >= 10\n";
        return 2;
      }
      return cmd_gen_synth(gen_n, gen_seed, out_path, out, err);
    }
    if (train->parsed()) {
      collect_overrides(train);
      return cmd_train(resolve_config(config_path, ov), out_path, out, err);
    }
    if (caption->parsed()) {
      collect_overrides(caption);
      DecodeOptions dec;
      ExperimentConfig cfg = resolve_config(config_path, ov);
      dec = cfg.decode;
      return cmd_caption(ckpt_path, image_path, dec,
                         archive_path.empty()
                             ? std::nullopt
                             : std::optional<std::filesystem::path>(archive_path),
                         out, err);
    }
    if (evaluate->parsed()) {
      collect_overrides(evaluate);
      ExperimentConfig cfg = resolve_config(config_path, ov);
      return cmd_evaluate(ckpt_path, image_path, eval_split, cfg.decode,
                          archive_path.empty()
                              ? std::nullopt
                              : std::optional<std::filesystem::path>(archive_path),
                          out_path, out, err);
    }
    if (compare->parsed()) {
      collect_overrides(compare);
      return cmd_compare(resolve_config(config_path, ov), out_path, out, err);
    }
    if (barch->parsed()) return cmd_build_archive(ckpt_path, image_path, arch_split, out_path, out, err);
    if (edges->parsed()) return cmd_edges(image_path, edges_detector, out_path, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "error: no command\n";
  return 2;
}

}  // namespace edgecap::cli
