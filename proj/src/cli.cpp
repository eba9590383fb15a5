#include "her2flex/cli.hpp"

#include "her2flex/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>

namespace her2flex {

namespace {

std::string default_out() {
  const char* env = std::getenv("HER2FLEX_OUT");
  return env != nullptr ? env : "out";
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = default_out();
  std::string data_dir;
  std::int64_t seed = -1;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
    if (!data_dir.empty()) cfg.data_root = data_dir;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    validate_config(cfg);
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_data) {
  cmd->add_option("--config", opts.config_path, "Path to a sectioned key/value config file");
  cmd->add_option("--out", opts.out_dir,
                  "Output/run directory (default: $HER2FLEX_OUT or ./out)");
  if (with_data) cmd->add_option("--data", opts.data_dir, "Corpus root containing HE/ and IHC/");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"her2flex: modality-flexible HER2 grade prediction toolkit"};
  app.require_subcommand(1);

  // synth
  CommonOpts synth_opts;
  int n_per_grade = -1, synth_size = -1;
  bool force = false;
  auto* synth = app.add_subcommand("synth", "Generate a paired synthetic stain corpus");
  add_common(synth, synth_opts, false);
  synth->add_option("--n-per-grade", n_per_grade, "Pairs per grade");
  synth->add_option("--size", synth_size, "Patch edge length");
  synth->add_flag("--force", force, "Write into a nonempty destination");

  // train
  CommonOpts train_opts;
  std::string stage_str;
  auto* train = app.add_subcommand("train", "Run one training stage");
  add_common(train, train_opts, true);
  train->add_option("--stage", stage_str, "selector | cmgan | classifier | joint")->required();

  // eval
  CommonOpts eval_opts;
  std::string arm_str, eval_stage_str = "auto", corrupt_str;
  auto* eval = app.add_subcommand("eval", "Evaluate one experiment arm on the test split");
  add_common(eval, eval_opts, true);
  eval->add_option("--arm", arm_str, "Experiment arm name")->required();
  eval->add_option("--stage", eval_stage_str, "auto | classifier | joint");
  eval->add_option("--corrupt", corrupt_str, "none | he | ihc (photometric corruption)");

  // infer
  CommonOpts infer_opts;
  std::string he_path, ihc_path, arity_str;
  bool dump_recon = false;
  auto* infer = app.add_subcommand("infer", "Single-case inference");
  add_common(infer, infer_opts, false);
  infer->add_option("--he", he_path, "H&E image path");
  infer->add_option("--ihc", ihc_path, "IHC image path");
  infer->add_option("--arity", arity_str, "dual | single")->required();
  infer->add_flag("--dump-reconstruction", dump_recon,
                  "Write the reconstructed modality beside the record");

  // export-features
  CommonOpts export_opts;
  bool with_tsne = false;
  auto* exp = app.add_subcommand("export-features",
                                 "Export GAP shared features (optionally with t-SNE)");
  add_common(exp, export_opts, true);
  exp->add_flag("--tsne", with_tsne, "Also write a 2-D t-SNE embedding");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      RunConfig cfg = synth_opts.resolve();
      if (n_per_grade > 0) cfg.synth_per_grade = n_per_grade;
      if (synth_size > 0) cfg.synth_size = synth_size;
      pipeline::cmd_synth(cfg, synth_opts.out_dir, force);
      std::printf("synth: wrote %d pairs to %s\n", cfg.synth_per_grade * kNumGrades,
                  synth_opts.out_dir.c_str());
    } else if (*train) {
      const RunConfig cfg = train_opts.resolve();
      const auto stage = pipeline::stage_from_name(stage_str);
      pipeline::cmd_train(cfg, train_opts.out_dir, stage);
      std::printf("train: stage %s finished in %s\n", stage_str.c_str(),
                  train_opts.out_dir.c_str());
    } else if (*eval) {
      RunConfig cfg = eval_opts.resolve();
      if (!corrupt_str.empty()) cfg.corrupt = corrupt_str;
      validate_config(cfg);
      pipeline::EvalStage es = pipeline::EvalStage::automatic;
      if (eval_stage_str == "classifier") es = pipeline::EvalStage::classifier;
      else if (eval_stage_str == "joint") es = pipeline::EvalStage::joint;
      else require(eval_stage_str == "auto", Errc::bad_config, "unknown eval stage");
      const auto report =
          pipeline::cmd_eval(cfg, eval_opts.out_dir, pipeline::arm_from_name(arm_str), es);
      std::printf("eval %s: accuracy %.4f macro_f1 %.4f\n", arm_str.c_str(), report.accuracy,
                  report.macro_f1);
    } else if (*infer) {
      const RunConfig cfg = infer_opts.resolve();
      Arity arity;
      if (arity_str == "dual") arity = Arity::Dual;
      else if (arity_str == "single") arity = Arity::Single;
      else fail(Errc::bad_config, "--arity must be dual or single");
      const auto record =
          pipeline::cmd_infer(cfg, infer_opts.out_dir, he_path, ihc_path, arity, dump_recon);
      std::printf("infer %s: grade %s (p=%.4f)\n", record.id.c_str(),
                  grade_label(record.predicted).c_str(),
                  record.probabilities(grade_index(record.predicted)));
    } else if (*exp) {
      const RunConfig cfg = export_opts.resolve();
      pipeline::cmd_export_features(cfg, export_opts.out_dir, with_tsne);
      std::printf("export-features: wrote %s/features.csv%s\n", export_opts.out_dir.c_str(),
                  with_tsne ? " and tsne.csv" : "");
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace her2flex
