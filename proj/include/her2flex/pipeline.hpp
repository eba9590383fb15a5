#pragma once

#include "her2flex/config.hpp"
#include "her2flex/grades.hpp"
#include "her2flex/metrics.hpp"
#include "her2flex/router.hpp"

#include <optional>
#include <string>

namespace her2flex::pipeline {

enum class Stage { selector, cmgan, classifier, joint };

Stage stage_from_name(const std::string& name);
std::string stage_name(Stage stage);

// Evaluation arms mirroring the comparative and ablation experiment matrix.
enum class Arm {
  he_only_baseline,
  ihc_only_baseline,
  he_plus_fake_ihc,
  ihc_plus_fake_he,
  dual_concat_baseline,
  dual_full,
  dual_no_attention,
};

Arm arm_from_name(const std::string& name);
std::string arm_name(Arm arm);

// Which checkpoint an eval arm reads from.
enum class EvalStage { automatic, classifier, joint };

// Writes a BCI-layout synthetic corpus (HE/, IHC/, manifest.json) plus the
// resolved config. Refuses a nonempty destination unless force is set.
void cmd_synth(const RunConfig& cfg, const std::string& out_dir, bool force);

// Runs one training stage against cfg.data_root, writing history logs and a
// best-validation checkpoint into run_dir.
void cmd_train(const RunConfig& cfg, const std::string& run_dir, Stage stage);

// Evaluates one arm on the test split; writes metrics.json and
// predictions.csv under run_dir/eval_<arm>/ and returns the report.
MetricsReport cmd_eval(const RunConfig& cfg, const std::string& run_dir, Arm arm,
                       EvalStage eval_stage = EvalStage::automatic);

struct InferRecord {
  std::string id;
  Arity declared_arity = Arity::Dual;
  BranchDecision decision;
  bool he_reconstructed = false;
  bool ihc_reconstructed = false;
  VectorF probabilities;
  Her2Grade predicted = Her2Grade::G0;
};

// Single-case inference: router -> optional reconstruction -> encoder ->
// fusion -> grade. Writes a JSON record (and optionally the reconstructed
// image) under run_dir.
InferRecord cmd_infer(const RunConfig& cfg, const std::string& run_dir,
                      const std::string& he_path, const std::string& ihc_path, Arity arity,
                      bool dump_reconstruction);

// Exports GAP-ed shared features of the test split as CSV rows
// (id, grade, f0..fD-1); optionally adds a 2-D t-SNE embedding CSV.
void cmd_export_features(const RunConfig& cfg, const std::string& run_dir, bool with_tsne);

}  // namespace her2flex::pipeline
