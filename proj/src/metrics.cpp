#include "her2flex/metrics.hpp"

namespace her2flex {

ConfusionMatrix confusion(const std::vector<Her2Grade>& truth,
                          const std::vector<Her2Grade>& pred) {
  require(!truth.empty(), Errc::empty_input, "confusion needs at least one sample");
  require(truth.size() == pred.size(), Errc::length_mismatch,
          "true/pred label lists differ in length");
  ConfusionMatrix cm;
  for (size_t i = 0; i < truth.size(); ++i)
    ++cm.counts(grade_index(truth[i]), grade_index(pred[i]));
  return cm;
}

MetricsReport prf_metrics(const ConfusionMatrix& cm) {
  const long total = cm.total();
  require(total > 0, Errc::empty_input, "confusion matrix is empty");

  MetricsReport r;
  r.accuracy = static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
  for (int c = 0; c < kNumGrades; ++c) {
    const long tp = cm.counts(c, c);
    const long pred_c = cm.counts.col(c).sum();
    const long true_c = cm.counts.row(c).sum();
    PerClassMetrics& pc = r.per_class[c];
    pc.support = true_c;
    pc.precision = pred_c > 0 ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    pc.recall = true_c > 0 ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
    pc.f1 = (pc.precision + pc.recall) > 0
                ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall)
                : 0.0;
    r.macro_precision += pc.precision / kNumGrades;
    r.macro_recall += pc.recall / kNumGrades;
    r.macro_f1 += pc.f1 / kNumGrades;
    r.weighted_f1 += pc.f1 * static_cast<double>(true_c) / static_cast<double>(total);
  }
  return r;
}

}  // namespace her2flex
