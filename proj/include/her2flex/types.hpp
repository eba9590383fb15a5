#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace her2flex {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;
using VectorF = Vector<float>;
using VectorD = Vector<double>;

// Error taxonomy shared by all modules. Tests match on the code, not the
// message text.
enum class Errc {
  missing_grade,
  unpaired_sample,
  grade_mismatch,
  too_few_samples,
  arity_violation,
  degenerate_dataset,
  shape_mismatch,
  too_many_levels,
  non_finite_loss,
  modality_mismatch,
  dimension_mismatch,
  empty_batch,
  spatial_mismatch,
  length_mismatch,
  invalid_distribution,
  empty_input,
  too_small,
  perplexity_too_high,
  missing_checkpoint,
  corrupt_checkpoint,
  io_error,
  bad_config,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::missing_grade: return "MissingGrade";
    case Errc::unpaired_sample: return "UnpairedSample";
    case Errc::grade_mismatch: return "GradeMismatch";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::arity_violation: return "ArityViolation";
    case Errc::degenerate_dataset: return "DegenerateDataset";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::too_many_levels: return "TooManyLevels";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::modality_mismatch: return "ModalityMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::spatial_mismatch: return "SpatialMismatch";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::invalid_distribution: return "InvalidDistribution";
    case Errc::empty_input: return "EmptyInput";
    case Errc::too_small: return "TooSmall";
    case Errc::perplexity_too_high: return "PerplexityTooHigh";
    case Errc::missing_checkpoint: return "MissingCheckpoint";
    case Errc::corrupt_checkpoint: return "CorruptCheckpoint";
    case Errc::io_error: return "IoError";
    case Errc::bad_config: return "BadConfig";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, Errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace her2flex
