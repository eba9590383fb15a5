#pragma once

#include "her2flex/grades.hpp"
#include "her2flex/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace her2flex {

// One case: optional H&E image, optional IHC image, grade, stable id. At least
// one modality is present; paired images are pixel-registered views of the
// same case.
struct PairedSample {
  std::string id;
  std::optional<ImageF> he;
  std::optional<ImageF> ihc;
  Her2Grade grade = Her2Grade::G0;
};

// Filename grammar: <id>_<split>_<grade>.<ext>, grade in {0,1+,2+,3+}. The
// pairing stem is everything before the grade token ("00012_train").
struct ParsedName {
  std::string stem;   // "<id>_<split>"
  Her2Grade grade;
};

ParsedName parse_name(const std::string& filename);

inline Her2Grade parse_grade_from_filename(const std::string& filename) {
  return parse_name(filename).grade;
}

// Loads a BCI-style layout: <he_dir>/*.png and <ihc_dir>/*.png matched by
// stem. With require_pairs, a stem present on one side only is an error;
// otherwise single-modality samples are kept. Result is sorted by id.
std::vector<PairedSample> load_dataset(const std::string& he_dir, const std::string& ihc_dir,
                                       bool require_pairs);

struct SplitResult {
  std::vector<PairedSample> train, val, test;
};

// Deterministic 8:1:1 split: floor(n/10) each for val and test, remainder to
// train. Samples are sorted by id before the seeded shuffle so the partition
// depends only on (ids, seed).
SplitResult split_dataset(std::vector<PairedSample> samples, std::uint64_t seed);

}  // namespace her2flex
