#pragma once

#include "her2flex/types.hpp"

#include <array>
#include <optional>
#include <string>

namespace her2flex {

// HER2 expression grades in ordinal order. Labels follow the clinical scoring
// convention "0", "1+", "2+", "3+".
enum class Her2Grade : int { G0 = 0, G1 = 1, G2 = 2, G3 = 3 };

inline constexpr int kNumGrades = 4;
inline constexpr std::array<Her2Grade, kNumGrades> kAllGrades = {Her2Grade::G0, Her2Grade::G1,
                                                                 Her2Grade::G2, Her2Grade::G3};

inline int grade_index(Her2Grade g) { return static_cast<int>(g); }

inline std::string grade_label(Her2Grade g) {
  switch (g) {
    case Her2Grade::G0: return "0";
    case Her2Grade::G1: return "1+";
    case Her2Grade::G2: return "2+";
    case Her2Grade::G3: return "3+";
  }
  return "?";
}

inline std::optional<Her2Grade> grade_from_label(const std::string& label) {
  if (label == "0") return Her2Grade::G0;
  if (label == "1+") return Her2Grade::G1;
  if (label == "2+") return Her2Grade::G2;
  if (label == "3+") return Her2Grade::G3;
  return std::nullopt;
}

enum class Modality : int { HE = 0, IHC = 1 };

inline std::string modality_name(Modality m) { return m == Modality::HE ? "HE" : "IHC"; }

enum class ReconDirection : int { HEtoIHC = 0, IHCtoHE = 1 };

inline std::string direction_name(ReconDirection d) {
  return d == ReconDirection::HEtoIHC ? "HEtoIHC" : "IHCtoHE";
}

// A present modality implies reconstructing its counterpart.
inline ReconDirection direction_for(Modality present) {
  return present == Modality::HE ? ReconDirection::HEtoIHC : ReconDirection::IHCtoHE;
}

}  // namespace her2flex
