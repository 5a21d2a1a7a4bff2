#include "cotdrive/annotate/types.hpp"

#include "cotdrive/core/error.hpp"

namespace cotdrive::annotate {

std::string_view to_string(Step s) {
  switch (s) {
    case Step::background_statistics: return "background_statistics";
    case Step::interaction_analysis: return "interaction_analysis";
    case Step::risk_assessment: return "risk_assessment";
    case Step::prediction: return "prediction";
  }
  return "?";
}

Step step_from_string(std::string_view s) {
  for (Step st : kSteps)
    if (to_string(st) == s) return st;
  throw SchemaError("unknown dialogue step '" + std::string(s) + "'");
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::teacher_live: return "teacher_live";
    case Provenance::teacher_mock: return "teacher_mock";
    case Provenance::student: return "student";
  }
  return "?";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "teacher_live") return Provenance::teacher_live;
  if (s == "teacher_mock") return Provenance::teacher_mock;
  if (s == "student") return Provenance::student;
  throw SchemaError("unknown provenance '" + std::string(s) + "'");
}

}  // namespace cotdrive::annotate
