#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace udainv {

struct GradCheckCase {
  std::string name;
  double max_rel_error;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-5;

// Central-difference checks of every tape primitive and of both training
// objectives on seeded inputs.
std::vector<GradCheckCase> gradcheck_suite(std::uint64_t seed, double step = kGradCheckStep);

struct DivCheckLine {
  std::string name;
  double value;
  double reference;
  double tolerance;  // absolute
  bool pass;
};

// Conjugates against grid sups, NWJ estimates against closed forms, and the
// restricted-witness upper bound.
std::vector<DivCheckLine> divcheck_suite(std::uint64_t seed, std::size_t samples = 100000);

}  // namespace udainv
