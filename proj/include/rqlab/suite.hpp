#pragma once

#include "rqlab/config.hpp"

#include <nlohmann/json.hpp>

namespace rqlab {

struct SuiteReport {
  nlohmann::json json;
  long certificates = 0;
  long failures = 0;  // failed certificates, dominance misses and hard errors
  bool pass() const { return failures == 0; }
};

/// Randomized certification suite: for every generated instance and frame-stack
/// depth, analyze -> solve -> certify under each IPM, plus the
/// instance-independent rho dominance checks. Errors are recorded per job and
/// the suite continues.
SuiteReport run_suite(const SuiteOptions& opts);

}  // namespace rqlab
