#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mage/tensor.hpp"

namespace mage {

struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 1e-4;
  bool pass = false;
};

/// Central-difference gradient checks for every primitive tape operation,
/// random shapes up to 8, step 1e-5.
std::vector<CheckResult> grad_check_primitives(std::uint64_t seed);

/// Full bidirectional MAGE-GRU encode over a random 8-node, 2-edge-type DAG
/// (d_in = 5, state widths 4 + 3), loss = nll of the classification head.
/// Checks every parameter including the inputs. One result per step path.
std::vector<CheckResult> grad_check_full_encode(std::uint64_t seed);

/// Both suites; every result must pass for the artifact's gradients to be trusted.
std::vector<CheckResult> grad_check_all(std::uint64_t seed);

}  // namespace mage
