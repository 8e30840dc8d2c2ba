#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sca/tensor.hpp"

namespace sca {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradcheckResult {
  double relative_error = 0.0;  // |a - n| / max(|a|, |n|, 1e-10) over checked entries
  std::size_t checked = 0;
};

// Central differences on every entry of every input (or on `max_entries`
// randomly chosen entries per input when nonzero) against backward().
GradcheckResult check_gradient(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-5,
                               std::size_t max_entries = 0, std::uint64_t sample_seed = 0);

struct GradcheckCase {
  std::string op;
  int instance = 0;
  std::string shape;
  double relative_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double tolerance = 1e-5;
  bool all_passed() const;
  std::size_t op_count() const;
  std::string format() const;  // one line per case plus a summary line
};

// The registered battery: every differentiable op, three random instances
// each.
GradcheckReport run_gradcheck(std::uint64_t seed = 0, double tolerance = 1e-5);
std::vector<std::string> gradcheck_ops();

}  // namespace sca
