#pragma once

#include <exception>

namespace sca {

// OpenMP loop over [0, n) that re-throws the first exception raised by any
// iteration once the loop has finished.
template <typename F>
void parallel_for(int n, F&& body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < n; ++k) {
    try {
      body(k);
    } catch (...) {
#pragma omp critical(sca_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace sca
