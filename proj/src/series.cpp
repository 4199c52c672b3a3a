#include "cfc/series.hpp"

#include <cmath>
#include <stdexcept>

namespace cfc {

void IrregularSeries::validate() const {
  const std::size_t T = timestamps.size();
  if (mask.size() != T) {
    throw std::invalid_argument("IrregularSeries: mask length " + std::to_string(mask.size()) +
                                " does not match " + std::to_string(T) + " timestamps");
  }
  if (T > 0) {
    if (values.rank() != 2 || values.dim(0) != T) {
      throw std::invalid_argument("IrregularSeries: values must be [T, m] with T=" +
                                  std::to_string(T) + ", got " + values.shape_str());
    }
  }
  if (!values.all_finite()) throw std::invalid_argument("IrregularSeries: non-finite values");
  double prev = -1.0;
  bool have_prev = false;
  for (std::size_t k = 0; k < T; ++k) {
    if (!mask[k]) continue;
    const double t = timestamps[k];
    if (!std::isfinite(t) || t < 0.0) {
      throw std::invalid_argument("IrregularSeries: invalid timestamp at step " +
                                  std::to_string(k));
    }
    if (have_prev && !(t > prev)) {
      throw std::invalid_argument("IrregularSeries: timestamps must increase strictly over "
                                  "valid steps (step " + std::to_string(k) + ")");
    }
    prev = t;
    have_prev = true;
  }
}

}  // namespace cfc
