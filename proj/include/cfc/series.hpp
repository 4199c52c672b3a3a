// Universal container for (possibly irregularly) sampled sequences.
#pragma once

#include <cstdint>
#include <vector>

#include "cfc/tensor.hpp"

namespace cfc {

struct IrregularSeries {
  Tensor values;                    // [T, m]
  std::vector<double> timestamps;   // length T, strictly increasing where mask is set
  std::vector<std::uint8_t> mask;   // length T, 1 = valid step
  double label = 0.0;

  std::size_t steps() const { return timestamps.size(); }
  std::size_t features() const { return values.rank() == 2 ? values.dim(1) : 0; }

  void validate() const;
};

}  // namespace cfc
