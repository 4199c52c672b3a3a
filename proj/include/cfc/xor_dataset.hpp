// Bit-stream XOR dataset: classify the parity of a random bit string,
// presented either densely (one event per bit, unit time steps) or
// event-based (runs of equal bits collapsed into one event whose duration
// is the run length, giving irregular sampling).
#pragma once

#include <cstdint>
#include <vector>

#include "cfc/series.hpp"

namespace cfc::train {

struct XorDatasetConfig {
  enum class Encoding { dense, event };

  std::size_t n_sequences = 1000;
  std::size_t bits_per_sequence = 32;
  Encoding encoding = Encoding::dense;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_string(XorDatasetConfig::Encoding e);
XorDatasetConfig::Encoding encoding_from_string(const std::string& s);

// Deterministic under a fixed seed; sequence i draws from its own stream
// derived from (seed, i), so index-based splits use disjoint streams.
std::vector<IrregularSeries> generate_xor(const XorDatasetConfig& cfg);

}  // namespace cfc::train
