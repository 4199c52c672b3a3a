#include "cfc/xor_dataset.hpp"

#include <random>
#include <stdexcept>

namespace cfc::train {

void XorDatasetConfig::validate() const {
  if (bits_per_sequence < 1) {
    throw std::invalid_argument("XorDatasetConfig: bits_per_sequence must be >= 1");
  }
}

std::string to_string(XorDatasetConfig::Encoding e) {
  return e == XorDatasetConfig::Encoding::dense ? "dense" : "event";
}

XorDatasetConfig::Encoding encoding_from_string(const std::string& s) {
  if (s == "dense") return XorDatasetConfig::Encoding::dense;
  if (s == "event") return XorDatasetConfig::Encoding::event;
  throw std::invalid_argument("unknown encoding '" + s + "'");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<IrregularSeries> generate_xor(const XorDatasetConfig& cfg) {
  cfg.validate();
  std::vector<IrregularSeries> out;
  out.reserve(cfg.n_sequences);

  for (std::size_t s = 0; s < cfg.n_sequences; ++s) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(s)));
    std::uniform_int_distribution<int> coin(0, 1);

    std::vector<int> bits(cfg.bits_per_sequence);
    int parity = 0;
    for (auto& b : bits) {
      b = coin(rng);
      parity ^= b;
    }

    std::vector<double> values;
    std::vector<double> durations;
    if (cfg.encoding == XorDatasetConfig::Encoding::dense) {
      values.assign(bits.begin(), bits.end());
      durations.assign(bits.size(), 1.0);
    } else {
      // run-length encode: each maximal run of equal bits becomes one event
      std::size_t i = 0;
      while (i < bits.size()) {
        std::size_t j = i;
        while (j < bits.size() && bits[j] == bits[i]) ++j;
        values.push_back(bits[i]);
        durations.push_back(static_cast<double>(j - i));
        i = j;
      }
    }

    IrregularSeries series;
    const std::size_t T = values.size();
    series.values = Tensor({T, 1}, std::move(values));
    series.timestamps.resize(T);
    double t = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
      t += durations[k];
      series.timestamps[k] = t;
    }
    series.mask.assign(T, 1);
    series.label = parity;
    out.push_back(std::move(series));
  }
  return out;
}

}  // namespace cfc::train
