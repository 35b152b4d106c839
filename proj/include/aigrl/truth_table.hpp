#pragma once

#include <cstdint>
#include <vector>

namespace aigrl {

// Full output column of a k-input Boolean function, one entry per assignment.
// Indexing convention: input 0 is the most significant bit of the row index,
// input k-1 the least significant. bits[m] is 0 or 1.
struct TruthTable {
  int k = 0;
  std::vector<uint8_t> bits;

  bool operator==(const TruthTable&) const = default;
};

}  // namespace aigrl
