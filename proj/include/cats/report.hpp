#pragma once

#include <cstdint>

namespace cats {

using Seconds = double;

// A cooperative-perception claim: one detected object in global
// coordinates. object_id is an opaque ground-truth handle used only by
// the simulator for labeling; receivers never branch on it.
struct ObjectReport {
  std::uint64_t object_id = 0;
  double x = 0.0;
  double y = 0.0;
  Seconds claimed_at = 0.0;

  bool operator==(const ObjectReport&) const = default;
};

}  // namespace cats
