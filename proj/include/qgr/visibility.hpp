#pragma once

#include <utility>
#include <vector>

#include "qgr/helmholtz.hpp"
#include "qgr/region.hpp"

namespace qgr {

// Open superlevel set of a transmitted field: the part of the graph where the
// squared amplitude (or its envelope) stays above the squared threshold.
struct VisibilityRegion {
  GraphPoint source;
  double threshold = 0.0;
  Region region;
  bool used_envelope = true;
};

// Superlevel set {x : |u(x)|^2 > T^2} of the field, or of its per-piece
// envelope when use_envelope is set.  Crossing points are located by dense
// sign-change sampling (at least 512 samples per edge, more when the
// oscillation demands it) and bisection-refined to 1e-10 offset accuracy.  A
// threshold above the global maximum yields an empty region.
VisibilityRegion superlevel_region(const WaveField& f, double T, bool use_envelope);

// Threshold every transmitter with its own lemma-derived loss, share the
// largest loss across the set, re-derive thresholds at that loss, and verify
// that the regions are contractible and jointly cover the compact part.
// Throws "cover gap ..." listing uncovered subintervals, "no sources",
// "compact part misses a vertex", and "no admissible alpha within budget"
// when raising the loss cannot make every region contractible.
std::pair<std::vector<VisibilityRegion>, double> build_visibility_cover(
    const MetricGraph& g, const std::vector<GraphPoint>& sources,
    const Wavenumber& k0, const Region& compact_part);

// Serial reference implementation (identical results, no worker threads).
std::pair<std::vector<VisibilityRegion>, double> build_visibility_cover_serial(
    const MetricGraph& g, const std::vector<GraphPoint>& sources,
    const Wavenumber& k0, const Region& compact_part);

}  // namespace qgr
