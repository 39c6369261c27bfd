#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qgr/graph.hpp"
#include "qgr/helmholtz.hpp"
#include "qgr/region.hpp"

namespace qgr {

// One receiver measurement: a location paired with the simultaneous readings
// of every transmitter field at that location.
struct SignalProfileSample {
  GraphPoint location;
  std::vector<Complex> value;  // one entry per transmitter
};

// An ordered collection of regions over one graph.  Element order fixes the
// nerve vertex numbering.
struct Cover {
  const MetricGraph* graph = nullptr;
  std::vector<Region> elements;
};

// Abstract simplicial complex of a cover: vertex i stands for elements[i], and
// a simplex {i0,...,ip} is listed exactly when the corresponding intersection
// is nonempty.  The list is downward closed and sorted by dimension, then
// lexicographically.
struct NerveComplex {
  int element_count = 0;
  std::vector<std::vector<int>> simplices;

  int dimension() const;  // largest simplex dimension, -1 when empty
};

// Componentwise evaluation of the transmitter fields at p.
SignalProfileSample profile(const std::vector<WaveField>& fields,
                            const GraphPoint& p);

// Smallest signal-space separation over sample pairs whose graph distance
// exceeds rho; +infinity when no pair qualifies.  A strictly positive margin
// is numerical evidence that the profile embeds the sampled set.  Throws
// "insufficient samples" for fewer than two samples.  The pairwise scan is
// OpenMP-parallel; the _serial variant is the reference implementation.
double injectivity_margin(const MetricGraph& g,
                          const std::vector<SignalProfileSample>& samples,
                          double rho);
double injectivity_margin_serial(const MetricGraph& g,
                                 const std::vector<SignalProfileSample>& samples,
                                 double rho);

// Single-linkage clustering of the signal values at link_radius.  The clusters
// estimate the path components of the region: samples on one component chain
// together through small signal steps, while samples on distinct components
// stay apart whenever the profile separates them.  Returns index lists into
// `samples` (samples outside the region are left out); clusters are sorted by
// smallest member.  link_radius <= 0 selects three times the largest signal
// step between neighboring samples.  Throws "undersampled region" when some
// interval of the region contains no sample or when neighboring samples along
// an interval are link_radius/2 or more apart in signal space.  Callers are
// responsible for sampling up to the interval ends so that chains continue
// across vertices interior to the region.
std::vector<std::vector<int>> components_via_signal(
    const MetricGraph& g, const Region& region,
    const std::vector<SignalProfileSample>& samples, double link_radius);

// One refinement move: given a good cover and a contractible region w not
// contained in its union, cut v = w intersect (union of the cover) out of
// every element, then rebuild the overlaps with small balls around the
// boundary points of v (radius a third of the separation scale delta; when
// the boundary holds fewer than two points, delta falls back to half the
// distance between the cover remainder and the w remainder).  Returns the
// path components of v, of the trimmed w, and of every trimmed element, in
// that order.  Throws "W already covered" when w adds nothing and "V
// component not acyclic" when a component of v carries a cycle (a symptom of
// upstream thresholding failure).
Cover refine_step(const Cover& good, const Region& w);

// Fold refine_step over a list of contractible regions, starting from the
// first.  Regions already inside the running union are skipped with a note
// appended to *notes (when given).  The result is a good cover of the union.
Cover refine_all(const MetricGraph& g, const std::vector<Region>& regions,
                 std::vector<std::string>* notes = nullptr);

// Good-cover diagnostics: every element and every nonempty finite
// intersection of elements must be connected and acyclic.  Returns one line
// per violation; empty means the cover is good.
std::vector<std::string> verify_good_cover(const Cover& c);

// Nerve of the cover by exhaustive nonempty-intersection search (arity capped
// only by the cover size), and its homology over the rationals.
NerveComplex nerve(const Cover& c);
std::pair<int, int> simplicial_betti(const NerveComplex& n);

}  // namespace qgr
