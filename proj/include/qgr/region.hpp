#pragma once

#include <map>
#include <set>
#include <utility>
#include <vector>

#include "qgr/graph.hpp"

namespace qgr {

using Interval = std::pair<double, double>;  // open interval (a, b), a < b

// An open subset of a metric graph: per edge a sorted list of disjoint open
// intervals in edge coordinates, plus explicit vertex-membership flags.  A
// member vertex implies every incident edge carries an interval abutting that
// endpoint (the set is open).  Set operations canonicalize with the merge
// tolerance; a vertex whose neighborhood is not fully retained by an operation
// loses its membership flag, keeping results open (the refinement algorithm
// restores such boundary points explicitly with small balls).
struct Region {
  std::map<int, std::vector<Interval>> intervals;  // edge id -> intervals
  std::set<int> vertices;

  bool empty() const;
  double total_length() const;
};

Region region_whole(const MetricGraph& g);  // every finite edge + open stubs
Region region_union(const MetricGraph& g, const Region& a, const Region& b);
Region region_intersection(const MetricGraph& g, const Region& a, const Region& b);
Region region_difference(const MetricGraph& g, const Region& a, const Region& b);
std::vector<Region> region_components(const MetricGraph& g, const Region& r);
std::vector<GraphPoint> boundary_points(const MetricGraph& g, const Region& r);
Region ball(const MetricGraph& g, const GraphPoint& center, double radius);
bool region_contains(const MetricGraph& g, const Region& r, const GraphPoint& p);

// Connected components / independent cycles of the subset as a 1-complex.
std::pair<int, int> betti(const MetricGraph& g, const Region& r);

// Exact infimum of d(x, y) over x in a, y in b (0 if they meet).
double region_distance(const MetricGraph& g, const Region& a, const Region& b);

// List of maximal uncovered subintervals of `target` not met by `covered`
// (ignoring gaps shorter than the merge tolerance) plus any vertex of `target`
// that no covering region owns; used for coverage reports.  Vertex gaps matter
// even though they have zero length: a union that misses a junction point is
// disconnected there no matter how closely the intervals approach it.
std::vector<std::string> coverage_gaps(const MetricGraph& g, const Region& target,
                                       const Region& covered, double gap_tol);

}  // namespace qgr
