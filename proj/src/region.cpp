#include "qgr/region.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qgr/tolerances.hpp"

namespace qgr {

namespace {

std::vector<Interval> normalize(std::vector<Interval> v, double extent) {
  double tol = tols().merge;
  for (auto& i : v) {
    i.first = std::max(0.0, i.first);
    i.second = std::min(extent, i.second);
  }
  v.erase(std::remove_if(v.begin(), v.end(),
                         [&](const Interval& i) { return i.second - i.first <= tol; }),
          v.end());
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto& i : v) {
    if (!out.empty() && i.first <= out.back().second + tol) {
      out.back().second = std::max(out.back().second, i.second);
    } else {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<Interval> intersect_lists(const std::vector<Interval>& a,
                                      const std::vector<Interval>& b) {
  std::vector<Interval> out;
  for (const auto& x : a)
    for (const auto& y : b) {
      double lo = std::max(x.first, y.first);
      double hi = std::min(x.second, y.second);
      if (hi > lo) out.push_back({lo, hi});
    }
  return out;
}

std::vector<Interval> subtract_lists(const std::vector<Interval>& a,
                                     const std::vector<Interval>& b) {
  std::vector<Interval> cur = a;
  for (const auto& y : b) {
    std::vector<Interval> next;
    for (const auto& x : cur) {
      if (y.second <= x.first || y.first >= x.second) {
        next.push_back(x);
        continue;
      }
      if (y.first > x.first) next.push_back({x.first, y.first});
      if (y.second < x.second) next.push_back({y.second, x.second});
    }
    cur = std::move(next);
  }
  return cur;
}

// True when some interval of `list` abuts the given end of an edge with the
// stated extent (end 0 = offset 0, end 1 = offset extent).
bool abuts(const std::vector<Interval>& list, int end, double extent) {
  double tol = tols().merge;
  for (const auto& i : list) {
    if (end == 0 && i.first <= tol) return true;
    if (end == 1 && i.second >= extent - tol) return true;
  }
  return false;
}

// Drop vertex flags whose full neighborhood is not present (keeps regions open).
void enforce_openness(const MetricGraph& g, Region& r) {
  for (auto it = r.vertices.begin(); it != r.vertices.end();) {
    bool ok = true;
    for (auto [eid, end] : g.incident_ends(*it)) {
      auto lit = r.intervals.find(eid);
      const std::vector<Interval> empty;
      const auto& list = lit == r.intervals.end() ? empty : lit->second;
      if (!abuts(list, end, g.extent(eid))) {
        ok = false;
        break;
      }
    }
    it = ok ? std::next(it) : r.vertices.erase(it);
  }
}

void tidy(const MetricGraph& g, Region& r) {
  for (auto it = r.intervals.begin(); it != r.intervals.end();) {
    it->second = normalize(it->second, g.extent(it->first));
    it = it->second.empty() ? r.intervals.erase(it) : std::next(it);
  }
  enforce_openness(g, r);
}

}  // namespace

bool Region::empty() const {
  if (!vertices.empty()) return false;
  for (const auto& [e, v] : intervals)
    if (!v.empty()) return false;
  return true;
}

double Region::total_length() const {
  double s = 0.0;
  for (const auto& [e, v] : intervals)
    for (const auto& i : v) s += i.second - i.first;
  return s;
}

Region region_whole(const MetricGraph& g) {
  Region r;
  for (const auto& e : g.edges) r.intervals[e.id] = {{0.0, g.extent(e.id)}};
  for (int v : g.vertices) r.vertices.insert(v);
  tidy(g, r);
  return r;
}

Region region_union(const MetricGraph& g, const Region& a, const Region& b) {
  Region r = a;
  for (const auto& [e, v] : b.intervals) {
    auto& dst = r.intervals[e];
    dst.insert(dst.end(), v.begin(), v.end());
  }
  r.vertices.insert(b.vertices.begin(), b.vertices.end());
  tidy(g, r);
  return r;
}

Region region_intersection(const MetricGraph& g, const Region& a, const Region& b) {
  Region r;
  for (const auto& [e, v] : a.intervals) {
    auto it = b.intervals.find(e);
    if (it == b.intervals.end()) continue;
    auto x = intersect_lists(v, it->second);
    if (!x.empty()) r.intervals[e] = std::move(x);
  }
  for (int v : a.vertices)
    if (b.vertices.count(v)) r.vertices.insert(v);
  tidy(g, r);
  return r;
}

Region region_difference(const MetricGraph& g, const Region& a, const Region& b) {
  Region r;
  for (const auto& [e, v] : a.intervals) {
    auto it = b.intervals.find(e);
    auto x = it == b.intervals.end() ? v : subtract_lists(v, it->second);
    if (!x.empty()) r.intervals[e] = std::move(x);
  }
  for (int v : a.vertices)
    if (!b.vertices.count(v)) r.vertices.insert(v);
  tidy(g, r);
  return r;
}

namespace {
struct PieceIndex {
  // node ids: intervals first, then member vertices
  std::vector<std::pair<int, int>> interval_nodes;  // (edge id, interval index)
  std::map<int, int> vertex_node;                   // vertex id -> node id
  int n_nodes = 0;
};

PieceIndex index_pieces(const Region& r) {
  PieceIndex ix;
  for (const auto& [e, list] : r.intervals)
    for (size_t i = 0; i < list.size(); ++i) ix.interval_nodes.push_back({e, (int)i});
  int n = static_cast<int>(ix.interval_nodes.size());
  for (int v : r.vertices) ix.vertex_node[v] = n++;
  ix.n_nodes = n;
  return ix;
}

struct DSU {
  std::vector<int> p;
  explicit DSU(int n) : p(n) {
    for (int i = 0; i < n; ++i) p[i] = i;
  }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  void unite(int a, int b) { p[find(a)] = find(b); }
};

// Enumerate interval-end-to-member-vertex incidences of the region.
std::vector<std::pair<int, int>> incidences(const MetricGraph& g, const Region& r,
                                            const PieceIndex& ix) {
  double tol = tols().merge;
  std::vector<std::pair<int, int>> out;  // (interval node, vertex node)
  for (size_t n = 0; n < ix.interval_nodes.size(); ++n) {
    auto [eid, k] = ix.interval_nodes[n];
    const Edge& e = g.edge(eid);
    const Interval& i = r.intervals.at(eid)[k];
    if (i.first <= tol) {
      auto it = ix.vertex_node.find(e.v0);
      if (it != ix.vertex_node.end()) out.push_back({(int)n, it->second});
    }
    if (e.kind != EdgeKind::Open && i.second >= e.length - tol) {
      auto it = ix.vertex_node.find(e.v1);
      if (it != ix.vertex_node.end()) out.push_back({(int)n, it->second});
    }
  }
  return out;
}
}  // namespace

std::pair<int, int> betti(const MetricGraph& g, const Region& r) {
  PieceIndex ix = index_pieces(r);
  if (ix.n_nodes == 0) return {0, 0};
  DSU dsu(ix.n_nodes);
  auto inc = incidences(g, r, ix);
  for (auto [a, b] : inc) dsu.unite(a, b);
  std::set<int> roots;
  for (int i = 0; i < ix.n_nodes; ++i) roots.insert(dsu.find(i));
  int b0 = static_cast<int>(roots.size());
  int b1 = static_cast<int>(inc.size()) - ix.n_nodes + b0;
  return {b0, std::max(0, b1)};
}

std::vector<Region> region_components(const MetricGraph& g, const Region& r) {
  PieceIndex ix = index_pieces(r);
  if (ix.n_nodes == 0) return {};
  DSU dsu(ix.n_nodes);
  for (auto [a, b] : incidences(g, r, ix)) dsu.unite(a, b);
  std::map<int, Region> comps;
  for (size_t n = 0; n < ix.interval_nodes.size(); ++n) {
    auto [eid, k] = ix.interval_nodes[n];
    comps[dsu.find((int)n)].intervals[eid].push_back(r.intervals.at(eid)[k]);
  }
  for (auto& [v, node] : ix.vertex_node) comps[dsu.find(node)].vertices.insert(v);
  std::vector<Region> out;
  for (auto& [root, reg] : comps) {
    tidy(g, reg);
    if (!reg.empty()) out.push_back(std::move(reg));
  }
  return out;
}

std::vector<GraphPoint> boundary_points(const MetricGraph& g, const Region& r) {
  double tol = tols().merge;
  std::vector<GraphPoint> out;
  auto push_unique = [&](const GraphPoint& p) {
    for (const auto& q : out) {
      if (p.is_vertex() && q.is_vertex() && p.vertex == q.vertex) return;
      if (!p.is_vertex() && !q.is_vertex() && p.edge == q.edge &&
          std::abs(p.offset - q.offset) <= tol)
        return;
    }
    out.push_back(p);
  };
  for (const auto& [eid, list] : r.intervals) {
    const Edge& e = g.edge(eid);
    double extent = g.extent(eid);
    for (const auto& i : list) {
      if (i.first > tol) {
        push_unique(GraphPoint::on_edge(eid, i.first));
      } else if (!r.vertices.count(e.v0)) {
        push_unique(GraphPoint::at_vertex(e.v0));
      }
      if (i.second < extent - tol) {
        push_unique(GraphPoint::on_edge(eid, i.second));
      } else if (e.kind != EdgeKind::Open && !r.vertices.count(e.v1)) {
        push_unique(GraphPoint::at_vertex(e.v1));
      }
      // The truncation end of an open edge is a bookkeeping horizon, not a
      // topological boundary, so it contributes no boundary point.
    }
  }
  return out;
}

Region ball(const MetricGraph& g, const GraphPoint& center0, double radius) {
  GraphPoint center = canonical(g, center0);
  Region r;
  // Distance from the center to every vertex.
  std::map<int, double> dv;
  for (int v : g.vertices)
    dv[v] = graph_distance(g, center, GraphPoint::at_vertex(v));
  for (const auto& e : g.edges) {
    double extent = g.extent(e.id);
    std::vector<Interval> parts;
    double d0 = dv[e.v0];
    if (radius > d0) parts.push_back({0.0, radius - d0});
    if (e.kind != EdgeKind::Open) {
      double d1 = dv[e.v1];
      if (radius > d1) parts.push_back({e.length - (radius - d1), e.length});
    }
    if (!center.is_vertex() && center.edge == e.id)
      parts.push_back({center.offset - radius, center.offset + radius});
    parts = normalize(parts, extent);
    if (!parts.empty()) r.intervals[e.id] = std::move(parts);
  }
  for (int v : g.vertices)
    if (dv[v] < radius) r.vertices.insert(v);
  tidy(g, r);
  return r;
}

bool region_contains(const MetricGraph& g, const Region& r, const GraphPoint& p0) {
  GraphPoint p = canonical(g, p0);
  if (p.is_vertex()) return r.vertices.count(p.vertex) > 0;
  auto it = r.intervals.find(p.edge);
  if (it == r.intervals.end()) return false;
  for (const auto& i : it->second)
    if (p.offset > i.first && p.offset < i.second) return true;
  return false;
}

double region_distance(const MetricGraph& g, const Region& a, const Region& b) {
  if (!region_intersection(g, a, b).empty()) return 0.0;
  // Representative closure points of a region: interval endpoints and member
  // vertices.  For disjoint regions the infimum distance is attained between
  // closure endpoints (paths exit interior intervals through their ends).
  auto pieces = [&](const Region& r) {
    std::vector<GraphPoint> pts;
    for (const auto& [eid, list] : r.intervals)
      for (const auto& i : list) {
        pts.push_back(canonical(g, GraphPoint::on_edge(eid, i.first)));
        pts.push_back(canonical(g, GraphPoint::on_edge(eid, i.second)));
      }
    for (int v : r.vertices) pts.push_back(GraphPoint::at_vertex(v));
    return pts;
  };
  double best = kInf;
  // Same-edge interval gaps need interval arithmetic rather than endpoint
  // distance (two intervals on one edge are closest across their gap).
  for (const auto& [eid, la] : a.intervals) {
    auto it = b.intervals.find(eid);
    if (it == b.intervals.end()) continue;
    for (const auto& x : la)
      for (const auto& y : it->second) {
        double gap = std::max({0.0, y.first - x.second, x.first - y.second});
        best = std::min(best, gap);
      }
  }
  for (const auto& p : pieces(a))
    for (const auto& q : pieces(b)) best = std::min(best, graph_distance(g, p, q));
  return best;
}

std::vector<std::string> coverage_gaps(const MetricGraph& g, const Region& target,
                                       const Region& covered, double gap_tol) {
  Region rest = region_difference(g, target, covered);
  std::vector<std::string> out;
  for (const auto& [eid, list] : rest.intervals)
    for (const auto& i : list)
      if (i.second - i.first > gap_tol) {
        std::ostringstream s;
        s << "edge " << eid << ": (" << i.first << ", " << i.second << ")";
        out.push_back(s.str());
      }
  // A missing vertex is a point gap: the open-set difference collapses it, so
  // test membership directly rather than through the tidied remainder.
  for (int v : target.vertices)
    if (!covered.vertices.count(v)) out.push_back("vertex " + std::to_string(v));
  return out;
}

}  // namespace qgr
