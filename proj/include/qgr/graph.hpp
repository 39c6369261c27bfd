#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace qgr {

// Edge taxonomy for metric graphs:
//   Segment - finite edge with two distinct endpoints, both of degree >= 2.
//   Loop    - finite edge whose endpoints coincide.
//   Closed  - finite edge with one endpoint of degree 1 (a dead-end tip).
//   Open    - half-infinite ray attached at a single vertex.
enum class EdgeKind { Segment, Loop, Closed, Open };

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  int id = -1;
  int v0 = -1;          // orientation origin (offset 0)
  int v1 = -1;          // far endpoint; -1 for open edges
  double length = 0.0;  // +inf for open edges
  EdgeKind kind = EdgeKind::Segment;
};

// A point of the graph, either strictly inside an edge (edge >= 0, vertex < 0)
// or a vertex (vertex >= 0, edge < 0).  Offsets within the merge tolerance of
// an endpoint canonicalize to the vertex form.
struct GraphPoint {
  int edge = -1;
  double offset = 0.0;
  int vertex = -1;

  static GraphPoint at_vertex(int v) { return GraphPoint{-1, 0.0, v}; }
  static GraphPoint on_edge(int e, double x) { return GraphPoint{e, x, -1}; }
  bool is_vertex() const { return vertex >= 0; }
};

class MetricGraph {
 public:
  std::vector<int> vertices;  // sorted, unique
  std::vector<Edge> edges;    // ids unique
  // Finite sampling extent for open edges (plotting / region bookkeeping only;
  // analytic operations treat open edges as genuinely infinite).
  double truncation = 10.0;

  const Edge& edge(int id) const;
  bool has_vertex(int v) const;
  int degree(int v) const;            // loops count twice
  // Ends of finite edges incident to v as (edge id, end index 0/1) pairs;
  // open edges contribute their single end (end index 0).
  std::vector<std::pair<int, int>> incident_ends(int v) const;
  // Usable coordinate extent of an edge: length for finite edges, truncation
  // for open ones.
  double extent(int edge_id) const;
};

struct EdgeCollapseMap {
  MetricGraph source;
  MetricGraph target;
  int collapsed_edge = -1;
  std::map<int, int> vertex_relabel;  // source vertex id -> target vertex id
};

// --- operations -------------------------------------------------------------

// Invariant diagnostics; empty result means the graph is valid.
std::vector<std::string> validate(const MetricGraph& g);

// Connected components / independent cycles.  Open rays are contractible and
// do not enter the cycle count: b1 = (#finite edges) - (#vertices) + b0.
std::pair<int, int> betti(const MetricGraph& g);

// Incremental spanning tree of the segment edges: each prefix of the returned
// edge-id list is a tree.  Throws "disconnected graph" if g is not connected.
// Vertices with no incident segment (bouquet centers, tips) need no tree edge.
std::vector<int> spanning_tree(const MetricGraph& g);

// Collapse a segment/closed edge (merging its endpoints) or delete a loop.
// Throws "cannot collapse open edge".
EdgeCollapseMap collapse_edge(const MetricGraph& g, int edge_id);

// Shortest-path metric.  Returns +infinity across components.
double graph_distance(const MetricGraph& g, const GraphPoint& p, const GraphPoint& q);

// Snap offsets at edge endpoints (within merge tolerance) to vertex form.
GraphPoint canonical(const MetricGraph& g, const GraphPoint& p);

// Position helpers used throughout: the vertex at a given end of a finite
// edge, and the endpoint offsets of a point as (vertex, distance) ports.
int end_vertex(const MetricGraph& g, int edge_id, int end);

// JSON schema: {"vertices":[ids],
//               "edges":[{"id":int,"v":[a,b]|[a],"length":num|"inf","kind":str}],
//               "truncation":num (optional)}
MetricGraph graph_from_json_text(const std::string& text);
std::string graph_to_json_text(const MetricGraph& g);

}  // namespace qgr
