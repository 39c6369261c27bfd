#include "qgr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "qgr/tolerances.hpp"

namespace qgr {

const Edge& MetricGraph::edge(int id) const {
  for (const auto& e : edges)
    if (e.id == id) return e;
  throw std::runtime_error("unknown edge id " + std::to_string(id));
}

bool MetricGraph::has_vertex(int v) const {
  return std::find(vertices.begin(), vertices.end(), v) != vertices.end();
}

int MetricGraph::degree(int v) const {
  int d = 0;
  for (const auto& e : edges) {
    if (e.v0 == v) ++d;
    if (e.v1 == v) ++d;
  }
  return d;
}

std::vector<std::pair<int, int>> MetricGraph::incident_ends(int v) const {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : edges) {
    if (e.v0 == v) out.emplace_back(e.id, 0);
    if (e.v1 == v) out.emplace_back(e.id, 1);
  }
  return out;
}

double MetricGraph::extent(int edge_id) const {
  const Edge& e = edge(edge_id);
  return e.kind == EdgeKind::Open ? truncation : e.length;
}

int end_vertex(const MetricGraph& g, int edge_id, int end) {
  const Edge& e = g.edge(edge_id);
  return end == 0 ? e.v0 : e.v1;
}

std::vector<std::string> validate(const MetricGraph& g) {
  std::vector<std::string> diags;
  std::set<int> vset(g.vertices.begin(), g.vertices.end());
  if (vset.size() != g.vertices.size()) diags.push_back("duplicate vertex id");
  if (g.edges.empty()) diags.push_back("graph has no edges");
  std::set<int> eids;
  for (const auto& e : g.edges) {
    if (!eids.insert(e.id).second) diags.push_back("duplicate edge id");
    switch (e.kind) {
      case EdgeKind::Open:
        if (e.v1 != -1) diags.push_back("open edge endpoint count");
        if (std::isfinite(e.length)) diags.push_back("open edge with finite length");
        if (!vset.count(e.v0)) diags.push_back("edge references unknown vertex");
        break;
      case EdgeKind::Loop:
        if (e.v0 != e.v1) diags.push_back("loop endpoints differ");
        [[fallthrough]];
      case EdgeKind::Segment:
      case EdgeKind::Closed:
        if (!vset.count(e.v0) || !vset.count(e.v1))
          diags.push_back("edge references unknown vertex");
        if (!(e.length > 0.0) || !std::isfinite(e.length))
          diags.push_back("nonpositive length");
        break;
    }
    if (e.kind == EdgeKind::Segment && e.v0 == e.v1)
      diags.push_back("segment endpoints coincide");
  }
  for (int v : g.vertices) {
    int d = g.degree(v);
    if (d == 0) diags.push_back("isolated vertex " + std::to_string(v));
  }
  // Kind consistency with vertex degrees: a finite non-loop edge touching a
  // degree-1 vertex is a closed edge; otherwise it is a segment.
  for (const auto& e : g.edges) {
    if (e.kind == EdgeKind::Segment || e.kind == EdgeKind::Closed) {
      bool tip = g.degree(e.v0) == 1 || g.degree(e.v1) == 1;
      if (tip && e.kind == EdgeKind::Segment)
        diags.push_back("segment touches degree-1 vertex (closed edge expected)");
      if (!tip && e.kind == EdgeKind::Closed)
        diags.push_back("closed edge lacks degree-1 vertex");
    }
  }
  return diags;
}

namespace {
struct UnionFind {
  std::map<int, int> parent;
  int find(int x) {
    auto it = parent.find(x);
    if (it == parent.end()) {
      parent[x] = x;
      return x;
    }
    if (it->second != x) it->second = find(it->second);
    return it->second;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};
}  // namespace

std::pair<int, int> betti(const MetricGraph& g) {
  UnionFind uf;
  for (int v : g.vertices) uf.find(v);
  int finite_edges = 0;
  for (const auto& e : g.edges) {
    if (e.kind == EdgeKind::Open) {
      uf.find(e.v0);
      continue;
    }
    ++finite_edges;
    uf.unite(e.v0, e.v1);
  }
  std::set<int> roots;
  for (int v : g.vertices) roots.insert(uf.find(v));
  int b0 = static_cast<int>(roots.size());
  int b1 = finite_edges - static_cast<int>(g.vertices.size()) + b0;
  return {b0, std::max(0, b1)};
}

std::vector<int> spanning_tree(const MetricGraph& g) {
  if (betti(g).first != 1) throw std::runtime_error("disconnected graph");
  // Grow a tree over segment edges so that every prefix is itself a tree.
  std::set<int> in_tree_vertices;
  std::vector<int> order;
  std::set<int> used;
  std::vector<const Edge*> segments;
  for (const auto& e : g.edges)
    if (e.kind == EdgeKind::Segment) segments.push_back(&e);
  if (segments.empty()) return order;
  in_tree_vertices.insert(segments.front()->v0);
  bool grew = true;
  while (grew) {
    grew = false;
    for (const Edge* e : segments) {
      if (used.count(e->id)) continue;
      bool h0 = in_tree_vertices.count(e->v0) > 0;
      bool h1 = in_tree_vertices.count(e->v1) > 0;
      if (h0 == h1) continue;  // either both in (cycle edge) or both out (wait)
      used.insert(e->id);
      order.push_back(e->id);
      in_tree_vertices.insert(e->v0);
      in_tree_vertices.insert(e->v1);
      grew = true;
    }
  }
  // A connected graph always lets the segment tree reach every
  // segment-incident vertex: paths between such vertices can be shortened to
  // pure segment paths (loops are detours, closed/open edges are dead ends).
  for (const Edge* e : segments)
    if (!in_tree_vertices.count(e->v0) || !in_tree_vertices.count(e->v1))
      throw std::runtime_error("disconnected graph");
  return order;
}

EdgeCollapseMap collapse_edge(const MetricGraph& g, int edge_id) {
  const Edge& e = g.edge(edge_id);
  if (e.kind == EdgeKind::Open) throw std::runtime_error("cannot collapse open edge");
  EdgeCollapseMap m;
  m.source = g;
  m.collapsed_edge = edge_id;
  for (int v : g.vertices) m.vertex_relabel[v] = v;

  MetricGraph t = g;
  t.edges.erase(std::remove_if(t.edges.begin(), t.edges.end(),
                               [&](const Edge& x) { return x.id == edge_id; }),
                t.edges.end());
  if (e.kind != EdgeKind::Loop) {
    int keep = e.v0, drop = e.v1;
    for (auto& x : t.edges) {
      if (x.v0 == drop) x.v0 = keep;
      if (x.v1 == drop) x.v1 = keep;
    }
    t.vertices.erase(std::remove(t.vertices.begin(), t.vertices.end(), drop),
                     t.vertices.end());
    m.vertex_relabel[drop] = keep;
  }
  // Re-derive kinds that the merge may have changed.
  for (auto& x : t.edges) {
    if (x.kind == EdgeKind::Open) continue;
    if (x.v0 == x.v1) {
      x.kind = EdgeKind::Loop;
    } else if (t.degree(x.v0) == 1 || t.degree(x.v1) == 1) {
      x.kind = EdgeKind::Closed;
    } else {
      x.kind = EdgeKind::Segment;
    }
  }
  m.target = std::move(t);
  return m;
}

GraphPoint canonical(const MetricGraph& g, const GraphPoint& p) {
  if (p.is_vertex()) return p;
  const Edge& e = g.edge(p.edge);
  double tol = tols().merge;
  if (p.offset <= tol) return GraphPoint::at_vertex(e.v0);
  if (e.kind != EdgeKind::Open && p.offset >= e.length - tol)
    return GraphPoint::at_vertex(e.v1);
  return p;
}

namespace {
// All-pairs shortest vertex distances by Dijkstra from each vertex (graphs in
// scope are small; clarity over asymptotics).
std::map<int, double> dijkstra(const MetricGraph& g, int src) {
  std::map<int, double> dist;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v] + 1e-15) continue;
    for (const auto& e : g.edges) {
      if (e.kind == EdgeKind::Open) continue;
      int other = -1;
      if (e.v0 == v) other = e.v1;
      else if (e.v1 == v) other = e.v0;
      else continue;
      double nd = d + e.length;
      auto it = dist.find(other);
      if (it == dist.end() || nd < it->second - 1e-15) {
        dist[other] = nd;
        pq.push({nd, other});
      }
    }
  }
  return dist;
}

// Endpoint "ports" of a point: (vertex, distance to it along the edge).
std::vector<std::pair<int, double>> ports(const MetricGraph& g, const GraphPoint& p) {
  if (p.is_vertex()) return {{p.vertex, 0.0}};
  const Edge& e = g.edge(p.edge);
  std::vector<std::pair<int, double>> out{{e.v0, p.offset}};
  if (e.kind != EdgeKind::Open) out.push_back({e.v1, e.length - p.offset});
  return out;
}
}  // namespace

double graph_distance(const MetricGraph& g, const GraphPoint& p0, const GraphPoint& q0) {
  GraphPoint p = canonical(g, p0), q = canonical(g, q0);
  double best = kInf;
  if (!p.is_vertex() && !q.is_vertex() && p.edge == q.edge)
    best = std::abs(p.offset - q.offset);
  auto pp = ports(g, p);
  auto qq = ports(g, q);
  for (auto& [pv, pd] : pp) {
    auto dist = dijkstra(g, pv);
    for (auto& [qv, qd] : qq) {
      auto it = dist.find(qv);
      if (it != dist.end()) best = std::min(best, pd + it->second + qd);
    }
  }
  return best;
}

MetricGraph graph_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  MetricGraph g;
  for (const auto& v : j.at("vertices")) g.vertices.push_back(v.get<int>());
  std::sort(g.vertices.begin(), g.vertices.end());
  if (j.contains("truncation")) g.truncation = j["truncation"].get<double>();
  for (const auto& ej : j.at("edges")) {
    Edge e;
    e.id = ej.at("id").get<int>();
    auto vv = ej.at("v");
    e.v0 = vv.at(0).get<int>();
    e.v1 = vv.size() > 1 ? vv.at(1).get<int>() : -1;
    if (ej.at("length").is_string()) {
      e.length = kInf;
    } else {
      e.length = ej.at("length").get<double>();
    }
    std::string k = ej.at("kind").get<std::string>();
    if (k == "segment") e.kind = EdgeKind::Segment;
    else if (k == "loop") e.kind = EdgeKind::Loop;
    else if (k == "closed") e.kind = EdgeKind::Closed;
    else if (k == "open") e.kind = EdgeKind::Open;
    else throw std::runtime_error("unknown edge kind: " + k);
    g.edges.push_back(e);
  }
  return g;
}

std::string graph_to_json_text(const MetricGraph& g) {
  nlohmann::ordered_json j;
  j["vertices"] = g.vertices;
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) {
    nlohmann::ordered_json ej;
    ej["id"] = e.id;
    if (e.kind == EdgeKind::Open) {
      ej["v"] = {e.v0};
      ej["length"] = "inf";
    } else {
      ej["v"] = {e.v0, e.v1};
      ej["length"] = e.length;
    }
    switch (e.kind) {
      case EdgeKind::Segment: ej["kind"] = "segment"; break;
      case EdgeKind::Loop: ej["kind"] = "loop"; break;
      case EdgeKind::Closed: ej["kind"] = "closed"; break;
      case EdgeKind::Open: ej["kind"] = "open"; break;
    }
    j["edges"].push_back(ej);
  }
  j["truncation"] = g.truncation;
  return j.dump(2);
}

}  // namespace qgr
