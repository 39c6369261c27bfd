#include "qgr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>

namespace qgr {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kPivotTol = 1e-12;

EdgeDir flip(const EdgeDir& d) { return {d.first, d.second ^ 1}; }

Complex arrival(const SectionObservation& obs, const EdgeDir& d) {
  auto it = obs.incoming.find(d);
  if (it == obs.incoming.end()) throw std::invalid_argument("incomplete observation");
  return it->second;
}

// Kirchhoff star average (2/deg) * sum of arrivals at a vertex; the common
// value every end's arrival + launch pair adds up to.
Complex star_sum(const MetricGraph& g, const SectionObservation& obs, int v) {
  auto dirs = incoming_directions(g, v);
  Complex s = 0.0;
  for (const EdgeDir& d : dirs) s += arrival(obs, d);
  return 2.0 / static_cast<double>(dirs.size()) * s;
}

// Launch value leaving v along direction d: the coding output paired with the
// arrival on the same physical edge end.
Complex launch(const MetricGraph& g, const SectionObservation& obs, int v,
               const EdgeDir& d) {
  return star_sum(g, obs, v) - arrival(obs, flip(d));
}

struct Chain {
  std::vector<EdgeDir> steps;  // directed walk away from va
  int va = -1;
  int vb = -1;
  EdgeKind kind = EdgeKind::Segment;
};

// Walk from a sensor vertex through degree-2 vertices (whose junction coding
// passes values through unchanged) until another sensor, a ray, or the start
// vertex is reached.
Chain walk_chain(const MetricGraph& g, int v, int eid, int end) {
  Chain c;
  c.va = v;
  int cur = eid;
  int in_end = end;
  for (;;) {
    const Edge& e = g.edge(cur);
    c.steps.push_back({cur, in_end == 0 ? 1 : 0});
    if (e.kind == EdgeKind::Open) {
      c.kind = EdgeKind::Open;
      return c;
    }
    int far_end = 1 - in_end;
    int far_v = far_end == 0 ? e.v0 : e.v1;
    if (g.degree(far_v) != 2) {
      c.vb = far_v;
      c.kind = far_v == c.va ? EdgeKind::Loop : EdgeKind::Segment;
      return c;
    }
    for (auto [ne, nend] : g.incident_ends(far_v))
      if (!(ne == cur && nend == far_end)) {
        cur = ne;
        in_end = nend;
        break;
      }
  }
}

// Maximal chains between sensor vertices (degree != 2), each original edge
// consumed exactly once.  Components without any sensor (bare circles) leave
// edges unconsumed: their geometry is unobservable.
std::vector<Chain> reduce_chains(const MetricGraph& g, std::vector<int>* sensors_out) {
  std::vector<int> sensors;
  for (int v : g.vertices)
    if (g.degree(v) != 2) sensors.push_back(v);
  if (sensors.empty() && !g.edges.empty()) throw std::runtime_error("degree-2 ambiguity");
  std::set<int> consumed;
  std::vector<Chain> chains;
  for (int v : sensors)
    for (auto [eid, end] : g.incident_ends(v)) {
      if (consumed.count(eid)) continue;
      Chain c = walk_chain(g, v, eid, end);
      for (const EdgeDir& s : c.steps) consumed.insert(s.first);
      chains.push_back(std::move(c));
    }
  for (const Edge& e : g.edges)
    if (!consumed.count(e.id)) throw std::runtime_error("degree-2 ambiguity");
  if (sensors_out) *sensors_out = sensors;
  return chains;
}

// The reduced graph: one vertex per sensor, one edge per chain.  Lengths are
// placeholders; only the topology feeds the spanning-tree ordering.
MetricGraph reduced_graph(const std::vector<int>& sensors, const std::vector<Chain>& chains) {
  MetricGraph h;
  h.vertices = sensors;
  std::map<int, int> hdeg;
  for (const Chain& c : chains) {
    ++hdeg[c.va];
    if (c.kind == EdgeKind::Loop) ++hdeg[c.va];
    if (c.kind == EdgeKind::Segment) ++hdeg[c.vb];
  }
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const Chain& c = chains[i];
    Edge e;
    e.id = static_cast<int>(i);
    e.v0 = c.va;
    if (c.kind == EdgeKind::Open) {
      e.v1 = -1;
      e.kind = EdgeKind::Open;
      e.length = std::numeric_limits<double>::infinity();
    } else {
      e.v1 = c.vb;
      e.length = 1.0;
      if (c.kind == EdgeKind::Loop)
        e.kind = EdgeKind::Loop;
      else
        e.kind = (hdeg[c.va] == 1 || hdeg[c.vb] == 1) ? EdgeKind::Closed
                                                      : EdgeKind::Segment;
    }
    h.edges.push_back(e);
  }
  return h;
}

LengthClass length_from_endo(const Complex& e_val, const Wavenumber& k) {
  LengthClass lc;
  if (k.alpha > 0.0) {
    lc.base = -std::log(std::abs(e_val)) / k.alpha;
    lc.modulus = 0.0;
  } else {
    lc.modulus = 2.0 * kPi / k.kprime;
    double b = std::arg(e_val) / k.kprime;
    while (b <= 1e-12) b += lc.modulus;
    while (b > lc.modulus + 1e-12) b -= lc.modulus;
    lc.base = b;
  }
  return lc;
}

}  // namespace

SectionObservation observe_field(const WaveField& f) {
  Complex ik = Complex(0.0, 1.0) * f.k.k();
  SectionObservation obs;
  for (int v : f.graph.vertices) {
    for (const EdgeDir& d : incoming_directions(f.graph, v)) {
      const Edge& e = f.graph.edge(d.first);
      auto it = f.waves.find(d.first);
      if (it == f.waves.end()) continue;
      const auto& pieces = it->second;
      if (d.second == 1) {
        // arrives at the v1 side, x = length, traveling +x
        for (const WavePiece& p : pieces)
          if (std::abs(p.x1 - e.length) < 1e-9) {
            obs.incoming[d] = p.w.c_plus * std::exp(ik * e.length);
            break;
          }
      } else {
        // arrives at the v0 side, x = 0, traveling -x
        for (const WavePiece& p : pieces)
          if (p.x0 == 0.0) {
            obs.incoming[d] = p.w.c_minus;
            break;
          }
      }
    }
  }
  return obs;
}

RecoveredGeometry extract_geometry(const MetricGraph& g, const SectionObservation& obs,
                                   const Wavenumber& k) {
  if (!(k.kprime > 0.0)) throw std::invalid_argument("nonpositive wavenumber");
  double scale = 0.0;
  for (const auto& [d, val] : obs.incoming) scale = std::max(scale, std::abs(val));
  if (!(scale > 0.0)) throw std::runtime_error("zero section");

  std::vector<int> sensors;
  std::vector<Chain> chains = reduce_chains(g, &sensors);
  MetricGraph h = reduced_graph(sensors, chains);
  std::vector<int> tree = spanning_tree(h);
  std::set<int> in_tree(tree.begin(), tree.end());

  // Solve chains off the spanning tree first (the loops of the collapsed
  // picture), then undo the collapse one tree edge at a time, newest first.
  std::vector<int> order;
  for (std::size_t i = 0; i < chains.size(); ++i)
    if (!in_tree.count(static_cast<int>(i)) && chains[i].kind != EdgeKind::Open)
      order.push_back(static_cast<int>(i));
  for (auto it = tree.rbegin(); it != tree.rend(); ++it) order.push_back(*it);

  RecoveredGeometry out;
  out.scale = scale;
  out.edges.resize(chains.size());
  for (std::size_t i = 0; i < chains.size(); ++i) {
    RecoveredEdge& re = out.edges[i];
    const Chain& c = chains[i];
    for (const EdgeDir& s : c.steps) re.chain.push_back(s.first);
    re.va = c.va;
    re.vb = c.vb;
    re.kind = h.edge(static_cast<int>(i)).kind;
    re.tree_edge = in_tree.count(static_cast<int>(i)) > 0;
  }

  for (int ci : order) {
    const Chain& c = chains[ci];
    RecoveredEdge& re = out.edges[ci];
    EdgeDir first = c.steps.front();
    EdgeDir last = c.steps.back();
    Complex launch_a = launch(g, obs, c.va, first);
    Complex arr_b = arrival(obs, last);
    Complex launch_b = launch(g, obs, c.vb, flip(last));
    Complex arr_a = arrival(obs, flip(first));
    double pa = std::abs(launch_a);
    double pb = std::abs(launch_b);
    if (std::max(pa, pb) < kPivotTol * scale) throw std::runtime_error("vanishing pivot");
    if (pa >= pb) {
      re.endo = arr_b / launch_a;
      re.cross_check = std::abs(re.endo * launch_b - arr_a) / scale;
    } else {
      re.endo = arr_a / launch_b;
      re.cross_check = std::abs(re.endo * launch_a - arr_b) / scale;
    }
    re.length = length_from_endo(re.endo, k);
  }
  return out;
}

double verify_section_consistency(const MetricGraph& g, const SectionObservation& obs,
                                  const RecoveredGeometry& geom, const Wavenumber&) {
  if (geom.edges.empty() && g.edges.empty()) return 0.0;
  std::vector<Chain> chains = reduce_chains(g, nullptr);
  std::map<std::vector<int>, const Chain*> by_ids;
  for (const Chain& c : chains) {
    std::vector<int> ids;
    for (const EdgeDir& s : c.steps) ids.push_back(s.first);
    by_ids[ids] = &c;
  }
  double r = 0.0;
  for (const RecoveredEdge& re : geom.edges) {
    if (re.kind == EdgeKind::Open || re.chain.empty()) continue;
    auto it = by_ids.find(re.chain);
    if (it == by_ids.end()) throw std::invalid_argument("geometry does not match graph");
    const Chain& c = *it->second;
    EdgeDir first = c.steps.front();
    EdgeDir last = c.steps.back();
    Complex launch_a = launch(g, obs, c.va, first);
    Complex launch_b = launch(g, obs, c.vb, flip(last));
    r = std::max(r, std::abs(re.endo * launch_a - arrival(obs, last)));
    r = std::max(r, std::abs(re.endo * launch_b - arrival(obs, flip(first))));
  }
  return r;
}

}  // namespace qgr
