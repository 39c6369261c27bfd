#include "qgr/signal_topology.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "qgr/sheaf.hpp"

namespace qgr {

namespace {

constexpr double kInfD = std::numeric_limits<double>::infinity();

double signal_distance(const SignalProfileSample& a, const SignalProfileSample& b) {
  double s = 0.0;
  std::size_t m = std::min(a.value.size(), b.value.size());
  for (std::size_t i = 0; i < m; ++i) s += std::norm(a.value[i] - b.value[i]);
  return std::sqrt(s);
}

double margin_core(const MetricGraph& g, const std::vector<SignalProfileSample>& samples,
                   double rho, bool parallel) {
  if (samples.size() < 2) throw std::invalid_argument("insufficient samples");
  const int n = static_cast<int>(samples.size());
  double best = kInfD;
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for reduction(min : best) schedule(dynamic)
#endif
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (graph_distance(g, samples[i].location, samples[j].location) > rho)
          best = std::min(best, signal_distance(samples[i], samples[j]));
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (graph_distance(g, samples[i].location, samples[j].location) > rho)
          best = std::min(best, signal_distance(samples[i], samples[j]));
  }
  return best;
}

// Union-find over 0..n-1 with path halving.
struct Linkage {
  std::vector<int> parent;

  explicit Linkage(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Gaussian elimination over the rationals; entries here are incidence
// coefficients, so the arithmetic stays far from overflow.
int rational_rank(std::vector<std::vector<Rational>> m) {
  const int rows = static_cast<int>(m.size());
  if (rows == 0 || m[0].empty()) return 0;
  const int cols = static_cast<int>(m[0].size());
  const Rational zero(0);
  int rank = 0;
  for (int col = 0; col < cols && rank < rows; ++col) {
    int pivot = -1;
    for (int r = rank; r < rows; ++r)
      if (!(m[r][col] == zero)) {
        pivot = r;
        break;
      }
    if (pivot < 0) continue;
    std::swap(m[rank], m[pivot]);
    for (int r = rank + 1; r < rows; ++r) {
      if (m[r][col] == zero) continue;
      Rational f = m[r][col] / m[rank][col];
      for (int c = col; c < cols; ++c) m[r][c] = m[r][c] - f * m[rank][c];
    }
    ++rank;
  }
  return rank;
}

struct LatticeNode {
  std::vector<int> idx;
  Region r;
};

// All nonempty intersections of cover elements, one node per index subset,
// enumerated level by level (so every face of a listed subset is listed).
std::vector<LatticeNode> nonempty_intersections(const Cover& c) {
  const MetricGraph& g = *c.graph;
  const int n = static_cast<int>(c.elements.size());
  std::vector<LatticeNode> out;
  std::vector<LatticeNode> frontier;
  for (int i = 0; i < n; ++i)
    if (!c.elements[i].empty()) frontier.push_back({{i}, c.elements[i]});
  while (!frontier.empty()) {
    out.insert(out.end(), frontier.begin(), frontier.end());
    std::vector<LatticeNode> next;
    for (const LatticeNode& node : frontier) {
      for (int j = node.idx.back() + 1; j < n; ++j) {
        if (c.elements[j].empty()) continue;
        Region r = region_intersection(g, node.r, c.elements[j]);
        if (r.empty()) continue;
        LatticeNode grown{node.idx, std::move(r)};
        grown.idx.push_back(j);
        next.push_back(std::move(grown));
      }
    }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace

int NerveComplex::dimension() const {
  int d = -1;
  for (const auto& s : simplices) d = std::max(d, static_cast<int>(s.size()) - 1);
  return d;
}

SignalProfileSample profile(const std::vector<WaveField>& fields, const GraphPoint& p) {
  SignalProfileSample s;
  s.location = p;
  s.value.reserve(fields.size());
  for (const WaveField& f : fields) s.value.push_back(evaluate(f, p));
  return s;
}

double injectivity_margin(const MetricGraph& g,
                          const std::vector<SignalProfileSample>& samples, double rho) {
  return margin_core(g, samples, rho, true);
}

double injectivity_margin_serial(const MetricGraph& g,
                                 const std::vector<SignalProfileSample>& samples,
                                 double rho) {
  return margin_core(g, samples, rho, false);
}

std::vector<std::vector<int>> components_via_signal(
    const MetricGraph& g, const Region& region,
    const std::vector<SignalProfileSample>& samples, double link_radius) {
  std::vector<int> kept;
  std::vector<GraphPoint> where(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    where[i] = canonical(g, samples[i].location);
    if (region_contains(g, region, where[i])) kept.push_back(static_cast<int>(i));
  }

  // Per-interval chains drive the density check and the automatic radius:
  // neighbors along one interval always sit on the same path component.
  double max_step = 0.0;
  for (const auto& [edge, ivs] : region.intervals) {
    for (const Interval& iv : ivs) {
      std::vector<std::pair<double, int>> chain;
      for (int i : kept)
        if (where[i].edge == edge && iv.first < where[i].offset &&
            where[i].offset < iv.second)
          chain.emplace_back(where[i].offset, i);
      if (chain.empty()) throw std::runtime_error("undersampled region");
      std::sort(chain.begin(), chain.end());
      for (std::size_t t = 1; t < chain.size(); ++t)
        max_step = std::max(max_step, signal_distance(samples[chain[t - 1].second],
                                                      samples[chain[t].second]));
    }
  }
  if (link_radius > 0.0 && max_step >= link_radius / 2.0)
    throw std::runtime_error("undersampled region");
  const double radius = link_radius > 0.0 ? link_radius : 3.0 * max_step;

  Linkage link(kept.size());
  for (std::size_t a = 0; a < kept.size(); ++a)
    for (std::size_t b = a + 1; b < kept.size(); ++b)
      if (signal_distance(samples[kept[a]], samples[kept[b]]) <= radius)
        link.unite(static_cast<int>(a), static_cast<int>(b));

  std::vector<std::vector<int>> clusters;
  std::map<int, int> slot;  // linkage root -> cluster position
  for (std::size_t a = 0; a < kept.size(); ++a) {
    int root = link.find(static_cast<int>(a));
    auto it = slot.find(root);
    if (it == slot.end()) {
      it = slot.emplace(root, static_cast<int>(clusters.size())).first;
      clusters.emplace_back();
    }
    clusters[it->second].push_back(kept[a]);
  }
  return clusters;
}

Cover refine_step(const Cover& good, const Region& w) {
  if (good.graph == nullptr) throw std::invalid_argument("cover has no graph");
  const MetricGraph& g = *good.graph;

  Region covered;
  for (const Region& u : good.elements) covered = region_union(g, covered, u);
  if (region_difference(g, w, covered).empty())
    throw std::runtime_error("W already covered");

  const Region v = region_intersection(g, w, covered);
  std::vector<Region> v_parts = region_components(g, v);
  for (const Region& part : v_parts)
    if (betti(g, part).second != 0)
      throw std::runtime_error("V component not acyclic");

  // Boundary points of v that lie inside w or inside a cover element; each
  // such point gets a small ball restoring the overlap that the cut removed.
  struct Cut {
    GraphPoint x;
    bool in_w = false;
    std::vector<int> owners;
  };
  std::vector<Cut> cuts;
  for (const GraphPoint& x : boundary_points(g, v)) {
    Cut c{x, region_contains(g, w, x), {}};
    for (int i = 0; i < static_cast<int>(good.elements.size()); ++i)
      if (region_contains(g, good.elements[i], x)) c.owners.push_back(i);
    if (c.in_w || !c.owners.empty()) cuts.push_back(std::move(c));
  }

  // Separation scale: least pairwise distance among the cut points, kept
  // below the gap between the two remainders and small enough that every
  // ball stays inside the set it patches.
  const Region w_rest = region_difference(g, w, v);
  const Region u_rest = region_difference(g, covered, v);
  double delta = kInfD;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    for (std::size_t j = i + 1; j < cuts.size(); ++j)
      delta = std::min(delta, graph_distance(g, cuts[i].x, cuts[j].x));
  if (!w_rest.empty() && !u_rest.empty()) {
    double gap = region_distance(g, w_rest, u_rest);
    // A zero gap means the remainders touch without meeting (their closures
    // share a point, typically a vertex where two regions stop exactly).  The
    // stay-inside caps below already keep every ball on its own side, so only
    // a positive gap constrains the scale.
    if (gap > 0.0) delta = std::min(delta, gap / 2.0);
  }
  auto keep_inside = [&](const GraphPoint& x, const Region& parent) {
    for (const GraphPoint& b : boundary_points(g, parent))
      delta = std::min(delta, 3.0 * graph_distance(g, x, b));
  };
  for (const Cut& c : cuts) {
    if (c.in_w) keep_inside(c.x, w);
    for (int i : c.owners) keep_inside(c.x, good.elements[i]);
  }
  if (!cuts.empty() && !std::isfinite(delta)) {
    double shortest = kInfD;
    for (const Edge& e : g.edges)
      if (std::isfinite(e.length) && e.length > 0.0)
        shortest = std::min(shortest, e.length);
    delta = std::isfinite(shortest) ? shortest / 2.0 : g.truncation / 2.0;
  }
  if (!cuts.empty() && !(delta > 0.0))
    throw std::runtime_error("degenerate boundary separation");

  auto patched = [&](Region base, bool want_w, int owner) {
    for (const Cut& c : cuts) {
      bool take = want_w ? c.in_w
                         : std::find(c.owners.begin(), c.owners.end(), owner) !=
                               c.owners.end();
      if (take) base = region_union(g, base, ball(g, c.x, delta / 3.0));
    }
    return base;
  };

  Cover out;
  out.graph = good.graph;
  out.elements = std::move(v_parts);
  for (Region& part : region_components(g, patched(w_rest, true, -1)))
    out.elements.push_back(std::move(part));
  for (int i = 0; i < static_cast<int>(good.elements.size()); ++i) {
    Region trimmed = patched(region_difference(g, good.elements[i], v), false, i);
    for (Region& part : region_components(g, trimmed))
      out.elements.push_back(std::move(part));
  }
  return out;
}

Cover refine_all(const MetricGraph& g, const std::vector<Region>& regions,
                 std::vector<std::string>* notes) {
  if (regions.empty()) throw std::invalid_argument("no regions");
  Cover cover;
  cover.graph = &g;
  cover.elements = {regions.front()};
  for (std::size_t k = 1; k < regions.size(); ++k) {
    Region covered;
    for (const Region& u : cover.elements) covered = region_union(g, covered, u);
    if (region_difference(g, regions[k], covered).empty()) {
      if (notes)
        notes->push_back("region " + std::to_string(k) + " already covered; skipped");
      continue;
    }
    cover = refine_step(cover, regions[k]);
  }
  return cover;
}

std::vector<std::string> verify_good_cover(const Cover& c) {
  std::vector<std::string> out;
  if (c.graph == nullptr) {
    if (!c.elements.empty()) out.push_back("cover has no graph");
    return out;
  }
  for (std::size_t i = 0; i < c.elements.size(); ++i)
    if (c.elements[i].empty())
      out.push_back("element " + std::to_string(i) + ": empty");
  for (const LatticeNode& node : nonempty_intersections(c)) {
    auto b = betti(*c.graph, node.r);
    if (b.first == 1 && b.second == 0) continue;
    std::ostringstream msg;
    if (node.idx.size() == 1) {
      msg << "element " << node.idx[0];
    } else {
      msg << "intersection {";
      for (std::size_t t = 0; t < node.idx.size(); ++t)
        msg << (t ? ", " : "") << node.idx[t];
      msg << "}";
    }
    msg << ": betti (" << b.first << ", " << b.second << ")";
    out.push_back(msg.str());
  }
  return out;
}

NerveComplex nerve(const Cover& c) {
  NerveComplex n;
  n.element_count = static_cast<int>(c.elements.size());
  if (c.elements.empty()) return n;
  if (c.graph == nullptr) throw std::invalid_argument("cover has no graph");
  for (LatticeNode& node : nonempty_intersections(c))
    n.simplices.push_back(std::move(node.idx));
  std::sort(n.simplices.begin(), n.simplices.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  return n;
}

std::pair<int, int> simplicial_betti(const NerveComplex& n) {
  std::map<int, int> vrow;
  std::map<std::pair<int, int>, int> ecol;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::array<int, 3>> tris;
  for (const auto& s : n.simplices) {
    if (s.size() == 1) {
      vrow.emplace(s[0], static_cast<int>(vrow.size()));
    } else if (s.size() == 2) {
      ecol.emplace(std::make_pair(s[0], s[1]), static_cast<int>(edges.size()));
      edges.emplace_back(s[0], s[1]);
    } else if (s.size() == 3) {
      tris.push_back({s[0], s[1], s[2]});
    }
  }
  const int nv = static_cast<int>(vrow.size());
  const int ne = static_cast<int>(edges.size());

  std::vector<std::vector<Rational>> d1(nv, std::vector<Rational>(ne, Rational(0)));
  for (int e = 0; e < ne; ++e) {
    auto a = vrow.find(edges[e].first);
    auto b = vrow.find(edges[e].second);
    if (a == vrow.end() || b == vrow.end())
      throw std::invalid_argument("nerve not downward closed");
    d1[a->second][e] = Rational(-1);
    d1[b->second][e] = Rational(1);
  }
  std::vector<std::vector<Rational>> d2(ne, std::vector<Rational>(tris.size(), Rational(0)));
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const auto& s = tris[t];
    auto need = [&](int a, int b) {
      auto it = ecol.find({a, b});
      if (it == ecol.end()) throw std::invalid_argument("nerve not downward closed");
      return it->second;
    };
    d2[need(s[1], s[2])][t] = Rational(1);
    d2[need(s[0], s[2])][t] = Rational(-1);
    d2[need(s[0], s[1])][t] = Rational(1);
  }

  const int r1 = rational_rank(std::move(d1));
  const int r2 = rational_rank(std::move(d2));
  return {nv - r1, ne - r1 - r2};
}

}  // namespace qgr
