#include "qgr/sheaf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "qgr/tolerances.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qgr {

namespace {

constexpr double kMaxLossLength = 650.0;  // alpha*L budget before e^{-aL} underflows

std::vector<const Edge*> edges_by_id(const MetricGraph& g) {
  std::vector<const Edge*> es;
  es.reserve(g.edges.size());
  for (const Edge& e : g.edges) es.push_back(&e);
  std::sort(es.begin(), es.end(),
            [](const Edge* a, const Edge* b) { return a->id < b->id; });
  return es;
}

// Rank cutoff with an absolute floor: a fully resonant system can zero every
// constraint row, and a purely relative threshold would then declare the zero
// matrix full rank.  Coding rows are O(1)-scaled, so 1 is the problem scale.
double rank_cutoff(double sigma_max) {
  return tols().rank * std::max(sigma_max, 1.0);
}

int numeric_rank(const Eigen::VectorXd& sv) {
  if (sv.size() == 0) return 0;
  double cutoff = rank_cutoff(sv[0]);
  int r = 0;
  while (r < sv.size() && sv[r] > cutoff) ++r;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Transmission-line sheaves
// ---------------------------------------------------------------------------

const std::array<Complex, 2>& TransmissionLineSheaf::edge_endo(int edge_id) const {
  auto it = endo.find(edge_id);
  if (it == endo.end()) throw std::invalid_argument("unknown edge endomorphism");
  return it->second;
}

TransmissionLineSheaf from_quantum_graph(const MetricGraph& g, Wavenumber k) {
  auto issues = validate(g);
  if (!issues.empty()) throw std::invalid_argument("invalid graph: " + issues.front());
  TransmissionLineSheaf s;
  s.graph = g;
  s.k = k;
  for (const Edge& e : g.edges) {
    if (e.kind == EdgeKind::Open) continue;
    if (k.alpha * e.length > kMaxLossLength) throw std::domain_error("loss too large");
    Complex val = std::exp(Complex(0.0, 1.0) * k.k() * e.length);
    s.endo[e.id] = {val, val};
  }
  return s;
}

bool loop_resonant(const TransmissionLineSheaf& s, int edge_id) {
  const auto& pair = s.edge_endo(edge_id);
  double tol = tols().resonance;
  return std::abs(pair[0] - 1.0) <= tol && std::abs(pair[1] - 1.0) <= tol;
}

bool closed_edge_resonant(const TransmissionLineSheaf& s, int edge_id) {
  const auto& pair = s.edge_endo(edge_id);
  Complex round_trip = pair[0] * pair[1];  // out to the tip and back
  if (std::abs(round_trip) == 0.0) return false;
  // E - E^{-1} = 0 with E the one-way factor: |E^2 - 1| / |E| <= tol.
  return std::abs(round_trip - 1.0) / std::sqrt(std::abs(round_trip)) <= tols().resonance;
}

int count_resonant_loops(const TransmissionLineSheaf& s) {
  int n = 0;
  for (const Edge& e : s.graph.edges)
    if (e.kind == EdgeKind::Loop && loop_resonant(s, e.id)) ++n;
  return n;
}

int count_resonant_closed_edges(const TransmissionLineSheaf& s) {
  int n = 0;
  for (const Edge& e : s.graph.edges)
    if (e.kind == EdgeKind::Closed && closed_edge_resonant(s, e.id)) ++n;
  return n;
}

std::vector<EdgeDir> incoming_directions(const MetricGraph& g, int v) {
  if (!g.has_vertex(v)) throw std::invalid_argument("unknown vertex");
  std::vector<EdgeDir> dirs;
  for (const Edge* e : edges_by_id(g)) {
    if (e->kind == EdgeKind::Loop) {
      if (e->v0 == v) {
        dirs.push_back({e->id, 1});
        dirs.push_back({e->id, 0});
      }
    } else if (e->kind == EdgeKind::Open) {
      if (e->v0 == v) dirs.push_back({e->id, 0});
    } else {
      if (e->v1 == v) dirs.push_back({e->id, 1});
      if (e->v0 == v) dirs.push_back({e->id, 0});
    }
  }
  return dirs;
}

namespace {

Complex direction_endo(const TransmissionLineSheaf& s, const EdgeDir& d) {
  const Edge& e = s.graph.edge(d.first);
  if (e.kind == EdgeKind::Open) return Complex(1.0, 0.0);
  return s.edge_endo(e.id)[d.second];
}

}  // namespace

std::vector<Complex> coding_row(const TransmissionLineSheaf& s, int v, int out_edge,
                                int out_fwd) {
  const Edge& e = s.graph.edge(out_edge);
  int source = (e.kind == EdgeKind::Open) ? e.v0 : (out_fwd == 1 ? e.v0 : e.v1);
  if (source != v) throw std::invalid_argument("direction does not leave the vertex");
  auto dirs = incoming_directions(s.graph, v);
  int d = s.graph.degree(v);
  EdgeDir rev{out_edge, 1 - out_fwd};
  std::vector<Complex> row(dirs.size(), Complex(0.0, 0.0));
  for (std::size_t j = 0; j < dirs.size(); ++j) {
    Complex ej = direction_endo(s, dirs[j]);
    row[j] = (2.0 / d) * ej;
    if (dirs[j] == rev) row[j] -= ej;
  }
  return row;
}

// ---------------------------------------------------------------------------
// Flow sheaves
// ---------------------------------------------------------------------------

std::vector<int> FlowSheaf::incoming(int v) const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].to == v) ids.push_back(static_cast<int>(i));
  return ids;
}

std::vector<int> FlowSheaf::outgoing(int v) const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].from == v) ids.push_back(static_cast<int>(i));
  return ids;
}

FlowSheaf flow_from_tl(const TransmissionLineSheaf& s) {
  const MetricGraph& g = s.graph;
  FlowSheaf f;
  f.vertices = g.vertices;
  for (const Edge* e : edges_by_id(g)) {
    if (e->kind == EdgeKind::Open) {
      f.edges.push_back({e->v0, -1});  // fwd: toward infinity
      f.edges.push_back({-1, e->v0});  // bwd: external incoming value
      f.endo[static_cast<int>(f.edges.size()) - 2] = Complex(1.0, 0.0);
      f.endo[static_cast<int>(f.edges.size()) - 1] = Complex(1.0, 0.0);
    } else {
      const auto& pair = s.edge_endo(e->id);
      f.edges.push_back({e->v0, e->v1});  // fwd
      f.edges.push_back({e->v1, e->v0});  // bwd
      f.endo[static_cast<int>(f.edges.size()) - 2] = pair[1];
      f.endo[static_cast<int>(f.edges.size()) - 1] = pair[0];
    }
  }
  // Vertex codings: rows follow the outgoing flow-edge order, which matches
  // the canonical (edge id ascending, fwd before bwd) direction order.
  for (int v : g.vertices) {
    auto dirs = incoming_directions(g, v);
    std::vector<EdgeDir> outs;
    for (const Edge* e : edges_by_id(g)) {
      if (e->kind == EdgeKind::Loop) {
        if (e->v0 == v) {
          outs.push_back({e->id, 1});
          outs.push_back({e->id, 0});
        }
      } else if (e->kind == EdgeKind::Open) {
        if (e->v0 == v) outs.push_back({e->id, 1});
      } else {
        if (e->v0 == v) outs.push_back({e->id, 1});
        if (e->v1 == v) outs.push_back({e->id, 0});
      }
    }
    Eigen::MatrixXcd m(outs.size(), dirs.size());
    for (std::size_t r = 0; r < outs.size(); ++r) {
      auto row = coding_row(s, v, outs[r].first, outs[r].second);
      for (std::size_t c = 0; c < dirs.size(); ++c) m(r, c) = row[c];
    }
    f.coding[v] = std::move(m);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Cech assembly
// ---------------------------------------------------------------------------

namespace {

std::string flow_edge_name(const FlowSheaf& s, int id) {
  const FlowEdge& e = s.edges[id];
  char buf[64];
  std::snprintf(buf, sizeof buf, "e%d(%d->%d)", id, e.from, e.to);
  return buf;
}

}  // namespace

CechComplex build_cech(const FlowSheaf& s) {
  if (s.vertices.empty()) throw std::runtime_error("empty graph");
  CechComplex cx;

  // C0 layout: star coordinates then interval coordinates.
  for (int v : s.vertices) {
    for (int id : s.incoming(v)) {
      cx.star_col[{id, v}] = cx.c0++;
      cx.c0_labels.push_back("star v" + std::to_string(v) + " <- " + flow_edge_name(s, id));
    }
  }
  for (std::size_t i = 0; i < s.edges.size(); ++i) {
    const FlowEdge& e = s.edges[i];
    if (e.from < 0 || e.to < 0) continue;  // external ends carry no interval set
    int id = static_cast<int>(i);
    cx.h_col[id] = cx.c0++;
    cx.c0_labels.push_back("H " + flow_edge_name(s, id));
    if (e.from == e.to) {
      cx.k_col[id] = cx.c0++;
      cx.c0_labels.push_back("K " + flow_edge_name(s, id));
    }
  }

  // Overlap rows.
  struct RowSpec {
    std::vector<std::pair<int, Complex>> entries;
    std::string label;
  };
  std::vector<RowSpec> rows;
  for (std::size_t i = 0; i < s.edges.size(); ++i) {
    const FlowEdge& e = s.edges[i];
    if (e.from < 0 || e.to < 0) continue;
    int id = static_cast<int>(i);
    auto coding_it = s.coding.find(e.from);
    if (coding_it == s.coding.end()) throw std::logic_error("missing coding at vertex");
    const Eigen::MatrixXcd& m = coding_it->second;
    auto ins = s.incoming(e.from);
    auto outs = s.outgoing(e.from);
    int out_idx = static_cast<int>(std::find(outs.begin(), outs.end(), id) - outs.begin());
    if (m.rows() != static_cast<long>(outs.size()) ||
        m.cols() != static_cast<long>(ins.size()))
      throw std::logic_error("coding dimensions mismatch vertex degrees");

    RowSpec phi;  // coding output against the interval value next to the source
    for (std::size_t c = 0; c < ins.size(); ++c) {
      Complex coef = m(out_idx, static_cast<long>(c));
      if (coef != Complex(0.0, 0.0)) phi.entries.push_back({cx.star_col.at({ins[c], e.from}), coef});
    }
    phi.entries.push_back({cx.h_col.at(id), Complex(-1.0, 0.0)});
    phi.label = "U" + std::to_string(e.from) + " ^ H " + flow_edge_name(s, id);
    rows.push_back(std::move(phi));

    if (e.from == e.to) {
      RowSpec mid;
      mid.entries = {{cx.h_col.at(id), Complex(1.0, 0.0)}, {cx.k_col.at(id), Complex(-1.0, 0.0)}};
      mid.label = "H ^ K " + flow_edge_name(s, id);
      rows.push_back(std::move(mid));
      RowSpec arr;
      arr.entries = {{cx.star_col.at({id, e.to}), Complex(1.0, 0.0)},
                     {cx.k_col.at(id), Complex(-1.0, 0.0)}};
      arr.label = "U" + std::to_string(e.to) + " ^ K " + flow_edge_name(s, id);
      rows.push_back(std::move(arr));
    } else {
      RowSpec arr;
      arr.entries = {{cx.star_col.at({id, e.to}), Complex(1.0, 0.0)},
                     {cx.h_col.at(id), Complex(-1.0, 0.0)}};
      arr.label = "U" + std::to_string(e.to) + " ^ H " + flow_edge_name(s, id);
      rows.push_back(std::move(arr));
    }
  }

  cx.c1 = static_cast<int>(rows.size());
  cx.delta0 = Eigen::MatrixXcd::Zero(cx.c1, cx.c0);
  for (int r = 0; r < cx.c1; ++r) {
    for (const auto& [c, coef] : rows[r].entries) cx.delta0(r, c) += coef;
    cx.c1_labels.push_back(rows[r].label);
  }
  return cx;
}

CechComplex build_cech(const TransmissionLineSheaf& s) {
  if (s.graph.vertices.empty()) throw std::runtime_error("empty graph");
  return build_cech(flow_from_tl(s));
}

namespace {

CohomologyResult cohomology_of(const CechComplex& cx) {
  CohomologyResult res;
  if (cx.c1 == 0 || cx.c0 == 0) {
    res.h0 = cx.c0;
    res.h1 = cx.c1;
    res.global_sections = Eigen::MatrixXcd::Identity(cx.c0, cx.c0);
    return res;
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(cx.delta0, Eigen::ComputeFullV);
  int rank = numeric_rank(svd.singularValues());
  res.h0 = cx.c0 - rank;
  res.h1 = cx.c1 - rank;
  res.global_sections = svd.matrixV().rightCols(res.h0);
  return res;
}

}  // namespace

CohomologyResult cech_cohomology(const FlowSheaf& s) { return cohomology_of(build_cech(s)); }

CohomologyResult cech_cohomology(const TransmissionLineSheaf& s) {
  return cohomology_of(build_cech(s));
}

std::pair<int, int> predicted_dims(int l, int lprime, int m, int n) {
  if (l == 0 && m == 0 && n == 0) throw std::invalid_argument("degenerate graph");
  if (l < 0 || lprime < 0 || m < 0 || n < 0 || lprime > l)
    throw std::invalid_argument("invalid counts");
  int h0 = 0;
  int h1 = 0;
  if (l == 0 && m == 0) {
    h0 = n + 1;
    h1 = n + 1;
  } else if (l == 0) {
    h0 = n + m;
    h1 = n;
  } else if (m == 0) {
    h0 = n + 1 + std::min(0, lprime - 1);
    h1 = n + 1 + std::min(0, lprime - 1);
  } else {
    h0 = n + m + std::min(0, lprime - 1);
    h1 = n + std::min(0, lprime - 1);
  }
  return {h0, h1};
}

// ---------------------------------------------------------------------------
// Collapses
// ---------------------------------------------------------------------------

FlowSheaf collapse_flow_edge(const FlowSheaf& s, int edge_id) {
  if (edge_id < 0 || edge_id >= static_cast<int>(s.edges.size()))
    throw std::invalid_argument("unknown edge");
  const FlowEdge e = s.edges[edge_id];
  if (e.from < 0 || e.to < 0) throw std::invalid_argument("cannot collapse external edge");
  if (e.from == e.to) throw std::invalid_argument("loop collapse via flow lemma");
  int u = e.from;  // source vertex, merged into the target
  int w = e.to;

  FlowSheaf t;
  for (int v : s.vertices)
    if (v != u) t.vertices.push_back(v);
  auto relabel = [&](int v) { return v == u ? w : v; };
  std::map<int, int> id_map;  // old flow edge -> new flow edge
  for (std::size_t i = 0; i < s.edges.size(); ++i) {
    if (static_cast<int>(i) == edge_id) continue;
    id_map[static_cast<int>(i)] = static_cast<int>(t.edges.size());
    FlowEdge ne = s.edges[i];
    if (ne.from >= 0) ne.from = relabel(ne.from);
    if (ne.to >= 0) ne.to = relabel(ne.to);
    t.edges.push_back(ne);
    auto endo_it = s.endo.find(static_cast<int>(i));
    if (endo_it != s.endo.end()) t.endo[id_map[static_cast<int>(i)]] = endo_it->second;
  }

  // Codings at untouched vertices carry over: the uniform id shift preserves
  // the relative order of their incoming/outgoing lists.
  for (const auto& [v, m] : s.coding)
    if (v != u && v != w) t.coding[v] = m;

  // Merged coding [[a, 0], [v u^T, b]] reindexed to the merged edge order.
  auto in_u = s.incoming(u);
  auto out_u = s.outgoing(u);
  auto in_w = s.incoming(w);
  auto out_w = s.outgoing(w);
  const Eigen::MatrixXcd& A = s.coding.at(u);
  const Eigen::MatrixXcd& B = s.coding.at(w);
  int e_out_idx = static_cast<int>(std::find(out_u.begin(), out_u.end(), edge_id) - out_u.begin());
  int e_in_idx = static_cast<int>(std::find(in_w.begin(), in_w.end(), edge_id) - in_w.begin());
  Eigen::RowVectorXcd uT = A.row(e_out_idx);
  Eigen::VectorXcd vcol = B.col(e_in_idx);

  auto new_ins = t.incoming(w);
  auto new_outs = t.outgoing(w);
  auto col_of = [&](int old_id) {
    int nid = id_map.at(old_id);
    return static_cast<int>(std::find(new_ins.begin(), new_ins.end(), nid) - new_ins.begin());
  };
  auto row_of = [&](int old_id) {
    int nid = id_map.at(old_id);
    return static_cast<int>(std::find(new_outs.begin(), new_outs.end(), nid) - new_outs.begin());
  };

  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(new_outs.size(), new_ins.size());
  for (std::size_t r = 0; r < out_u.size(); ++r) {
    if (out_u[r] == edge_id) continue;
    int mr = row_of(out_u[r]);
    for (std::size_t c = 0; c < in_u.size(); ++c)
      M(mr, col_of(in_u[c])) = A(static_cast<long>(r), static_cast<long>(c));
  }
  for (std::size_t r = 0; r < out_w.size(); ++r) {
    int mr = row_of(out_w[r]);
    for (std::size_t c = 0; c < in_u.size(); ++c)
      M(mr, col_of(in_u[c])) = vcol[static_cast<long>(r)] * uT[static_cast<long>(c)];
    for (std::size_t c = 0; c < in_w.size(); ++c) {
      if (in_w[c] == edge_id) continue;
      M(mr, col_of(in_w[c])) = B(static_cast<long>(r), static_cast<long>(c));
    }
  }
  t.coding[w] = std::move(M);
  return t;
}

TransmissionLineSheaf collapse_tl_edge(const TransmissionLineSheaf& s, int edge_id,
                                       bool compose_inverse_on_far_side) {
  const Edge& e = s.graph.edge(edge_id);
  if (e.kind == EdgeKind::Open) throw std::invalid_argument("cannot collapse open edge");
  if (e.kind == EdgeKind::Loop) throw std::invalid_argument("loop endpoints coincide");
  if (s.graph.degree(e.v0) <= 1 || s.graph.degree(e.v1) <= 1)
    throw std::runtime_error("degree-1 endpoint");

  int keep = e.v0;
  int drop = e.v1;
  TransmissionLineSheaf t;
  t.graph = collapse_edge(s.graph, edge_id).target;
  for (const auto& [id, pair] : s.endo) {
    if (id == edge_id) continue;
    t.endo[id] = pair;
  }
  const auto& le = s.edge_endo(edge_id);
  if (!compose_inverse_on_far_side) {
    Complex L = le[0];  // transport from the vanishing endpoint to the kept one
    for (const Edge& x : s.graph.edges) {
      if (x.id == edge_id || x.kind == EdgeKind::Open) continue;
      if (x.v1 == drop) t.endo[x.id][1] *= L;
      if (x.v0 == drop) t.endo[x.id][0] *= L;
    }
  } else {
    Complex L = le[1];  // transport from the kept endpoint to the vanishing one
    for (const Edge& x : s.graph.edges) {
      if (x.id == edge_id || x.kind == EdgeKind::Open) continue;
      if (x.v1 == keep) t.endo[x.id][1] /= L;
      if (x.v0 == keep) t.endo[x.id][0] /= L;
    }
  }
  return t;
}

TransmissionLineSheaf collapse_nonresonant_loop(const TransmissionLineSheaf& s, int edge_id) {
  const Edge& e = s.graph.edge(edge_id);
  if (e.kind != EdgeKind::Loop) throw std::invalid_argument("not a loop");
  if (loop_resonant(s, edge_id)) throw std::runtime_error("resonant loop");
  TransmissionLineSheaf t;
  t.graph = collapse_edge(s.graph, edge_id).target;
  t.k = s.k;
  for (const auto& [id, pair] : s.endo) {
    if (id == edge_id) continue;
    t.endo[id] = pair;
  }
  return t;
}

EulerInvariant euler_invariant(const TransmissionLineSheaf& s) {
  for (const Edge& e : s.graph.edges)
    if (e.kind == EdgeKind::Closed) throw std::runtime_error("closed edges present");
  EulerInvariant inv;
  auto coh = cech_cohomology(s);
  inv.h0 = coh.h0;
  inv.h1 = coh.h1;
  inv.chi = coh.h0 - coh.h1;
  for (const Edge& e : s.graph.edges)
    if (e.kind == EdgeKind::Open) ++inv.m;
  inv.b1 = betti(s.graph).second;
  inv.chi_equals_m = (inv.chi == inv.m);
  inv.h1_within_b1 = (inv.h1 <= inv.b1);
  return inv;
}

// ---------------------------------------------------------------------------
// Resonance scan
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXcd delta_at(const MetricGraph& g, double kprime) {
  TransmissionLineSheaf s = from_quantum_graph(g, Wavenumber{kprime, 0.0});
  return build_cech(s).delta0;
}

Eigen::VectorXd singular_values_at(const MetricGraph& g, double kprime) {
  Eigen::MatrixXcd d = delta_at(g, kprime);
  if (d.rows() == 0 || d.cols() == 0) return Eigen::VectorXd();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(d);
  return svd.singularValues();
}

// Smallest singular value that must stay nonzero generically; it dips to zero
// exactly where the rank drops below the baseline.
double indicator_at(const MetricGraph& g, double kprime, int baseline_rank) {
  Eigen::VectorXd sv = singular_values_at(g, kprime);
  if (baseline_rank <= 0 || baseline_rank > sv.size()) return 0.0;
  return sv[baseline_rank - 1];
}

double golden_min(const MetricGraph& g, int baseline_rank, double a, double b) {
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = indicator_at(g, x1, baseline_rank);
  double f2 = indicator_at(g, x2, baseline_rank);
  while (b - a > 1e-12 * std::max(1.0, std::abs(b))) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = indicator_at(g, x1, baseline_rank);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = indicator_at(g, x2, baseline_rank);
    }
  }
  return 0.5 * (a + b);
}

// Loop-localized kernel directions: for each loop the C0 pattern with the two
// star coordinates opposite (z_fwd = 1, z_bwd = -1) and interval values
// following suit lies in ker(delta0) precisely when that loop is resonant.
int localized_multiplicity(const MetricGraph& g, const CechComplex& cx,
                           const Eigen::MatrixXcd& kernel) {
  std::vector<Eigen::VectorXcd> patterns;
  int flow_id = 0;
  for (const Edge* e : edges_by_id(g)) {
    int fwd = flow_id;
    int bwd = flow_id + 1;
    flow_id += 2;
    if (e->kind != EdgeKind::Loop) continue;
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(cx.c0);
    z[cx.star_col.at({fwd, e->v0})] = 1.0;
    z[cx.star_col.at({bwd, e->v0})] = -1.0;
    z[cx.h_col.at(fwd)] = 1.0;
    z[cx.k_col.at(fwd)] = 1.0;
    z[cx.h_col.at(bwd)] = -1.0;
    z[cx.k_col.at(bwd)] = -1.0;
    patterns.push_back(z.normalized());
  }
  if (patterns.empty() || kernel.cols() == 0) return 0;
  Eigen::MatrixXcd joint(cx.c0, kernel.cols() + static_cast<long>(patterns.size()));
  joint.leftCols(kernel.cols()) = kernel;
  for (std::size_t i = 0; i < patterns.size(); ++i)
    joint.col(kernel.cols() + static_cast<long>(i)) = patterns[i];
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(joint);
  int joint_rank = numeric_rank(svd.singularValues());
  int inter = static_cast<int>(kernel.cols() + static_cast<long>(patterns.size())) - joint_rank;
  return std::max(0, inter);
}

ResonanceScan scan_core(const MetricGraph& g, double k_lo, double k_hi, int grid,
                        bool parallel) {
  if (grid <= 0) throw std::invalid_argument("empty scan grid");
  if (!(k_hi > k_lo)) throw std::invalid_argument("empty scan range");
  ResonanceScan out;
  out.k_lo = k_lo;
  out.k_hi = k_hi;
  out.grid = grid;

  // Baseline dims probed at generic (irrational-fraction) wavenumbers.
  TransmissionLineSheaf probe_sheaf =
      from_quantum_graph(g, Wavenumber{k_lo + 0.5 * (k_hi - k_lo), 0.0});
  CechComplex probe = build_cech(probe_sheaf);
  int c0 = probe.c0;
  int c1 = probe.c1;
  int baseline_rank = 0;
  for (double frac : {0.3819660112501051, 0.5773502691896258, 0.8602540378443864}) {
    double kp = k_lo + frac * (k_hi - k_lo);
    Eigen::VectorXd sv = singular_values_at(g, kp);
    baseline_rank = std::max(baseline_rank, numeric_rank(sv));
  }
  out.baseline_h0 = c0 - baseline_rank;
  out.baseline_h1 = c1 - baseline_rank;

  double h = (k_hi - k_lo) / grid;
  out.rows.assign(grid, ScanRow{});
  std::vector<double> indicator(grid, 0.0);

  auto eval_point = [&](int i) {
    double kp = k_lo + (i + 1) * h;
    Eigen::VectorXd sv = singular_values_at(g, kp);
    int rank = numeric_rank(sv);
    out.rows[i] = ScanRow{kp, c0 - rank, c1 - rank};
    indicator[i] =
        (baseline_rank > 0 && baseline_rank <= sv.size()) ? sv[baseline_rank - 1] : 0.0;
  };

  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < grid; ++i) eval_point(i);
  } else {
    for (int i = 0; i < grid; ++i) eval_point(i);
  }

  // Dip detection + refinement.
  std::vector<double> candidates;
  for (int i = 0; i < grid; ++i) {
    bool left_ok = (i == 0) ? false : indicator[i] < indicator[i - 1];
    bool right_ok = (i == grid - 1) ? true : indicator[i] < indicator[i + 1];
    if (i == 0) continue;  // the left boundary cannot be bracketed
    if (left_ok && right_ok) {
      double a = k_lo + i * h;          // previous grid point
      double b = std::min(k_hi, k_lo + (i + 2) * h);
      candidates.push_back(golden_min(g, baseline_rank, a, b));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  for (double kstar : candidates) {
    if (kstar <= k_lo + 0.5 * h) continue;  // outside the scanned range
    if (!out.events.empty() && std::abs(out.events.back().kprime - kstar) < 1e-8) continue;
    TransmissionLineSheaf s = from_quantum_graph(g, Wavenumber{kstar, 0.0});
    CechComplex cx = build_cech(s);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(cx.delta0, Eigen::ComputeFullV);
    int rank = numeric_rank(svd.singularValues());
    int h0 = cx.c0 - rank;
    int h1 = cx.c1 - rank;
    if (h1 <= out.baseline_h1 && h0 <= out.baseline_h0) continue;  // noise minimum
    Eigen::MatrixXcd kernel = svd.matrixV().rightCols(h0);
    int mult = localized_multiplicity(g, cx, kernel);
    out.events.push_back(ScanEvent{kstar, mult, h0, h1});
  }
  return out;
}

}  // namespace

ResonanceScan resonance_scan(const MetricGraph& g, double k_lo, double k_hi, int grid) {
  return scan_core(g, k_lo, k_hi, grid, true);
}

ResonanceScan resonance_scan_serial(const MetricGraph& g, double k_lo, double k_hi,
                                    int grid) {
  return scan_core(g, k_lo, k_hi, grid, false);
}

std::vector<double> recover_loop_lengths(const ResonanceScan& scan, int m) {
  if (scan.baseline_h0 != m)
    throw std::invalid_argument("open-edge count mismatch with scan baseline");
  double h = (scan.k_hi - scan.k_lo) / std::max(1, scan.grid);
  double match_tol = std::max(2.0 * h, 1e-9);

  struct Item {
    double k;
    int mult;
  };
  std::vector<Item> items;
  for (const ScanEvent& ev : scan.events)
    if (ev.multiplicity > 0) items.push_back({ev.kprime, ev.multiplicity});

  std::vector<double> lengths;
  const double two_pi = 2.0 * std::acos(-1.0);
  for (std::size_t start = 0; start < items.size(); ++start) {
    if (items[start].mult <= 0) continue;
    double k1 = items[start].k;
    int count = items[start].mult;
    for (int c = 0; c < count; ++c) lengths.push_back(two_pi / k1);
    // Remove the harmonic ladder k1 * j.
    for (int j = 1;; ++j) {
      double target = k1 * j;
      if (target > scan.k_hi + match_tol) break;
      bool found = false;
      for (auto& it : items) {
        if (std::abs(it.k - target) <= match_tol) {
          it.mult -= count;
          if (it.mult < 0) throw std::runtime_error("unresolved multiplicity");
          found = true;
          break;
        }
      }
      if (!found && target <= scan.k_hi - h) throw std::runtime_error("unresolved multiplicity");
    }
  }
  for (const auto& it : items)
    if (it.mult != 0) throw std::runtime_error("unresolved multiplicity");
  std::sort(lengths.begin(), lengths.end());
  return lengths;
}

std::string scan_to_csv(const ResonanceScan& scan) {
  std::string out = "kprime,h0,h1\n";
  char buf[96];
  for (const ScanRow& r : scan.rows) {
    std::snprintf(buf, sizeof buf, "%.12g,%d,%d\n", r.kprime, r.h0, r.h1);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact-rational mode
// ---------------------------------------------------------------------------

namespace {

long long checked_narrow(__int128 v) {
  if (v > std::numeric_limits<long long>::max() || v < std::numeric_limits<long long>::min())
    throw std::overflow_error("rational overflow");
  return static_cast<long long>(v);
}

}  // namespace

Rational::Rational(long long n) : num(n), den(1) {}

Rational::Rational(long long n, long long d) {
  if (d == 0) throw std::invalid_argument("zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  long long g = std::gcd(n < 0 ? -n : n, d);
  if (g > 1) {
    n /= g;
    d /= g;
  }
  num = n;
  den = d;
}

namespace {

Rational make_rational(__int128 n, __int128 d) {
  if (d == 0) throw std::invalid_argument("zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  __int128 a = n < 0 ? -n : n;
  __int128 b = d;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    n /= a;
    d /= a;
  }
  return Rational(checked_narrow(n), checked_narrow(d));
}

}  // namespace

Rational Rational::operator+(const Rational& o) const {
  return make_rational(static_cast<__int128>(num) * o.den + static_cast<__int128>(o.num) * den,
                       static_cast<__int128>(den) * o.den);
}
Rational Rational::operator-(const Rational& o) const { return *this + (-o); }
Rational Rational::operator*(const Rational& o) const {
  return make_rational(static_cast<__int128>(num) * o.num, static_cast<__int128>(den) * o.den);
}
Rational Rational::operator/(const Rational& o) const {
  if (o.num == 0) throw std::invalid_argument("division by zero");
  return make_rational(static_cast<__int128>(num) * o.den, static_cast<__int128>(den) * o.num);
}
Rational Rational::operator-() const {
  Rational r;
  r.num = -num;
  r.den = den;
  return r;
}
bool Rational::operator==(const Rational& o) const { return num == o.num && den == o.den; }
double Rational::value() const { return static_cast<double>(num) / static_cast<double>(den); }

RationalComplex RationalComplex::operator+(const RationalComplex& o) const {
  return {re + o.re, im + o.im};
}
RationalComplex RationalComplex::operator-(const RationalComplex& o) const {
  return {re - o.re, im - o.im};
}
RationalComplex RationalComplex::operator*(const RationalComplex& o) const {
  return {re * o.re - im * o.im, re * o.im + im * o.re};
}
RationalComplex RationalComplex::operator/(const RationalComplex& o) const {
  Rational n2 = o.re * o.re + o.im * o.im;
  if (n2.is_zero()) throw std::invalid_argument("division by zero");
  return {(re * o.re + im * o.im) / n2, (im * o.re - re * o.im) / n2};
}

std::pair<int, int> cech_ranks_exact(
    const MetricGraph& g, const std::map<int, std::array<RationalComplex, 2>>& endo) {
  if (g.vertices.empty()) throw std::runtime_error("empty graph");
  auto dir_endo = [&](const EdgeDir& d) -> RationalComplex {
    const Edge& e = g.edge(d.first);
    if (e.kind == EdgeKind::Open) return RationalComplex(Rational(1));
    auto it = endo.find(e.id);
    if (it == endo.end()) throw std::invalid_argument("unknown edge endomorphism");
    return it->second[d.second];
  };

  // Column layout: star coordinates (vertices ascending, canonical incoming
  // order) then per-direction interval coordinates (edges ascending, fwd
  // before bwd; loops carry H and K columns).
  std::map<std::pair<int, int>, int> star;  // (edge, fwd) of the incoming direction
  int c0 = 0;
  for (int v : g.vertices)
    for (const EdgeDir& d : incoming_directions(g, v)) star[d] = c0++;
  std::map<std::pair<int, int>, int> hcol, kcol;
  for (const Edge* e : edges_by_id(g)) {
    if (e->kind == EdgeKind::Open) continue;
    for (int fwd : {1, 0}) {
      hcol[{e->id, fwd}] = c0++;
      if (e->kind == EdgeKind::Loop) kcol[{e->id, fwd}] = c0++;
    }
  }

  std::vector<std::vector<RationalComplex>> rows;
  auto new_row = [&]() -> std::vector<RationalComplex>& {
    rows.emplace_back(c0);
    return rows.back();
  };
  for (const Edge* e : edges_by_id(g)) {
    if (e->kind == EdgeKind::Open) continue;
    for (int fwd : {1, 0}) {
      int src = fwd == 1 ? e->v0 : e->v1;
      auto dirs = incoming_directions(g, src);
      int d = g.degree(src);
      EdgeDir rev{e->id, 1 - fwd};
      auto& phi = new_row();
      for (const EdgeDir& in : dirs) {
        RationalComplex coef = dir_endo(in) * RationalComplex(Rational(2, d));
        if (in == rev) coef = coef - dir_endo(in);
        phi[star.at(in)] = phi[star.at(in)] + coef;
      }
      phi[hcol.at({e->id, fwd})] = phi[hcol.at({e->id, fwd})] - RationalComplex(Rational(1));
      if (e->kind == EdgeKind::Loop) {
        auto& mid = new_row();
        mid[hcol.at({e->id, fwd})] = RationalComplex(Rational(1));
        mid[kcol.at({e->id, fwd})] = RationalComplex(Rational(-1));
        auto& arr = new_row();
        arr[star.at({e->id, fwd})] = RationalComplex(Rational(1));
        arr[kcol.at({e->id, fwd})] = RationalComplex(Rational(-1));
      } else {
        auto& arr = new_row();
        arr[star.at({e->id, fwd})] = RationalComplex(Rational(1));
        arr[hcol.at({e->id, fwd})] = RationalComplex(Rational(-1));
      }
    }
  }

  // Exact Gaussian elimination.
  int c1 = static_cast<int>(rows.size());
  int rank = 0;
  int pivot_row = 0;
  for (int col = 0; col < c0 && pivot_row < c1; ++col) {
    int sel = -1;
    for (int r = pivot_row; r < c1; ++r)
      if (!rows[r][col].is_zero()) {
        sel = r;
        break;
      }
    if (sel < 0) continue;
    std::swap(rows[sel], rows[pivot_row]);
    for (int r = pivot_row + 1; r < c1; ++r) {
      if (rows[r][col].is_zero()) continue;
      RationalComplex factor = rows[r][col] / rows[pivot_row][col];
      for (int c = col; c < c0; ++c)
        rows[r][c] = rows[r][c] - factor * rows[pivot_row][c];
    }
    ++pivot_row;
    ++rank;
  }
  return {c0 - rank, c1 - rank};
}

}  // namespace qgr
