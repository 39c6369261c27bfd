#include "qgr/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "qgr/geometry.hpp"
#include "qgr/sheaf.hpp"
#include "qgr/signal_topology.hpp"
#include "qgr/tolerances.hpp"
#include "qgr/visibility.hpp"

namespace qgr {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;
// Reflection magnitude assumed by the loss ladder when no better bound is
// known; matches the visibility stage's worst case.
constexpr double kWorstReflection = 0.95;

double urand(std::mt19937_64& g) { return std::ldexp(double(g() >> 11), -53); }

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Segment: return "segment";
    case EdgeKind::Loop: return "loop";
    case EdgeKind::Closed: return "closed";
    case EdgeKind::Open: return "open";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// JSON pieces
// ---------------------------------------------------------------------------

GraphPoint point_from_json(const json& j) {
  return GraphPoint::on_edge(j.at("edge").get<int>(), j.at("offset").get<double>());
}

ordered_json point_to_json(const GraphPoint& p) {
  return ordered_json{{"edge", p.edge}, {"offset", p.offset}};
}

Region region_from_json(const json& j) {
  Region r;
  if (j.contains("intervals"))
    for (auto it = j["intervals"].begin(); it != j["intervals"].end(); ++it) {
      int eid = std::stoi(it.key());
      for (const auto& iv : it.value())
        r.intervals[eid].push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    }
  if (j.contains("vertices"))
    for (const auto& v : j["vertices"]) r.vertices.insert(v.get<int>());
  return r;
}

ordered_json region_to_json(const Region& r) {
  ordered_json j;
  j["intervals"] = ordered_json::object();
  for (const auto& [eid, ivs] : r.intervals) {
    ordered_json arr = ordered_json::array();
    for (const auto& iv : ivs) arr.push_back({iv.first, iv.second});
    j["intervals"][std::to_string(eid)] = arr;
  }
  j["vertices"] = r.vertices;
  return j;
}

void check_on_graph(const MetricGraph& g, const GraphPoint& p, const char* what) {
  const Edge* found = nullptr;
  for (const Edge& e : g.edges)
    if (e.id == p.edge) found = &e;
  if (!found)
    throw std::invalid_argument(std::string(what) + " off the graph: no edge " +
                                std::to_string(p.edge));
  bool interior = found->kind == EdgeKind::Open
                      ? p.offset > 0.0
                      : (p.offset > 0.0 && p.offset < found->length);
  if (!interior)
    throw std::invalid_argument(std::string(what) +
                                " must sit strictly inside edge " +
                                std::to_string(p.edge));
}

GraphPoint jitter_point(const MetricGraph& g, const GraphPoint& p,
                        std::mt19937_64& rng) {
  const Edge& e = g.edge(p.edge);
  double u = 2.0 * urand(rng) - 1.0;
  double room = e.kind == EdgeKind::Open ? p.offset
                                         : std::min(p.offset, e.length - p.offset);
  return GraphPoint::on_edge(p.edge, p.offset + 0.1 * room * u);
}

// Loss fallback for stages that need some damping but no cover: the ladder
// applied to the longest finite edge (the worst interference span present).
double auto_loss(const Scenario& s) {
  double span = 0.0;
  for (const Edge& e : s.graph.edges)
    if (e.kind != EdgeKind::Open) span = std::max(span, e.length);
  if (span == 0.0) span = s.graph.truncation;
  return select_loss_and_threshold(kWorstReflection, s.kprime, span).first;
}

ordered_json report_head(const Scenario& s, const char* command) {
  ordered_json j;
  j["schema"] = "qgr-report/1";
  j["command"] = command;
  j["scenario"] =
      ordered_json{{"name", s.name}, {"hash", hex16(scenario_hash(s))}, {"seed", s.seed}};
  const Tolerances& t = tols();
  j["tolerances"] =
      ordered_json{{"rank", t.rank},           {"residual", t.residual},
                   {"resonance", t.resonance}, {"roots", t.roots},
                   {"merge", t.merge},         {"pivot", t.pivot}};
  j["wavenumber"] = ordered_json{{"kprime", s.kprime}};
  if (s.alpha)
    j["wavenumber"]["alpha"] = *s.alpha;
  else
    j["wavenumber"]["alpha"] = "auto";
  return j;
}

std::string finish(const ordered_json& j) { return j.dump(2) + "\n"; }

// 201 samples per edge (extent-wide, endpoints included) of the field value.
std::string trace_csv(const WaveField& f) {
  std::ostringstream out;
  out.precision(17);
  out << "edge,x,re,im,abs2\n";
  for (const Edge& e : f.graph.edges) {
    double span = f.graph.extent(e.id);
    for (int i = 0; i <= 200; ++i) {
      double x = span * i / 200.0;
      Complex v = evaluate(f, GraphPoint::on_edge(e.id, x));
      out << e.id << ',' << x << ',' << v.real() << ',' << v.imag() << ','
          << std::norm(v) << '\n';
    }
  }
  return out.str();
}

// Resonance census of a sheaf's graph: closed edges (resonant among them),
// open edges, resonant loops.  Nonresonant loops and segments are invisible
// to the dimension formula.
std::array<int, 4> census(const TransmissionLineSheaf& s) {
  int l = 0, lp = 0, m = 0, n = 0;
  for (const Edge& e : s.graph.edges) switch (e.kind) {
      case EdgeKind::Open: ++m; break;
      case EdgeKind::Closed:
        ++l;
        if (closed_edge_resonant(s, e.id)) ++lp;
        break;
      case EdgeKind::Loop:
        if (loop_resonant(s, e.id)) ++n;
        break;
      case EdgeKind::Segment: break;
    }
  return {l, lp, m, n};
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario IO
// ---------------------------------------------------------------------------

Scenario scenario_from_json(const std::string& text) {
  json j = json::parse(text);
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.graph = graph_from_json_text(j.at("graph").dump());
  auto issues = validate(s.graph);
  if (!issues.empty())
    throw std::invalid_argument("invalid graph: " + issues.front());

  if (j.contains("transmitters"))
    for (const auto& t : j["transmitters"]) s.transmitters.push_back(point_from_json(t));

  const json& w = j.at("wavenumber");
  s.kprime = w.at("kprime").get<double>();
  if (!(s.kprime > 0.0)) throw std::invalid_argument("kprime must be positive");
  if (w.contains("alpha") && w["alpha"].is_number()) {
    double a = w["alpha"].get<double>();
    if (a < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    s.alpha = a;
  } else if (w.contains("alpha") && w["alpha"] != "auto") {
    throw std::invalid_argument("alpha must be a number or \"auto\"");
  }

  if (j.contains("thresholds") && j["thresholds"].is_array()) {
    for (const auto& t : j["thresholds"]) s.thresholds.push_back(t.get<double>());
    if (s.thresholds.size() != s.transmitters.size())
      throw std::invalid_argument("need one threshold per transmitter");
    for (double t : s.thresholds)
      if (!(t > 0.0)) throw std::invalid_argument("thresholds must be positive");
  } else if (j.contains("thresholds") && j["thresholds"] != "auto") {
    throw std::invalid_argument("thresholds must be an array or \"auto\"");
  }

  if (j.contains("compact_part") && j["compact_part"].is_object())
    s.compact_part = region_from_json(j["compact_part"]);
  else if (j.contains("compact_part") && j["compact_part"] != "all-vertices-hull")
    throw std::invalid_argument(
        "compact_part must be a region object or \"all-vertices-hull\"");

  if (j.contains("probe")) s.probe = point_from_json(j["probe"]);
  if (j.contains("seed"))
    s.seed = j["seed"].get<std::uint64_t>();
  else if (j.contains("seeds"))
    s.seed = j["seeds"].get<std::uint64_t>();
  s.synthetic = j.value("synthetic", true);

  for (const GraphPoint& t : s.transmitters) check_on_graph(s.graph, t, "transmitter");
  if (s.probe) check_on_graph(s.graph, *s.probe, "probe");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return scenario_from_json(buf.str());
  } catch (const json::exception& ex) {
    throw std::invalid_argument("malformed scenario " + path + ": " + ex.what());
  }
}

std::string scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["name"] = s.name;
  j["graph"] = ordered_json::parse(graph_to_json_text(s.graph));
  ordered_json tx = ordered_json::array();
  for (const GraphPoint& t : s.transmitters) tx.push_back(point_to_json(t));
  j["transmitters"] = tx;
  j["wavenumber"] = ordered_json{{"kprime", s.kprime}};
  if (s.alpha)
    j["wavenumber"]["alpha"] = *s.alpha;
  else
    j["wavenumber"]["alpha"] = "auto";
  if (s.thresholds.empty())
    j["thresholds"] = "auto";
  else
    j["thresholds"] = s.thresholds;
  if (s.compact_part)
    j["compact_part"] = region_to_json(*s.compact_part);
  else
    j["compact_part"] = "all-vertices-hull";
  if (s.probe) j["probe"] = point_to_json(*s.probe);
  j["seed"] = s.seed;
  j["synthetic"] = s.synthetic;
  return j.dump(2) + "\n";
}

std::uint64_t scenario_hash(const Scenario& s) { return fnv1a(scenario_to_json(s)); }

Region compact_hull(const MetricGraph& g) {
  Region r;
  for (const Edge& e : g.edges)
    if (e.kind != EdgeKind::Open) r.intervals[e.id] = {{0.0, e.length}};
  for (int v : g.vertices) r.vertices.insert(v);
  return r;
}

std::vector<GraphPoint> placed_transmitters(const Scenario& s) {
  std::vector<GraphPoint> out = s.transmitters;
  if (s.seed == 0) return out;
  std::mt19937_64 rng(s.seed ^ fnv1a(s.name));
  for (GraphPoint& p : out) p = jitter_point(s.graph, p, rng);
  return out;
}

GraphPoint placed_probe(const Scenario& s) {
  if (!s.probe) {
    auto placed = placed_transmitters(s);
    if (placed.empty()) throw std::invalid_argument("no transmitters");
    return placed.front();
  }
  if (s.seed == 0) return *s.probe;
  std::mt19937_64 rng(s.seed ^ fnv1a(s.name) ^ 0x9e3779b97f4a7c15ull);
  return jitter_point(s.graph, *s.probe, rng);
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

RunResult run_simulate(const Scenario& s) {
  if (s.transmitters.empty()) throw std::invalid_argument("no transmitters");
  auto placed = placed_transmitters(s);
  double alpha = s.alpha ? *s.alpha : auto_loss(s);
  Wavenumber k{s.kprime, alpha};

  ordered_json j = report_head(s, "simulate");
  j["loss"] = ordered_json{{"alpha", alpha},
                           {"policy", s.alpha ? "scenario" : "longest-edge ladder"}};
  RunResult out;
  double worst = 0.0;
  ordered_json traces = ordered_json::array();
  for (std::size_t i = 0; i < placed.size(); ++i) {
    WaveField f = solve_fundamental(s.graph, placed[i], k);
    worst = std::max(worst, constraint_residual(f));
    std::string name = "trace_" + std::to_string(i) + ".csv";
    std::string csv = trace_csv(f);
    int rows = static_cast<int>(std::count(csv.begin(), csv.end(), '\n')) - 1;
    traces.push_back(ordered_json{{"transmitter", point_to_json(placed[i])},
                                  {"file", name},
                                  {"rows", rows}});
    out.artifacts.emplace_back(std::move(name), std::move(csv));
  }
  j["traces"] = traces;
  j["constraint_residual"] = worst;
  out.report_json = finish(j);
  return out;
}

RunResult run_topology(const Scenario& s) {
  if (s.transmitters.empty()) throw std::invalid_argument("no transmitters");
  auto placed = placed_transmitters(s);
  Region target = s.compact_part ? *s.compact_part : compact_hull(s.graph);

  ordered_json j = report_head(s, "topology");
  std::vector<VisibilityRegion> vis;
  double alpha = 0.0;
  std::string policy;
  if (s.thresholds.empty()) {
    auto [regions, shared] =
        build_visibility_cover(s.graph, placed, Wavenumber{s.kprime, 0.0}, target);
    vis = std::move(regions);
    alpha = shared;
    policy = "shared ladder";
  } else {
    alpha = s.alpha ? *s.alpha : auto_loss(s);
    policy = s.alpha ? "scenario" : "longest-edge ladder";
    Wavenumber k{s.kprime, alpha};
    Region covered;
    for (std::size_t i = 0; i < placed.size(); ++i) {
      WaveField f = solve_fundamental(s.graph, placed[i], k);
      vis.push_back(superlevel_region(f, s.thresholds[i], true));
      covered = region_union(s.graph, covered, vis.back().region);
    }
    auto gaps = coverage_gaps(s.graph, target, covered, tols().merge);
    if (!gaps.empty()) {
      std::string msg = "cover gap:";
      for (const auto& gp : gaps) msg += " " + gp + ";";
      throw std::runtime_error(msg);
    }
  }
  j["loss"] = ordered_json{{"alpha", alpha}, {"policy", policy}};
  ordered_json tarr = ordered_json::array();
  for (const auto& vr : vis) tarr.push_back(vr.threshold);
  j["thresholds"] = tarr;
  ordered_json txarr = ordered_json::array();
  for (const auto& p : placed) txarr.push_back(point_to_json(p));
  j["transmitters"] = txarr;

  std::vector<Region> regions;
  regions.reserve(vis.size());
  for (const auto& vr : vis) regions.push_back(vr.region);
  std::vector<std::string> notes;
  Cover cover = refine_all(s.graph, regions, &notes);
  auto violations = verify_good_cover(cover);
  NerveComplex nv = nerve(cover);
  auto [b0, b1] = simplicial_betti(nv);

  j["cover"] = ordered_json{{"elements", static_cast<int>(vis.size())},
                            {"refined_elements", static_cast<int>(cover.elements.size())},
                            {"skipped", notes},
                            {"good", violations.empty()},
                            {"violations", violations}};
  std::vector<int> by_dim(static_cast<std::size_t>(std::max(nv.dimension() + 1, 0)), 0);
  for (const auto& simplex : nv.simplices) ++by_dim[simplex.size() - 1];
  j["nerve"] = ordered_json{{"simplices_by_dim", by_dim}, {"betti", {b0, b1}}};
  if (s.synthetic) {
    auto [g0, g1] = betti(s.graph);
    j["ground_truth"] = {g0, g1};
    j["match"] = (b0 == g0 && b1 == g1);
  }

  RunResult out;
  ordered_json cov = ordered_json::array();
  for (const Region& r : cover.elements) cov.push_back(region_to_json(r));
  out.artifacts.emplace_back("cover.json",
                             ordered_json{{"elements", cov}}.dump(2) + "\n");
  out.report_json = finish(j);
  return out;
}

RunResult run_cohomology(const Scenario& s, const std::optional<ScanRequest>& scan) {
  Wavenumber k{s.kprime, s.alpha.value_or(0.0)};
  auto sheaf = from_quantum_graph(s.graph, k);
  auto coh = cech_cohomology(sheaf);

  ordered_json j = report_head(s, "cohomology");
  j["loss"] = ordered_json{{"alpha", k.alpha},
                           {"policy", s.alpha ? "scenario" : "lossless default"}};
  j["dims"] = ordered_json{{"h0", coh.h0}, {"h1", coh.h1}};
  j["global_sections"] = static_cast<int>(coh.global_sections.cols());

  auto [l, lp, m, n] = census(sheaf);
  j["census"] = ordered_json{{"closed", l},
                             {"closed_resonant", lp},
                             {"open", m},
                             {"resonant_loops", n}};
  try {
    auto [p0, p1] = predicted_dims(l, lp, m, n);
    j["prediction"] = ordered_json{{"h0", p0}, {"h1", p1}};
    j["prediction_matches"] = (p0 == coh.h0 && p1 == coh.h1);
  } catch (const std::exception& ex) {
    j["prediction"] = nullptr;
    j["prediction_matches"] = nullptr;
    j["prediction_note"] = ex.what();
  }
  try {
    auto inv = euler_invariant(sheaf);
    j["euler"] = ordered_json{{"chi", inv.chi},
                              {"open_edges", inv.m},
                              {"b1", inv.b1},
                              {"chi_equals_m", inv.chi_equals_m},
                              {"h1_within_b1", inv.h1_within_b1}};
  } catch (const std::exception&) {
    j["euler"] = nullptr;  // closed edges present
  }

  RunResult out;
  if (scan) {
    if (!(scan->grid > 0) || !(scan->k_hi > scan->k_lo) || !(scan->k_lo >= 0.0))
      throw std::invalid_argument("scan needs 0 <= k_lo < k_hi and a positive grid");
    ResonanceScan rs = resonance_scan(s.graph, scan->k_lo, scan->k_hi, scan->grid);
    ordered_json evs = ordered_json::array();
    for (const auto& ev : rs.events)
      evs.push_back(ordered_json{{"kprime", ev.kprime},
                                 {"multiplicity", ev.multiplicity},
                                 {"h0", ev.h0},
                                 {"h1", ev.h1}});
    j["scan"] = ordered_json{{"k_lo", rs.k_lo},
                             {"k_hi", rs.k_hi},
                             {"grid", rs.grid},
                             {"baseline", {rs.baseline_h0, rs.baseline_h1}},
                             {"events", evs},
                             {"csv", "scan.csv"}};
    try {
      j["scan"]["recovered_lengths"] = recover_loop_lengths(rs, m);
    } catch (const std::exception& ex) {
      j["scan"]["recovered_lengths"] = nullptr;
      j["scan"]["note"] = ex.what();
    }
    out.artifacts.emplace_back("scan.csv", scan_to_csv(rs));
  }
  out.report_json = finish(j);
  return out;
}

RunResult run_geometry(const Scenario& s) {
  Wavenumber k{s.kprime, s.alpha.value_or(0.0)};
  GraphPoint probe = placed_probe(s);
  WaveField f = solve_fundamental(s.graph, probe, k);
  SectionObservation obs = observe_field(f);
  RecoveredGeometry geom = extract_geometry(s.graph, obs, k);
  double resid = verify_section_consistency(s.graph, obs, geom, k);

  ordered_json j = report_head(s, "geometry");
  j["loss"] = ordered_json{{"alpha", k.alpha},
                           {"policy", s.alpha ? "scenario" : "lossless default"}};
  j["probe"] = point_to_json(probe);
  j["scale"] = geom.scale;
  ordered_json edges = ordered_json::array();
  for (const RecoveredEdge& e : geom.edges) {
    ordered_json ej;
    ej["chain"] = e.chain;
    ej["va"] = e.va;
    ej["vb"] = e.vb;
    ej["kind"] = kind_name(e.kind);
    ej["tree_edge"] = e.tree_edge;
    ej["endomorphism"] = {e.endo.real(), e.endo.imag()};
    if (e.length.modulus == 0.0)
      ej["length"] = ordered_json{{"value", e.length.base}};
    else
      ej["length"] =
          ordered_json{{"base", e.length.base}, {"modulus", e.length.modulus}};
    ej["cross_check"] = e.cross_check;
    edges.push_back(ej);
  }
  j["edges"] = edges;
  j["verify_residual"] = resid;
  j["consistent"] = (resid <= 1e-8 * geom.scale);

  RunResult out;
  out.report_json = finish(j);
  return out;
}

// ---------------------------------------------------------------------------
// Verification suites
// ---------------------------------------------------------------------------

namespace {

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Local copies of the small graph builders (the suites are self-contained).
Edge mk_seg(int id, int a, int b, double len) {
  return Edge{id, a, b, len, EdgeKind::Segment};
}
Edge mk_loop(int id, int v, double len) { return Edge{id, v, v, len, EdgeKind::Loop}; }
Edge mk_closed(int id, int a, int tip, double len) {
  return Edge{id, a, tip, len, EdgeKind::Closed};
}
Edge mk_open(int id, int v) { return Edge{id, v, -1, kInf, EdgeKind::Open}; }

MetricGraph mk(std::vector<int> vs, std::vector<Edge> es) {
  MetricGraph g;
  g.vertices = std::move(vs);
  g.edges = std::move(es);
  return g;
}

MetricGraph mk_interval(double L) { return mk({0, 1}, {mk_closed(0, 0, 1, L)}); }
MetricGraph mk_single_loop(double L) { return mk({0}, {mk_loop(0, 0, L)}); }
MetricGraph mk_figure_eight(double l1, double l2) {
  return mk({0}, {mk_loop(0, 0, l1), mk_loop(1, 0, l2)});
}
MetricGraph mk_figure_eight_open(double l1, double l2) {
  return mk({0}, {mk_loop(0, 0, l1), mk_loop(1, 0, l2), mk_open(2, 0)});
}
MetricGraph mk_open_plus_loop(double L) {
  return mk({0}, {mk_open(0, 0), mk_loop(1, 0, L)});
}
MetricGraph mk_theta(double l1, double l2, double l3) {
  return mk({0, 1}, {mk_seg(0, 0, 1, l1), mk_seg(1, 0, 1, l2), mk_seg(2, 0, 1, l3)});
}
MetricGraph mk_dumbbell(double l1, double bar, double l2) {
  return mk({0, 1}, {mk_loop(0, 0, l1), mk_seg(1, 0, 1, bar), mk_loop(2, 1, l2)});
}
MetricGraph mk_star_open(int rays) {
  MetricGraph g;
  g.vertices = {0};
  for (int i = 0; i < rays; ++i) g.edges.push_back(mk_open(i, 0));
  return g;
}

std::pair<int, int> dims_of(const TransmissionLineSheaf& s) {
  auto r = cech_cohomology(s);
  return {r.h0, r.h1};
}

std::string dims_text(std::pair<int, int> a, std::pair<int, int> b) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "computed (%d, %d), predicted (%d, %d)", a.first,
                a.second, b.first, b.second);
  return buf;
}

// One dimension-formula cell: computed cohomology against the census
// prediction at the given wavenumber.
void census_check(std::vector<Check>& out, const std::string& name,
                  const MetricGraph& g, double kprime) {
  auto sheaf = from_quantum_graph(g, Wavenumber{kprime, 0.0});
  auto got = dims_of(sheaf);
  auto [l, lp, m, n] = census(sheaf);
  auto want = predicted_dims(l, lp, m, n);
  out.push_back({name, got == want, dims_text(got, want)});
}

std::vector<Check> theorem42_suite() {
  std::vector<Check> out;
  double k0 = 2.0 * kPi;  // unit-length edges resonate here
  for (int rays = 1; rays <= 4; ++rays)
    census_check(out, "ray star m=" + std::to_string(rays), mk_star_open(rays), 1.1);
  census_check(out, "ray + resonant loop", mk_open_plus_loop(1.0), k0);
  census_check(out, "ray + nonresonant loop", mk_open_plus_loop(1.0), 2.5);
  census_check(out, "ray + two resonant loops", mk_figure_eight_open(1.0, 1.0), k0);
  census_check(out, "resonant circle", mk_single_loop(1.0), k0);
  census_check(out, "two resonant loops", mk_figure_eight(1.0, 1.0), k0);
  census_check(out, "resonant loop + resonant tip",
               mk({0, 1}, {mk_loop(0, 0, 1.0), mk_closed(1, 0, 1, 1.0)}), k0);
  census_check(out, "resonant tip edge", mk_interval(1.0), kPi);
  census_check(out, "nonresonant tip edge", mk_interval(1.0), 2.5);
  return out;
}

void collapse_preserves(std::vector<Check>& out, const std::string& name,
                        const TransmissionLineSheaf& before, int edge_id) {
  auto a = dims_of(before);
  auto b = dims_of(collapse_tl_edge(before, edge_id));
  out.push_back({name, a == b, dims_text(b, a)});
}

std::vector<Check> collapse_suite() {
  std::vector<Check> out;
  for (double alpha : {0.0, 0.25})
    for (int eid : {0, 1, 2}) {
      auto s = from_quantum_graph(mk_theta(1.0, 1.3, 0.8), Wavenumber{1.37, alpha});
      collapse_preserves(out,
                         "theta edge " + std::to_string(eid) +
                             (alpha > 0 ? " lossy" : " lossless"),
                         s, eid);
    }
  collapse_preserves(
      out, "dumbbell bar",
      from_quantum_graph(mk_dumbbell(1.0, 0.7, 1.2), Wavenumber{1.37, 0.0}), 1);

  // Fold a full spanning tree, then drop every nonresonant loop; the dims of
  // the resulting bouquet must match the original (or the original must have
  // had none at all).
  for (auto [name, g] :
       {std::pair<const char*, MetricGraph>{"theta fold", mk_theta(1.0, 1.3, 0.8)},
        {"dumbbell fold", mk_dumbbell(1.0, 0.7, 1.2)},
        {"eight+ray fold", mk_figure_eight_open(1.0, std::sqrt(2.0))}}) {
    auto s = from_quantum_graph(g, Wavenumber{1.3, 0.0});
    auto want = dims_of(s);
    for (int eid : spanning_tree(s.graph)) s = collapse_tl_edge(s, eid);
    std::vector<int> loops;
    for (const Edge& e : s.graph.edges)
      if (e.kind == EdgeKind::Loop) loops.push_back(e.id);
    for (int eid : loops)
      if (!loop_resonant(s, eid)) s = collapse_nonresonant_loop(s, eid);
    bool pass = s.graph.edges.empty() ? want == std::pair<int, int>{0, 0}
                                      : dims_of(s) == want;
    out.push_back({name, pass, ""});
  }

  {
    auto s = from_quantum_graph(mk_figure_eight(1.0, 1.0), Wavenumber{2.5, 0.0});
    auto a = dims_of(s);
    auto b = dims_of(collapse_nonresonant_loop(s, 0));
    out.push_back({"nonresonant loop removal", a == b, dims_text(b, a)});
  }
  {
    auto s = from_quantum_graph(mk_figure_eight(1.0, 1.0), Wavenumber{2.0 * kPi, 0.0});
    bool rejected = false;
    std::string detail = "resonant removal was not rejected";
    try {
      (void)collapse_nonresonant_loop(s, 0);
    } catch (const std::exception& ex) {
      rejected = true;
      detail = ex.what();
    }
    out.push_back({"resonant loop rejected", rejected, detail});
  }

  // Directed-flow collapses with random codings.
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 4; ++trial) {
    FlowSheaf f;
    f.vertices = {0, 1};
    int parallel = 2 + trial % 2;
    for (int i = 0; i < parallel; ++i) {
      f.edges.push_back({0, 1});
      f.edges.push_back({1, 0});
    }
    for (int v : f.vertices) {
      int nin = static_cast<int>(f.incoming(v).size());
      int nout = static_cast<int>(f.outgoing(v).size());
      Eigen::MatrixXcd c(nout, nin);
      for (int r = 0; r < nout; ++r)
        for (int cx = 0; cx < nin; ++cx)
          c(r, cx) = Complex(2.0 * urand(rng) - 1.0, 2.0 * urand(rng) - 1.0);
      f.coding[v] = c;
    }
    for (std::size_t i = 0; i < f.edges.size(); ++i)
      f.endo[static_cast<int>(i)] = 1.0;
    auto before = cech_cohomology(f);
    auto after = cech_cohomology(collapse_flow_edge(f, trial % 2));
    out.push_back({"flow collapse trial " + std::to_string(trial),
                   before.h0 == after.h0 && before.h1 == after.h1,
                   dims_text({after.h0, after.h1}, {before.h0, before.h1})});
  }
  return out;
}

}  // namespace

RunResult run_verify(const std::string& suite) {
  std::vector<Check> checks;
  if (suite == "theorem42")
    checks = theorem42_suite();
  else if (suite == "collapse")
    checks = collapse_suite();
  else
    throw std::invalid_argument("unknown suite \"" + suite +
                                "\" (available: theorem42, collapse)");

  ordered_json j;
  j["schema"] = "qgr-report/1";
  j["command"] = "verify";
  j["suite"] = suite;
  const Tolerances& t = tols();
  j["tolerances"] =
      ordered_json{{"rank", t.rank},           {"residual", t.residual},
                   {"resonance", t.resonance}, {"roots", t.roots},
                   {"merge", t.merge},         {"pivot", t.pivot}};
  int passed = 0;
  ordered_json arr = ordered_json::array();
  for (const Check& c : checks) {
    passed += c.pass ? 1 : 0;
    ordered_json cj = ordered_json{{"name", c.name}, {"pass", c.pass}};
    if (!c.detail.empty()) cj["detail"] = c.detail;
    arr.push_back(cj);
  }
  j["checks"] = arr;
  j["passed"] = passed;
  j["failed"] = static_cast<int>(checks.size()) - passed;
  j["all_pass"] = passed == static_cast<int>(checks.size());

  RunResult out;
  out.report_json = finish(j);
  return out;
}

}  // namespace qgr
