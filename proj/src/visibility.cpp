#include "qgr/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qgr/tolerances.hpp"

namespace qgr {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOffsetTol = 1e-10;  // bisection stopping width

// Squared envelope of the piece covering x: the oscillatory cross term of
// |c_plus e^{ikx} + c_minus e^{-ikx}|^2 replaced by its maximum.
double envelope_sq_at(const WaveField& f, int edge, double x) {
  auto it = f.waves.find(edge);
  if (it == f.waves.end() || it->second.empty()) return 0.0;
  const WavePiece* piece = &it->second.back();
  for (const WavePiece& p : it->second) {
    if (x <= p.x1) {
      piece = &p;
      break;
    }
  }
  double a = f.k.alpha;
  double up = std::abs(piece->w.c_plus) * std::exp(-a * x);
  double um = std::abs(piece->w.c_minus) * std::exp(a * x);
  return (up + um) * (up + um);
}

double value_sq(const WaveField& f, int edge, double x, bool use_envelope) {
  if (use_envelope) return envelope_sq_at(f, edge, x);
  Complex u = evaluate(f, GraphPoint::on_edge(edge, x));
  return std::norm(u);
}

// Refine a bracketed sign change of value_sq - T^2 down to kOffsetTol.
double bisect_crossing(const WaveField& f, int edge, double lo, double hi,
                       bool lo_above, double t2, bool use_envelope) {
  while (hi - lo > kOffsetTol) {
    double mid = 0.5 * (lo + hi);
    bool above = value_sq(f, edge, mid, use_envelope) > t2;
    if (above == lo_above)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

VisibilityRegion superlevel_region(const WaveField& f, double T, bool use_envelope) {
  if (!(T > 0.0)) throw std::invalid_argument("nonpositive threshold");
  VisibilityRegion out;
  out.source = f.source;
  out.threshold = T;
  out.used_envelope = use_envelope;
  double t2 = T * T;

  for (const Edge& e : f.graph.edges) {
    double extent = f.graph.extent(e.id);
    if (!(extent > 0.0)) continue;
    // At least 512 samples; denser when several oscillations of the cross
    // term (wavelength pi/k') fit on the edge.
    int n = std::max(512, static_cast<int>(std::ceil(extent * f.k.kprime * 8.0 / kPi)));
    std::vector<Interval> parts;
    double open_start = -1.0;
    bool prev_above = false;
    double prev_x = 0.0;
    for (int i = 0; i <= n; ++i) {
      double x = extent * static_cast<double>(i) / n;
      bool above = value_sq(f, e.id, x, use_envelope) > t2;
      if (i == 0) {
        if (above) open_start = 0.0;
      } else if (above != prev_above) {
        double c = bisect_crossing(f, e.id, prev_x, x, prev_above, t2, use_envelope);
        if (above)
          open_start = c;
        else if (open_start >= 0.0) {
          if (c > open_start) parts.push_back({open_start, c});
          open_start = -1.0;
        }
      }
      prev_above = above;
      prev_x = x;
    }
    if (open_start >= 0.0 && extent > open_start) parts.push_back({open_start, extent});
    if (!parts.empty()) out.region.intervals[e.id] = std::move(parts);
  }

  // A vertex joins the region exactly when every incident end carries an
  // interval reaching it, which keeps the set open.
  for (int v : f.graph.vertices) {
    auto ends = f.graph.incident_ends(v);
    if (ends.empty()) continue;
    bool all = true;
    for (auto [eid, end] : ends) {
      auto it = out.region.intervals.find(eid);
      if (it == out.region.intervals.end()) {
        all = false;
        break;
      }
      double target = end == 0 ? 0.0 : f.graph.edge(eid).length;
      bool touches = false;
      for (const Interval& iv : it->second) {
        if (end == 0 ? iv.first <= kOffsetTol : iv.second >= target - kOffsetTol) {
          touches = true;
          break;
        }
      }
      if (!touches) {
        all = false;
        break;
      }
    }
    if (all) out.region.vertices.insert(v);
  }
  return out;
}

namespace {

constexpr double kWorstReflection = 0.95;  // conservative bound away from 1

// Propagation length for the interference model: the longest edge extent the
// signal can traverse.  Anchoring the loss ladder to the longest edge keeps
// the selected loss as low as admissible (the admissibility inequality only
// gets easier on shorter edges), which maximizes region size.
double source_span(const MetricGraph& g, const GraphPoint& y) {
  double best = y.edge >= 0 ? std::max(y.offset, g.extent(y.edge) - y.offset) : 0.0;
  for (const Edge& e : g.edges)
    if (e.kind != EdgeKind::Open) best = std::max(best, e.length);
  if (best <= 0.0) best = g.truncation;
  return best;
}

// Threshold for a fixed loss: the first-sidelobe amplitude of the
// interference model, the same quantity the ladder search optimizes.
double threshold_at(double alpha, double kprime, double span) {
  double xf = first_sidelobe(kprime, span);
  Wavenumber k{kprime, alpha};
  double t2 = amplitude_sq_closed_form(xf, span, kWorstReflection, k);
  return std::sqrt(std::max(t2, 1e-300));
}

// Outgoing wave amplitude at the source, used to rescale the unit-incidence
// interference model to the actual excitation strength.
double launch_amplitude(const WaveField& u, const GraphPoint& y) {
  double best = 0.0;
  auto it = u.waves.find(y.edge);
  if (it == u.waves.end()) return 1.0;
  double a = u.k.alpha;
  for (const WavePiece& p : it->second) {
    if (std::abs(p.x0 - y.offset) < 1e-12)
      best = std::max(best, std::abs(p.w.c_plus) * std::exp(-a * y.offset));
    if (std::abs(p.x1 - y.offset) < 1e-12)
      best = std::max(best, std::abs(p.w.c_minus) * std::exp(a * y.offset));
  }
  return best > 0.0 ? best : 1.0;
}

struct CoverAttempt {
  std::vector<VisibilityRegion> regions;
  bool contractible = false;
};

std::pair<std::vector<VisibilityRegion>, double> cover_core(
    const MetricGraph& g, const std::vector<GraphPoint>& sources,
    const Wavenumber& k0, const Region& compact_part, bool parallel) {
  if (sources.empty()) throw std::invalid_argument("no sources");
  for (int v : g.vertices)
    if (!compact_part.vertices.count(v))
      throw std::invalid_argument("compact part misses a vertex");

  // Stage 1: per-source lemma loss, then share the largest.
  double shared_alpha = 0.0;
  std::vector<double> spans(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    spans[i] = source_span(g, sources[i]);
    auto [alpha_y, t_y] = select_loss_and_threshold(kWorstReflection, k0.kprime, spans[i]);
    (void)t_y;
    shared_alpha = std::max(shared_alpha, alpha_y);
  }

  // The interference model is a single-edge picture with unit incidence, but
  // on a graph the wave sheds amplitude at every junction it crosses: a
  // Kirchhoff vertex of degree d transmits a 2/d fraction.  Admit one such
  // crossing when thresholding, so each region spills past its nearest
  // junction instead of stopping at it — that is what lets neighbouring
  // regions overlap across a vertex and leaves every junction point inside
  // at least one region.
  double transmission = 1.0;
  for (int v : g.vertices)
    transmission = std::min(transmission, 2.0 / std::max(1, g.degree(v)));

  // The crossing happens a positive distance from the source, so the wave
  // arrives attenuated by the in-path decay e^{-alpha d} as well as by the
  // junction split.  Admit that decay over the distance to the nearest
  // junction along the source's own edge.  On a loop both ends are the same
  // vertex and admitting the full half-length would keep the whole loop
  // above threshold at every loss, so cap the admitted distance to leave at
  // least two sidelobe widths between the region boundary and the antipode;
  // then raising the loss always restores contractibility.
  std::vector<double> dnear(sources.size(), 0.0);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const GraphPoint& y = sources[i];
    if (y.edge < 0) continue;  // already sitting on a junction
    const Edge& e = g.edge(y.edge);
    double d = e.kind == EdgeKind::Open ? y.offset
                                        : std::min(y.offset, e.length - y.offset);
    if (e.kind != EdgeKind::Open && e.v0 == e.v1) {
      double xf = first_sidelobe(k0.kprime, spans[i]);
      d = std::min(d, std::max(0.0, 0.5 * e.length - 2.0 * xf));
    }
    dnear[i] = d;
  }

  // Stage 2: solve and threshold everything at the shared loss; raise the
  // loss if any region fails the contractibility certificate.
  const int n = static_cast<int>(sources.size());
  for (int attempt = 0; attempt <= 60; ++attempt) {
    Wavenumber k{k0.kprime, shared_alpha};
    std::vector<VisibilityRegion> regions(n);
    std::vector<int> bad(n, 0);
    auto run_one = [&](int i) {
      WaveField u = solve_fundamental(g, sources[i], k);
      double t = launch_amplitude(u, sources[i]) * transmission *
                 std::exp(-shared_alpha * dnear[i]) *
                 threshold_at(shared_alpha, k0.kprime, spans[i]);
      regions[i] = superlevel_region(u, t, true);
      auto b = betti(g, regions[i].region);
      bad[i] = (b.first == 1 && b.second == 0) ? 0 : 1;
    };
    if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
      for (int i = 0; i < n; ++i) run_one(i);
    } else {
      for (int i = 0; i < n; ++i) run_one(i);
    }
    if (std::any_of(bad.begin(), bad.end(), [](int b) { return b != 0; })) {
      shared_alpha *= 2.0;  // more loss shrinks lobes; retry
      continue;
    }

    Region covered;
    for (const auto& vr : regions) covered = region_union(g, covered, vr.region);
    auto gaps = coverage_gaps(g, compact_part, covered, 1e-8);
    if (!gaps.empty()) {
      std::ostringstream msg;
      msg << "cover gap:";
      for (const auto& s : gaps) msg << " " << s;
      throw std::runtime_error(msg.str());
    }
    return {std::move(regions), shared_alpha};
  }
  throw std::runtime_error("no admissible alpha within budget");
}

}  // namespace

std::pair<std::vector<VisibilityRegion>, double> build_visibility_cover(
    const MetricGraph& g, const std::vector<GraphPoint>& sources,
    const Wavenumber& k0, const Region& compact_part) {
  return cover_core(g, sources, k0, compact_part, true);
}

std::pair<std::vector<VisibilityRegion>, double> build_visibility_cover_serial(
    const MetricGraph& g, const std::vector<GraphPoint>& sources,
    const Wavenumber& k0, const Region& compact_part) {
  return cover_core(g, sources, k0, compact_part, false);
}

}  // namespace qgr
