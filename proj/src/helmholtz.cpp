#include "qgr/helmholtz.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qgr/tolerances.hpp"

namespace qgr {

namespace {

constexpr double kMaxLossLength = 650.0;  // e^{650} is near the double limit

// One unknown block of the linear system.  Finite pieces use the stable
// parameterization u(xi) = a e^{ik xi} + b e^{ik (ell - xi)} (both basis
// functions bounded by 1 in magnitude on the piece); open-edge pieces use
// either the single outgoing term (radiation) or the plain pair
// a e^{ikx} + b e^{-ikx} when arriving waves are admitted.
struct PieceDesc {
  int edge = -1;
  double x0 = 0.0;
  double x1 = 0.0;  // kInf on open tails
  enum class Form { Finite, Radiation, OpenPair } form = Form::Finite;
  int col = 0;
  int ncols = 2;
};

struct RowCoef {
  // coefficients for the piece's unknowns
  Complex c[2] = {0.0, 0.0};
};

double local_len(const PieceDesc& p) { return p.x1 - p.x0; }

// Value of the piece's basis functions at local coordinate xi.
RowCoef value_at(const PieceDesc& p, double xi, Complex ik) {
  RowCoef r;
  switch (p.form) {
    case PieceDesc::Form::Finite:
      r.c[0] = std::exp(ik * xi);
      r.c[1] = std::exp(ik * (local_len(p) - xi));
      break;
    case PieceDesc::Form::Radiation:
      r.c[0] = std::exp(ik * xi);
      break;
    case PieceDesc::Form::OpenPair:
      r.c[0] = std::exp(ik * xi);
      r.c[1] = std::exp(-ik * xi);
      break;
  }
  return r;
}

// Derivative (d/dxi) of the same basis functions.
RowCoef deriv_at(const PieceDesc& p, double xi, Complex ik) {
  RowCoef r;
  switch (p.form) {
    case PieceDesc::Form::Finite:
      r.c[0] = ik * std::exp(ik * xi);
      r.c[1] = -ik * std::exp(ik * (local_len(p) - xi));
      break;
    case PieceDesc::Form::Radiation:
      r.c[0] = ik * std::exp(ik * xi);
      break;
    case PieceDesc::Form::OpenPair:
      r.c[0] = ik * std::exp(ik * xi);
      r.c[1] = -ik * std::exp(-ik * xi);
      break;
  }
  return r;
}

struct System {
  std::vector<PieceDesc> pieces;
  Eigen::MatrixXcd A;
  Eigen::VectorXcd rhs;
};

// Piece touching a given end of an edge (end 0: x0 == 0; end 1: x1 == length).
int end_piece(const System& sys, int edge, int end, double length) {
  for (size_t i = 0; i < sys.pieces.size(); ++i) {
    const auto& p = sys.pieces[i];
    if (p.edge != edge) continue;
    if (end == 0 && p.x0 == 0.0) return static_cast<int>(i);
    if (end == 1 && p.x1 == length) return static_cast<int>(i);
  }
  throw std::logic_error("piece lookup failed");
}

System assemble(const MetricGraph& g, const GraphPoint* src, const Wavenumber& kk,
                bool radiation) {
  Complex ik = Complex(0.0, 1.0) * kk.k();
  System sys;
  int col = 0;
  for (const auto& e : g.edges) {
    bool split = src && !src->is_vertex() && src->edge == e.id;
    if (e.kind == EdgeKind::Open) {
      if (split) {
        sys.pieces.push_back({e.id, 0.0, src->offset, PieceDesc::Form::Finite, col, 2});
        col += 2;
      }
      double tail0 = split ? src->offset : 0.0;
      auto form = radiation ? PieceDesc::Form::Radiation : PieceDesc::Form::OpenPair;
      int n = radiation ? 1 : 2;
      sys.pieces.push_back({e.id, tail0, kInf, form, col, n});
      col += n;
    } else if (split) {
      sys.pieces.push_back({e.id, 0.0, src->offset, PieceDesc::Form::Finite, col, 2});
      col += 2;
      sys.pieces.push_back(
          {e.id, src->offset, e.length, PieceDesc::Form::Finite, col, 2});
      col += 2;
    } else {
      sys.pieces.push_back({e.id, 0.0, e.length, PieceDesc::Form::Finite, col, 2});
      col += 2;
    }
  }

  int rows = 0;
  for (int v : g.vertices) rows += g.degree(v);
  if (src) rows += 2;
  sys.A = Eigen::MatrixXcd::Zero(rows, col);
  sys.rhs = Eigen::VectorXcd::Zero(rows);

  auto put = [&](int row, int piece, const RowCoef& rc, Complex sign) {
    const auto& p = sys.pieces[piece];
    for (int j = 0; j < p.ncols; ++j) sys.A(row, p.col + j) += sign * rc.c[j];
  };

  struct VertexEnd {
    int piece;
    double xi;    // local coordinate of the vertex end within the piece
    double sign;  // orientation of the outgoing derivative
  };
  int row = 0;
  for (int v : g.vertices) {
    std::vector<VertexEnd> ends;
    for (auto [eid, end] : g.incident_ends(v)) {
      const Edge& e = g.edge(eid);
      if (end == 0) {
        ends.push_back({end_piece(sys, eid, 0, e.length), 0.0, +1.0});
      } else {
        int pi = end_piece(sys, eid, 1, e.length);
        ends.push_back({pi, local_len(sys.pieces[pi]), -1.0});
      }
    }
    // continuity against the first end
    const VertexEnd& r0 = ends.front();
    for (size_t j = 1; j < ends.size(); ++j) {
      put(row, r0.piece, value_at(sys.pieces[r0.piece], r0.xi, ik), 1.0);
      put(row, ends[j].piece, value_at(sys.pieces[ends[j].piece], ends[j].xi, ik),
          -1.0);
      ++row;
    }
    // Kirchhoff: outgoing derivatives sum to zero
    for (const VertexEnd& en : ends)
      put(row, en.piece, deriv_at(sys.pieces[en.piece], en.xi, ik), en.sign);
    ++row;
  }

  if (src) {
    // continuity and unit derivative jump across the source
    int left = -1, right = -1;
    for (size_t i = 0; i < sys.pieces.size(); ++i) {
      if (sys.pieces[i].edge != src->edge) continue;
      if (sys.pieces[i].x1 == src->offset) left = static_cast<int>(i);
      if (sys.pieces[i].x0 == src->offset) right = static_cast<int>(i);
    }
    if (left < 0 || right < 0) throw std::logic_error("source split missing");
    double lt = local_len(sys.pieces[left]);
    put(row, left, value_at(sys.pieces[left], lt, ik), 1.0);
    put(row, right, value_at(sys.pieces[right], 0.0, ik), -1.0);
    ++row;
    put(row, right, deriv_at(sys.pieces[right], 0.0, ik), 1.0);
    put(row, left, deriv_at(sys.pieces[left], lt, ik), -1.0);
    sys.rhs(row) = 1.0;
    ++row;
  }
  return sys;
}

WaveField field_from_solution(const MetricGraph& g, const Wavenumber& kk,
                              const System& sys, const Eigen::VectorXcd& x) {
  Complex ik = Complex(0.0, 1.0) * kk.k();
  WaveField f;
  f.graph = g;
  f.k = kk;
  for (const auto& p : sys.pieces) {
    WavePiece wp;
    wp.x0 = p.x0;
    wp.x1 = p.x1;
    switch (p.form) {
      case PieceDesc::Form::Finite:
        wp.w.c_plus = x(p.col) * std::exp(-ik * p.x0);
        wp.w.c_minus = x(p.col + 1) * std::exp(ik * p.x1);
        break;
      case PieceDesc::Form::Radiation:
        wp.w.c_plus = x(p.col) * std::exp(-ik * p.x0);
        wp.w.c_minus = 0.0;
        break;
      case PieceDesc::Form::OpenPair:
        wp.w.c_plus = x(p.col);
        wp.w.c_minus = x(p.col + 1);
        break;
    }
    f.waves[p.edge].push_back(wp);
  }
  for (auto& [e, v] : f.waves)
    std::sort(v.begin(), v.end(),
              [](const WavePiece& a, const WavePiece& b) { return a.x0 < b.x0; });
  return f;
}

void check_loss_budget(const MetricGraph& g, const Wavenumber& k,
                       const GraphPoint* src) {
  double worst = 0.0;
  for (const auto& e : g.edges)
    if (e.kind != EdgeKind::Open) worst = std::max(worst, e.length);
  if (src && !src->is_vertex()) worst = std::max(worst, src->offset);
  if (k.alpha * worst > kMaxLossLength) throw std::runtime_error("loss too large");
}

}  // namespace

WaveField solve_fundamental(const MetricGraph& g, const GraphPoint& y,
                            const Wavenumber& k) {
  if (!(k.kprime > 0.0) || k.alpha < 0.0)
    throw std::runtime_error("invalid wavenumber");
  if (betti(g).first != 1) throw std::runtime_error("disconnected graph");
  GraphPoint src = canonical(g, y);
  if (src.is_vertex()) throw std::runtime_error("vertex source rejected");
  check_loss_budget(g, k, &src);

  System sys = assemble(g, &src, k, /*radiation=*/true);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sys.A,
                                         Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  // The cutoff keeps an absolute floor: constraint rows have entries of order
  // one, so a near-zero sigma_max means the whole system degenerated.
  if (sv.size() == 0 ||
      sv(sv.size() - 1) <= tols().rank * std::max(sv(0), 1.0))
    throw std::runtime_error("singular system");
  Eigen::VectorXcd x = svd.solve(sys.rhs);

  WaveField f = field_from_solution(g, k, sys, x);
  f.has_source = true;
  f.source = src;
  return f;
}

std::vector<WaveField> homogeneous_basis(const MetricGraph& g, const Wavenumber& k) {
  if (g.edges.empty()) return {};
  check_loss_budget(g, k, nullptr);
  System sys = assemble(g, nullptr, k, /*radiation=*/false);
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sys.A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cutoff = sv.size() ? tols().rank * std::max(sv(0), 1.0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  int n = static_cast<int>(sys.A.cols());
  std::vector<WaveField> basis;
  for (int j = rank; j < n; ++j) {
    Eigen::VectorXcd x = svd.matrixV().col(j);
    basis.push_back(field_from_solution(g, k, sys, x));
  }
  return basis;
}

Complex evaluate(const WaveField& f, const GraphPoint& p0) {
  GraphPoint p = canonical(f.graph, p0);
  int edge = -1;
  double x = 0.0;
  if (p.is_vertex()) {
    for (const auto& e : f.graph.edges) {
      if (e.v0 == p.vertex) {
        edge = e.id;
        x = 0.0;
        break;
      }
      if (e.kind != EdgeKind::Open && e.v1 == p.vertex) {
        edge = e.id;
        x = e.length;
        break;
      }
    }
    if (edge < 0) throw std::runtime_error("point not on graph");
  } else {
    edge = p.edge;
    x = p.offset;
  }
  const auto& pieces = f.waves.at(edge);
  double tol = tols().merge;
  for (const auto& wp : pieces) {
    if (x < wp.x0 - tol || x > wp.x1 + tol) continue;
    Complex ik = Complex(0.0, 1.0) * f.k.k();
    return wp.w.c_plus * std::exp(ik * x) + wp.w.c_minus * std::exp(-ik * x);
  }
  throw std::runtime_error("point outside field pieces");
}

double constraint_residual(const WaveField& f) {
  Complex ik = Complex(0.0, 1.0) * f.k.k();
  double kmag = std::abs(f.k.k());
  auto wave_at = [&](const WavePiece& wp, double x) {
    Complex u = wp.w.c_plus * std::exp(ik * x) + wp.w.c_minus * std::exp(-ik * x);
    Complex du = ik * (wp.w.c_plus * std::exp(ik * x) - wp.w.c_minus * std::exp(-ik * x));
    return std::pair{u, du};
  };
  auto end_wave = [&](int edge, int end) {
    const Edge& e = f.graph.edge(edge);
    const auto& pieces = f.waves.at(edge);
    if (end == 0) return wave_at(pieces.front(), 0.0);
    return wave_at(pieces.back(), e.length);
  };

  double resid = 0.0, scale = 0.0;
  // Bound states may vanish at every vertex, so the scale also draws on the
  // coefficients themselves.
  for (const auto& [eid, pieces] : f.waves)
    for (const auto& wp : pieces)
      scale = std::max({scale, std::abs(wp.w.c_plus), std::abs(wp.w.c_minus)});
  for (int v : f.graph.vertices) {
    Complex kirchhoff = 0.0;
    bool have_ref = false;
    Complex ref = 0.0;
    for (auto [eid, end] : f.graph.incident_ends(v)) {
      auto [u, du] = end_wave(eid, end);
      scale = std::max(scale, std::abs(u));
      kirchhoff += (end == 0 ? du : -du);
      if (!have_ref) {
        ref = u;
        have_ref = true;
      } else {
        resid = std::max(resid, std::abs(u - ref));
      }
    }
    resid = std::max(resid, std::abs(kirchhoff) / std::max(1.0, kmag));
  }
  if (f.has_source) {
    const auto& pieces = f.waves.at(f.source.edge);
    double t = f.source.offset;
    const WavePiece* left = nullptr;
    const WavePiece* right = nullptr;
    for (const auto& wp : pieces) {
      if (std::abs(wp.x1 - t) < 1e-12) left = &wp;
      if (std::abs(wp.x0 - t) < 1e-12) right = &wp;
    }
    if (left && right) {
      auto [ul, dul] = wave_at(*left, t);
      auto [ur, dur] = wave_at(*right, t);
      scale = std::max(scale, std::abs(ul));
      resid = std::max(resid, std::abs(ul - ur));
      resid = std::max(resid, std::abs(dur - dul - 1.0) / std::max(1.0, kmag));
    }
  }
  return resid / std::max(scale, 1e-300);
}

double amplitude_sq_closed_form(double x, double L, double Gamma,
                                const Wavenumber& k) {
  double a = k.alpha;
  double c = Gamma * std::exp(-a * L);
  return std::exp(-2.0 * a * x) + c * c * std::exp(2.0 * a * (x - L)) +
         2.0 * c * std::exp(-a * L) * std::cos(2.0 * k.kprime * x - k.kprime * L);
}

double envelope_sq(double x, double L, double Gamma, const Wavenumber& k) {
  double a = k.alpha;
  double c = Gamma * std::exp(-a * L);
  return std::exp(-2.0 * a * x) + c * c * std::exp(2.0 * a * (x - L)) +
         2.0 * c * std::exp(-a * L);
}

double first_sidelobe(double kprime, double L) {
  if (!(kprime > 0.0) || !(L > 0.0)) throw std::runtime_error("invalid parameters");
  double step = M_PI / (2.0 * kprime);
  long long n = static_cast<long long>(std::floor(-L / (2.0 * step)));
  while (n * step + L / 2.0 <= 0.0) ++n;
  while ((n - 1) * step + L / 2.0 > 0.0) --n;
  return static_cast<double>(n) * step + L / 2.0;
}

std::pair<double, double> select_loss_and_threshold(double Gamma, double kprime,
                                                    double L) {
  if (!(Gamma >= 0.0 && Gamma < 1.0)) throw std::runtime_error("invalid reflection");
  if (!(kprime > 0.0) || !(L > 0.0)) throw std::runtime_error("invalid parameters");
  double xf = first_sidelobe(kprime, L);
  constexpr int kSamples = 10000;
  for (int j = 0; j <= 60; ++j) {
    double alpha = std::ldexp(1.0, j) / L;  // (2^j) / L
    Wavenumber k{kprime, alpha};
    double t2 = amplitude_sq_closed_form(xf, L, Gamma, k);
    if (!(t2 > 0.0)) continue;
    if (!(t2 < amplitude_sq_closed_form(0.0, L, Gamma, k))) continue;
    // sampled verification: the superlevel set must be a prefix interval
    bool prefix_ok = true, in_prefix = true, nonempty = false;
    for (int i = 0; i <= kSamples; ++i) {
      double x = L * i / kSamples;
      bool above = amplitude_sq_closed_form(x, L, Gamma, k) > t2;
      if (i == 0 && !above) {
        prefix_ok = false;
        break;
      }
      nonempty = nonempty || above;
      if (above && !in_prefix) {
        prefix_ok = false;  // set re-opens: not connected
        break;
      }
      in_prefix = in_prefix && above;
    }
    if (prefix_ok && nonempty) return {alpha, std::sqrt(t2)};
  }
  throw std::runtime_error("no admissible alpha within budget");
}

}  // namespace qgr
