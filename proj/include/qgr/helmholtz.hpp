#pragma once

#include <complex>
#include <map>
#include <utility>
#include <vector>

#include "qgr/graph.hpp"

namespace qgr {

using Complex = std::complex<double>;

// Complex wavenumber k = kprime + i*alpha of a lossy medium: kprime is the
// oscillation rate (radians per unit length), alpha the loss coefficient
// (nepers per unit length).
struct Wavenumber {
  double kprime = 1.0;  // > 0
  double alpha = 0.0;   // >= 0
  Complex k() const { return {kprime, alpha}; }
};

// Superposition coefficients of the two traveling waves on one edge, in the
// edge's fixed orientation: u(x) = c_plus e^{ikx} + c_minus e^{-ikx}.
// Fundamental solutions keep c_minus = 0 on open edges (radiation condition:
// nothing arrives from infinity); homogeneous fields may carry both.
struct EdgeWave {
  Complex c_plus{0.0, 0.0};
  Complex c_minus{0.0, 0.0};
};

// Validity window [x0, x1] of one EdgeWave in the edge's own coordinate.  An
// edge holds a single piece spanning its extent unless a source sits in its
// interior, in which case the edge is split at the source into two pieces.
struct WavePiece {
  double x0 = 0.0;
  double x1 = 0.0;  // +infinity on the tail piece of an open edge
  EdgeWave w;
};

// A solution of the lossy Helmholtz equation on a metric graph.  Continuity
// holds at every vertex, the Kirchhoff derivative sum vanishes at every
// vertex, and when a source is present the field is continuous there with a
// unit jump in the derivative.
struct WaveField {
  MetricGraph graph;
  Wavenumber k;
  std::map<int, std::vector<WavePiece>> waves;  // per edge, ordered by x0
  bool has_source = false;
  GraphPoint source;  // transmitter location (interior point of an edge)
};

// Fundamental solution with a unit point source at y (interior point of an
// edge; vertex sources are rejected).  Open edges obey the radiation
// condition.  Throws "singular system" at an exact lossless resonance,
// "vertex source rejected" for vertex sources, "disconnected graph", and
// "loss too large" when alpha * length exceeds the floating-point budget.
WaveField solve_fundamental(const MetricGraph& g, const GraphPoint& y,
                            const Wavenumber& k);

// Field value at a point.
Complex evaluate(const WaveField& f, const GraphPoint& p);

// Max relative violation of the continuity/Kirchhoff/source constraints.
double constraint_residual(const WaveField& f);

// Squared amplitude of the one-edge interference model
//   u(x) = e^{ikx} + c e^{-ik(x-L)},  c = Gamma e^{-alpha L},
// expanded as e^{-2ax} + c^2 e^{2a(x-L)} + 2 c e^{-aL} cos(2k'x - k'L).
double amplitude_sq_closed_form(double x, double L, double Gamma,
                                const Wavenumber& k);

// Envelope of the same model: the cosine factor replaced by its maximum.
double envelope_sq(double x, double L, double Gamma, const Wavenumber& k);

// First-sidelobe abscissa x = n pi / (2 k') + L / 2 with n the smallest
// integer making the result positive.
double first_sidelobe(double kprime, double L);

// Pick a loss alpha (geometric ladder 2^j / L) and threshold T = |u(x_FSL)|
// so that the superlevel set { x in [0,L] : |u(x)| > T } of the interference
// model is connected and contains 0.  Throws
// "no admissible alpha within budget" after 60 doublings.
std::pair<double, double> select_loss_and_threshold(double Gamma, double kprime,
                                                    double L);

// Basis of homogeneous solutions (no source).  Open edges carry both
// coefficients freely here: no radiation or decay condition is imposed, so
// arriving waves from infinity are legitimate members of the space.
std::vector<WaveField> homogeneous_basis(const MetricGraph& g, const Wavenumber& k);

}  // namespace qgr
