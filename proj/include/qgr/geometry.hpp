#pragma once

#include <map>
#include <vector>

#include "qgr/graph.hpp"
#include "qgr/helmholtz.hpp"
#include "qgr/sheaf.hpp"

namespace qgr {

// ---------------------------------------------------------------------------
// Directional sensor observations
// ---------------------------------------------------------------------------

// Arriving signal values collected by directional sensors: one complex value
// per directed edge end, keyed by the direction (edge id, fwd) that points
// into the measuring vertex.  fwd = 1 arrives at the edge's v1 side, fwd = 0
// at its v0 side; an open edge's measured value is its incoming direction
// (edge, 0).  Sensors sit at every vertex of degree != 2; entries at other
// vertices are permitted and ignored.
struct SectionObservation {
  std::map<EdgeDir, Complex> incoming;
};

// Read the arriving amplitudes of a solved wave field at every vertex: the
// traveling-wave component of the piece touching each edge end, evaluated at
// the end.  A field driven from an open edge leaves every finite edge's
// launch/arrival relation intact, which is what the recovery below consumes.
SectionObservation observe_field(const WaveField& f);

// ---------------------------------------------------------------------------
// Recovered geometry
// ---------------------------------------------------------------------------

// A length estimate: exact when modulus == 0, otherwise the residue class
// base + j*modulus (integer j >= 0) that the phase of a lossless endomorphism
// determines, with base normalized into (0, modulus].
struct LengthClass {
  double base = 0.0;
  double modulus = 0.0;
};

// One recovered edge of the reduced graph: a maximal chain of original edges
// running through degree-2 vertices (interior lengths are not individually
// observable; only the composite transfer is).  endo is the composite chain
// endomorphism, length the total metric length of the chain.
struct RecoveredEdge {
  std::vector<int> chain;   // original edge ids in walk order
  int va = -1;              // sensor vertex the walk starts at
  int vb = -1;              // sensor vertex it ends at (va for loops, -1 open)
  EdgeKind kind = EdgeKind::Segment;
  bool tree_edge = false;   // recovered in the un-collapse phase
  Complex endo;             // composite endomorphism (finite chains only)
  LengthClass length;       // total chain length (finite chains only)
  double cross_check = 0.0; // two-direction disagreement, relative to the
                            // observation scale; 0 means perfectly consistent
};

struct RecoveredGeometry {
  std::vector<RecoveredEdge> edges;
  double scale = 0.0;  // observation magnitude used to normalize pivots
};

// Recover every edge endomorphism (and length) from the known topology plus a
// single nonzero observed section.  Degree-2 vertices are merged away first
// (their junction condition is transparent, so only chain composites are
// determined); a spanning tree of the reduced graph then orders the work:
// chains outside the tree are solved from the vertex-coding relations of the
// collapsed picture, and tree chains are solved one at a time while undoing
// the collapse.  Every relation is instantiated on the star of a real sensor
// vertex, where the junction coding holds exactly.
//
// Lengths: with alpha > 0 the magnitude |E| = e^{-alpha*L} pins L exactly;
// with alpha = 0 only the phase survives and the result is the residue class
// arg(E)/k' (mod 2*pi/k').
//
// Errors: "zero section" when the observation vanishes; "vanishing pivot"
// when a required coding combination falls below 1e-12 of the observation
// scale (nongeneric section or lengths); "degree-2 ambiguity" when the graph
// has a component carrying no sensor vertex at all.
RecoveredGeometry extract_geometry(const MetricGraph& g, const SectionObservation& obs,
                                   const Wavenumber& k);

// Largest junction-coding residual of the observation under the recovered
// endomorphisms: for every finite chain and both directions, the gap between
// the propagated launch value and the measured arrival.  Zero for an empty
// edge set.  A recovery is considered consistent when the residual is below
// 1e-8 times the observation magnitude.
double verify_section_consistency(const MetricGraph& g, const SectionObservation& obs,
                                  const RecoveredGeometry& geom, const Wavenumber& k);

}  // namespace qgr
