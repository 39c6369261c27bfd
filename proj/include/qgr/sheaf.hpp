#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qgr/graph.hpp"
#include "qgr/helmholtz.hpp"

namespace qgr {

// A direction on a finite edge is (edge id, fwd): fwd = 1 travels v0 -> v1,
// fwd = 0 travels v1 -> v0.  On a loop, fwd = 1 is the arc traversal 0 -> L
// and fwd = 0 the reverse.  On an open edge, fwd = 1 leaves the vertex toward
// infinity and fwd = 0 is the incoming external value.
using EdgeDir = std::pair<int, int>;

// ---------------------------------------------------------------------------
// Transmission-line sheaves
// ---------------------------------------------------------------------------

// Sheaf of transmission-line data on an undirected metric graph.  Every finite
// edge carries one endomorphism per direction (index 1: v0 -> v1, index 0:
// v1 -> v0).  A sheaf freshly derived from a quantum graph has equal pairs
// E = e^{ikL}; edge collapses can leave the two directions with different
// composites.  Open edges carry no endomorphism: their incoming value enters
// vertex codings unscaled, and their outgoing value is determined but
// unconstrained.
struct TransmissionLineSheaf {
  MetricGraph graph;
  // endo[edge id] = {E for the v1 -> v0 direction, E for the v0 -> v1 one}.
  std::map<int, std::array<Complex, 2>> endo;
  std::optional<Wavenumber> k;

  const std::array<Complex, 2>& edge_endo(int edge_id) const;
};

// Build the sheaf of a quantum graph at wavenumber k: E = e^{ikL} per finite
// edge, both directions equal.
TransmissionLineSheaf from_quantum_graph(const MetricGraph& g, Wavenumber k);

// Resonance classification.  A loop is resonant when both direction
// endomorphisms are within tols().resonance of 1; a closed edge is resonant
// when its round trip satisfies E - E^{-1} = 0 within the same tolerance.
bool loop_resonant(const TransmissionLineSheaf& s, int edge_id);
bool closed_edge_resonant(const TransmissionLineSheaf& s, int edge_id);
int count_resonant_loops(const TransmissionLineSheaf& s);
int count_resonant_closed_edges(const TransmissionLineSheaf& s);

// Incoming directions at v in canonical order (ascending edge id, direction
// fwd = 1 before fwd = 0), and the vertex coding row for one outgoing
// direction expressed over that order.  The coding realizes
//   phi_i(v)(z) = (2/d) sum_j E_j z_j - E_{rev(i)} z_{rev(i)},
// with d = degree(v) and E = 1 for open-edge incoming values.
std::vector<EdgeDir> incoming_directions(const MetricGraph& g, int v);
std::vector<Complex> coding_row(const TransmissionLineSheaf& s, int v,
                                int out_edge, int out_fwd);

// ---------------------------------------------------------------------------
// Flow sheaves
// ---------------------------------------------------------------------------

struct FlowEdge {
  int from = -1;  // -1 marks an external source end
  int to = -1;    // -1 marks an external target end
};

// Flow sheaf on a directed graph: one field value per directed edge, star
// stalks collect the incoming values, and each vertex carries a coding matrix
// from incoming values to outgoing ones.  Rows and columns of coding[v] are
// indexed by the vertex's outgoing / incoming edge lists in ascending edge
// index order (external targets included as rows, though they never constrain
// anything).  The per-edge scalar is bookkeeping carried along from a
// transmission-line origin; the coding matrices hold all transport factors.
struct FlowSheaf {
  std::vector<int> vertices;     // sorted, unique
  std::vector<FlowEdge> edges;   // edge index is the edge id
  std::map<int, Eigen::MatrixXcd> coding;
  std::map<int, Complex> endo;

  std::vector<int> incoming(int v) const;
  std::vector<int> outgoing(int v) const;
};

// Paired directed realization of a transmission-line sheaf.  Flow edges come
// in consecutive pairs per finite edge (fwd direction first); open edges
// contribute an outgoing external edge and an incoming external one.
FlowSheaf flow_from_tl(const TransmissionLineSheaf& s);

// ---------------------------------------------------------------------------
// Cech cohomology over the standard cover
// ---------------------------------------------------------------------------

// Standard good cover: one star set per vertex and one interval set per
// internal directed-edge value; directed loops get two interval sets (H and K)
// so every cover element stays contractible.  C0 stacks star coordinates
// (vertices ascending, incoming edges ascending within a star) followed by
// interval coordinates (edges ascending, H before K); C1 stacks the overlap
// rows in the same edge order.
struct CechComplex {
  int c0 = 0;
  int c1 = 0;
  Eigen::MatrixXcd delta0;             // c1 x c0 coboundary
  std::vector<std::string> c0_labels;  // cover coordinate descriptions
  std::vector<std::string> c1_labels;  // overlap row descriptions
  std::map<std::pair<int, int>, int> star_col;  // (flow edge, target) -> C0 col
  std::map<int, int> h_col;                     // flow edge -> H column
  std::map<int, int> k_col;                     // flow edge -> K column (loops)
};

CechComplex build_cech(const FlowSheaf& s);
CechComplex build_cech(const TransmissionLineSheaf& s);

struct CohomologyResult {
  int h0 = 0;
  int h1 = 0;
  Eigen::MatrixXcd global_sections;  // columns: kernel basis of delta0
};

CohomologyResult cech_cohomology(const FlowSheaf& s);
CohomologyResult cech_cohomology(const TransmissionLineSheaf& s);

// Dimension formulas of the classification theorem for a connected graph with
// l closed edges (lprime of them resonant), m open edges, and n resonant
// loops, applied verbatim, including the min{0, lprime - 1} terms.  Throws
// "degenerate graph" when l = m = n = 0.
std::pair<int, int> predicted_dims(int l, int lprime, int m, int n);

// ---------------------------------------------------------------------------
// Edge collapses (direct images under collapsing maps)
// ---------------------------------------------------------------------------

// Collapse a directed flow-sheaf edge with distinct endpoints, merging its
// source vertex into its target.  The merged coding is the block composite
//   [[a, 0], [v u^T, b]]
// (a: source rows, b: target rows, u^T: the collapsed edge's coding row at the
// source, v: its coding column at the target), reindexed to the merged edge
// order.  Throws "loop collapse via flow lemma" for loops.
FlowSheaf collapse_flow_edge(const FlowSheaf& s, int edge_id);

// Collapse a transmission-line segment whose endpoints are distinct and both
// of degree > 1 ("degree-1 endpoint" otherwise).  The collapsed edge's
// endomorphism L is composed onto the directions arriving at the vanishing
// endpoint (edge.v1); with compose_inverse_on_far_side, 1/L is composed onto
// the directions arriving at the kept endpoint instead.  Both choices give
// quasi-isomorphic sheaves.
TransmissionLineSheaf collapse_tl_edge(const TransmissionLineSheaf& s, int edge_id,
                                       bool compose_inverse_on_far_side = false);

// Remove a nonresonant loop.  Throws "resonant loop" when the loop
// endomorphism is within tols().resonance of 1 (removal would change
// cohomology there).
TransmissionLineSheaf collapse_nonresonant_loop(const TransmissionLineSheaf& s, int edge_id);

// ---------------------------------------------------------------------------
// Euler invariant
// ---------------------------------------------------------------------------

// chi = h0 - h1 for a sheaf whose graph has no closed edges ("closed edges
// present" otherwise), with the open-edge count check chi = m and the cycle
// bound h1 <= b1 reported rather than enforced.
struct EulerInvariant {
  int chi = 0;
  int m = 0;
  int h0 = 0;
  int h1 = 0;
  int b1 = 0;
  bool chi_equals_m = false;
  bool h1_within_b1 = false;
};

EulerInvariant euler_invariant(const TransmissionLineSheaf& s);

// ---------------------------------------------------------------------------
// Resonance scan and loop-length recovery
// ---------------------------------------------------------------------------

struct ScanRow {
  double kprime = 0.0;
  int h0 = 0;
  int h1 = 0;
};

// A refined rank-drop event.  multiplicity counts the loop-localized kernel
// directions at the refined wavenumber (the number of simultaneously resonant
// loops); events whose excess is purely a composite-cycle mode carry
// multiplicity 0 and are ignored by the length sieve.
struct ScanEvent {
  double kprime = 0.0;
  int multiplicity = 0;
  int h0 = 0;
  int h1 = 0;
};

struct ResonanceScan {
  std::vector<ScanRow> rows;      // one per grid point, ascending kprime
  std::vector<ScanEvent> events;  // refined resonances, ascending kprime
  int baseline_h0 = 0;            // generic dims away from resonances
  int baseline_h1 = 0;
  double k_lo = 0.0;
  double k_hi = 0.0;
  int grid = 0;
};

// Lossless scan of (k_lo, k_hi] on a uniform grid: cohomology dims per grid
// point, dip detection on the singular-value indicator, and golden-section
// refinement of each resonance.  The parallel entry point distributes grid
// points across threads and merges results in grid order; the serial twin is
// the reference implementation.
ResonanceScan resonance_scan(const MetricGraph& g, double k_lo, double k_hi, int grid);
ResonanceScan resonance_scan_serial(const MetricGraph& g, double k_lo, double k_hi, int grid);

// Ladder sieve over scan events: repeatedly take the smallest remaining
// fundamental k1, record multiplicity-many loops of length 2*pi/k1, and
// decrement every harmonic j*k1.  Throws "unresolved multiplicity" when the
// grid cannot separate ladders (missing harmonics or negative multiplicities).
// m is the open-edge count of the scanned graph, used as a baseline
// consistency check.
std::vector<double> recover_loop_lengths(const ResonanceScan& scan, int m);

// CSV rows "kprime,h0,h1" (header included).
std::string scan_to_csv(const ResonanceScan& scan);

// ---------------------------------------------------------------------------
// Exact-rational mode
// ---------------------------------------------------------------------------

// Small exact rational arithmetic for unit tests with rational endomorphisms.
// Numerator/denominator stay reduced; arithmetic throws "rational overflow"
// when a reduced value no longer fits.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n);  // NOLINT: implicit integer promotion is intended
  Rational(long long n, long long d);

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  Rational operator-() const;
  bool operator==(const Rational& o) const;
  bool is_zero() const { return num == 0; }
  double value() const;
};

struct RationalComplex {
  Rational re;
  Rational im;

  RationalComplex() = default;
  RationalComplex(Rational r) : re(r) {}  // NOLINT: promotion intended
  RationalComplex(Rational r, Rational i) : re(r), im(i) {}

  RationalComplex operator+(const RationalComplex& o) const;
  RationalComplex operator-(const RationalComplex& o) const;
  RationalComplex operator*(const RationalComplex& o) const;
  RationalComplex operator/(const RationalComplex& o) const;
  bool is_zero() const { return re.is_zero() && im.is_zero(); }
};

// Independent exact assembly and elimination for a transmission-line sheaf
// with rational(-complex) endomorphisms: returns (h0, h1) with exact ranks.
// endo[edge id] follows the same direction convention as the float sheaf.
std::pair<int, int> cech_ranks_exact(
    const MetricGraph& g, const std::map<int, std::array<RationalComplex, 2>>& endo);

}  // namespace qgr
