#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qgr/graph.hpp"
#include "qgr/helmholtz.hpp"
#include "qgr/region.hpp"

namespace qgr {

// A self-contained experiment description: one graph, transmitter placements,
// and the wavenumber/threshold policy of a run.  Scenarios are plain JSON so
// they can be versioned and diffed next to the reports they produce:
//
//   {
//     "name": "circle",
//     "graph": { ... graph schema ... },
//     "transmitters": [{"edge": 0, "offset": 0.5}, ...],
//     "wavenumber": {"kprime": 7.0, "alpha": "auto"},
//     "thresholds": "auto",
//     "compact_part": "all-vertices-hull",
//     "probe": {"edge": 2, "offset": 1.5},
//     "seed": 0,
//     "synthetic": true
//   }
//
// "auto" fields leave the corresponding choice to the stage: the topology
// stage derives a shared loss and per-transmitter thresholds from the
// interference model, the other stages fall back to documented defaults.
struct Scenario {
  std::string name;
  MetricGraph graph;
  std::vector<GraphPoint> transmitters;
  double kprime = 1.0;
  std::optional<double> alpha;         // empty: stage picks its own loss
  std::vector<double> thresholds;      // empty: lemma-derived per transmitter
  std::optional<Region> compact_part;  // empty: hull of finite edges + vertices
  std::optional<GraphPoint> probe;     // geometry drive point; empty: first transmitter
  std::uint64_t seed = 0;
  bool synthetic = true;               // enables ground-truth comparisons
};

// Parse / serialize.  scenario_to_json emits the canonical form: fixed key
// order, every optional field materialized, so equal scenarios serialize to
// identical bytes.  Parsing validates that transmitters and the probe sit in
// the interior of existing edges and that counts are consistent; violations
// throw std::invalid_argument.
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& s);

// FNV-1a (64-bit) over the canonical serialization.  Embedded in every report
// so a report can be matched to the exact inputs that produced it.
std::uint64_t scenario_hash(const Scenario& s);

// Default topology target: every finite edge in full plus every vertex.  Open
// edges are excluded — their far tails carry no structure to recover.
Region compact_hull(const MetricGraph& g);

// Transmitter placements after the seed policy.  Seed 0 keeps the declared
// offsets; any other seed nudges each offset by up to one tenth of its
// distance to the nearest endpoint (one tenth of the offset itself on open
// edges), deterministically in the seed and scenario name.  Seeds therefore
// perturb a validated design rather than replace it.  The probe follows the
// same policy; when absent it falls back to the first placed transmitter.
std::vector<GraphPoint> placed_transmitters(const Scenario& s);
GraphPoint placed_probe(const Scenario& s);

// Output of one stage run: the report (canonical JSON bytes, newline
// terminated) plus named artifacts such as CSV traces.  Reports never carry
// wall-clock data, so repeat runs of one scenario + seed are byte-identical;
// the CLI prints timing to stderr instead.
struct RunResult {
  std::string report_json;
  std::vector<std::pair<std::string, std::string>> artifacts;  // name -> bytes
};

// Optional wavenumber sweep attached to a cohomology run.
struct ScanRequest {
  double k_lo = 0.0;
  double k_hi = 0.0;
  int grid = 0;
};

// Solve one fundamental field per transmitter and emit per-edge amplitude
// traces (trace_<i>.csv: edge,x,re,im,abs2).  With alpha on "auto" the loss
// comes from the interference-model ladder applied to the longest finite
// edge.  Throws "no transmitters" and propagates solver errors.
RunResult run_simulate(const Scenario& s);

// Visibility cover -> refinement -> nerve -> betti.  Auto thresholds use the
// shared-loss ladder; explicit thresholds pair with the scenario loss (or the
// simulate default) and must cover the compact part ("cover gap ..."
// otherwise).  Synthetic scenarios record the ground-truth graph betti and a
// match flag.  The refined cover is emitted as cover.json.
RunResult run_topology(const Scenario& s);

// Cohomology dims of the wave sheaf at the scenario wavenumber ("auto" loss
// means lossless here), the dimension-formula prediction when the resonance
// census admits one, and optionally a resonance scan with recovered loop
// lengths and a scan.csv artifact.
RunResult run_cohomology(const Scenario& s,
                         const std::optional<ScanRequest>& scan = std::nullopt);

// Drive the graph from the probe, read one section off the resulting field,
// and recover per-edge endomorphisms and lengths (exact under loss, residue
// classes without).  Propagates extraction errors ("zero section",
// "vanishing pivot", "degree-2 ambiguity").
RunResult run_geometry(const Scenario& s);

// Named self-check suites over bundled configurations: "theorem42" replays
// the dimension-formula census cells that hold, "collapse" replays the
// edge-collapse invariances.  The report carries one pass flag per check and
// an overall all_pass flag.  Unknown suite names throw std::invalid_argument.
RunResult run_verify(const std::string& suite);

}  // namespace qgr
