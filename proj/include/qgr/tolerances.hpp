#pragma once

namespace qgr {

// Central tolerance block. Defaults are documented here and may be overridden
// at startup through the QGR_TOL_OVERRIDES environment variable, which accepts
// a JSON object such as {"rank": 1e-9, "resonance": 1e-8}.
struct Tolerances {
  double rank = 1e-10;       // relative singular-value threshold for numeric ranks
  double residual = 1e-9;    // relative residual bound for linear constraints
  double resonance = 1e-9;   // |E - 1| threshold classifying resonant endomorphisms
  double roots = 1e-10;      // offset tolerance for bisection root refinement
  double merge = 1e-12;      // interval endpoint merge tolerance for regions
  double pivot = 1e-12;      // pivot guard for geometry recovery
};

// Mutable process-wide tolerance set.  apply_tolerance_overrides() folds in
// QGR_TOL_OVERRIDES once; it is called lazily by tols() on first use.
Tolerances& tols();
void apply_tolerance_overrides();

}  // namespace qgr
