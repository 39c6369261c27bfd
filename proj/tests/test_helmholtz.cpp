#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <random>

#include "common_graphs.hpp"
#include "doctest.h"
#include "qgr/helmholtz.hpp"

using namespace qgr;
using namespace qgr::testing;

namespace {
double urand(std::mt19937_64& g) { return std::ldexp(double(g() >> 11), -53); }

WaveField hand_field(const MetricGraph& g, const Wavenumber& k, int edge,
                     Complex cp, Complex cm) {
  WaveField f;
  f.graph = g;
  f.k = k;
  f.waves[edge] = {WavePiece{0.0, g.extent(edge), EdgeWave{cp, cm}}};
  return f;
}
}  // namespace

TEST_CASE("evaluate is direct substitution") {
  auto g = interval(M_PI);
  Wavenumber k{1.0, 0.0};
  auto f = hand_field(g, k, 0, 1.0, 0.0);
  Complex u = evaluate(f, GraphPoint::on_edge(0, M_PI / 2));
  CHECK(std::abs(u - Complex(0.0, 1.0)) < 1e-12);
  auto z = hand_field(g, k, 0, 0.0, 0.0);
  CHECK(std::abs(evaluate(z, GraphPoint::on_edge(0, 1.0))) == 0.0);
}

TEST_CASE("fundamental solution on the infinite line matches the textbook kernel") {
  auto g = star_open(2);
  Wavenumber kw{1.3, 0.2};
  Complex k = kw.k();
  GraphPoint y = GraphPoint::on_edge(0, 0.3);
  WaveField f = solve_fundamental(g, y, kw);
  CHECK(constraint_residual(f) < 1e-9);
  auto oracle = [&](const GraphPoint& p) {
    double d = graph_distance(g, p, y);
    return std::exp(Complex(0, 1) * k * d) / (Complex(0, 2) * k);
  };
  for (const auto& p :
       {GraphPoint::on_edge(0, 0.05), GraphPoint::on_edge(0, 1.7),
        GraphPoint::on_edge(1, 0.9), GraphPoint::at_vertex(0)}) {
    CHECK(std::abs(evaluate(f, p) - oracle(p)) < 1e-9 * std::abs(oracle(p)));
  }
  // radiation condition: no arriving component on open tails
  for (const auto& [eid, pieces] : f.waves)
    for (const auto& wp : pieces)
      if (std::isinf(wp.x1)) CHECK(std::abs(wp.w.c_minus) == 0.0);
}

TEST_CASE("fundamental solutions satisfy the constraints on the zoo") {
  Wavenumber k{2.0, 0.5};
  struct Case {
    MetricGraph g;
    GraphPoint y;
  };
  for (const auto& c : {Case{interval(2.0), GraphPoint::on_edge(0, 0.7)},
                        Case{theta(1, 2, 3), GraphPoint::on_edge(1, 0.4)},
                        Case{figure_eight_open(1.0, std::sqrt(2.0)),
                             GraphPoint::on_edge(2, 0.6)},
                        Case{dumbbell(1, 2, 3), GraphPoint::on_edge(1, 1.1)},
                        Case{k4_subdivided(), GraphPoint::on_edge(4, 0.2)},
                        Case{single_loop(2.0), GraphPoint::on_edge(0, 0.5)}}) {
    WaveField f = solve_fundamental(c.g, c.y, k);
    CHECK(constraint_residual(f) < 1e-9);
    // continuity seen through evaluate at every vertex
    for (int v : c.g.vertices) {
      Complex ref = evaluate(f, GraphPoint::at_vertex(v));
      for (auto [eid, end] : c.g.incident_ends(v)) {
        double off = end == 0 ? 1e-13 : c.g.edge(eid).length - 1e-13;
        CHECK(std::abs(evaluate(f, GraphPoint::on_edge(eid, off)) - ref) <=
              1e-9 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST_CASE("strong loss forces monotone decay beyond the source edge") {
  auto g = theta(1, 2, 3);
  Wavenumber k{5.0, 3.0};
  WaveField f = solve_fundamental(g, GraphPoint::on_edge(0, 0.5), k);
  // Walk from v1 into edge 2 while the route through v1 dominates: past the
  // midpoint the contribution arriving through v0 takes over and the field
  // rises again, so the walk stops well short of it.
  double prev = std::abs(evaluate(f, GraphPoint::at_vertex(1)));
  for (int i = 1; i <= 40; ++i) {
    double x = 3.0 - 0.8 * i / 40.0;  // offsets 3.0 -> 2.2, distance increasing
    double cur = std::abs(evaluate(f, GraphPoint::on_edge(2, x)));
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("fundamental solver rejects bad inputs") {
  Wavenumber k{1.0, 0.1};
  CHECK_THROWS_WITH_AS(solve_fundamental(theta(1, 2, 3), GraphPoint::at_vertex(0), k),
                       "vertex source rejected", std::runtime_error);
  CHECK_THROWS_WITH_AS(
      solve_fundamental(theta(1, 2, 3), GraphPoint::on_edge(0, 1e-14), k),
      "vertex source rejected", std::runtime_error);
  MetricGraph disc = make({0, 1}, {loop(0, 0, 1.0), loop(1, 1, 1.0)});
  CHECK_THROWS_WITH_AS(solve_fundamental(disc, GraphPoint::on_edge(0, 0.5), k),
                       "disconnected graph", std::runtime_error);
  CHECK_THROWS_WITH_AS(solve_fundamental(interval(1.0), GraphPoint::on_edge(0, 0.5),
                                         Wavenumber{1.0, 700.0}),
                       "loss too large", std::runtime_error);
}

TEST_CASE("lossless resonance makes the forced system singular") {
  // Neumann tips at both ends resonate when 2 k' L is a multiple of 2 pi.
  CHECK_THROWS_WITH_AS(solve_fundamental(interval(1.0), GraphPoint::on_edge(0, 0.3),
                                         Wavenumber{M_PI, 0.0}),
                       "singular system", std::runtime_error);
  // slightly detuned: fine
  WaveField f = solve_fundamental(interval(1.0), GraphPoint::on_edge(0, 0.3),
                                  Wavenumber{M_PI * 1.01, 0.0});
  CHECK(constraint_residual(f) < 1e-9);
}

TEST_CASE("homogeneous space dimensions") {
  Wavenumber lossy{2.0, 0.7};
  CHECK(homogeneous_basis(theta(1, 2, 3), lossy).empty());
  CHECK(homogeneous_basis(single_loop(1.0), lossy).empty());
  CHECK(homogeneous_basis(interval(1.0), lossy).empty());

  // open edges contribute arriving waves: the line and the 3-star
  CHECK(homogeneous_basis(star_open(2), lossy).size() == 2);
  CHECK(homogeneous_basis(star_open(3), lossy).size() == 3);
  CHECK(homogeneous_basis(star_open(3), Wavenumber{1.0, 0.0}).size() == 3);

  // lossless resonances
  Wavenumber res{2 * M_PI, 0.0};
  CHECK(homogeneous_basis(single_loop(1.0), res).size() == 2);
  CHECK(homogeneous_basis(single_loop(std::sqrt(2.0)), res).empty());
  CHECK(homogeneous_basis(interval(1.0), Wavenumber{M_PI, 0.0}).size() == 1);
  CHECK(homogeneous_basis(figure_eight(1.0, 1.0), res).size() == 3);
  CHECK(homogeneous_basis(figure_eight(1.0, std::sqrt(2.0)), res).size() == 1);

  // every basis element satisfies the constraints
  for (const auto& f : homogeneous_basis(figure_eight(1.0, 1.0), res))
    CHECK(constraint_residual(f) < 1e-9);
  for (const auto& f : homogeneous_basis(star_open(3), lossy))
    CHECK(constraint_residual(f) < 1e-9);
}

TEST_CASE("closed-form amplitude is the expanded interference model") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    double L = 0.5 + 4.0 * urand(rng);
    double x = L * urand(rng);
    double Gamma = urand(rng);
    Wavenumber k{0.5 + 30.0 * urand(rng), 2.0 * urand(rng)};
    Complex ik = Complex(0, 1) * k.k();
    double c = Gamma * std::exp(-k.alpha * L);
    Complex u = std::exp(ik * x) + c * std::exp(-ik * (x - L));
    double direct = std::norm(u);
    double closed = amplitude_sq_closed_form(x, L, Gamma, k);
    CHECK(closed == doctest::Approx(direct).epsilon(1e-12));
    CHECK(envelope_sq(x, L, Gamma, k) >= closed - 1e-12);
  }
  // no reflection: pure decay
  Wavenumber k{3.0, 0.8};
  CHECK(amplitude_sq_closed_form(0.7, 2.0, 0.0, k) ==
        doctest::Approx(std::exp(-2 * 0.8 * 0.7)).epsilon(1e-12));
  CHECK(envelope_sq(0.7, 2.0, 0.0, k) ==
        doctest::Approx(std::exp(-2 * 0.8 * 0.7)).epsilon(1e-12));
  // value at the transmitter
  double L = 1.7, Gamma = 0.4;
  Wavenumber k2{2.2, 0.6};
  double expect = 1.0 + Gamma * Gamma * std::exp(-4 * k2.alpha * L) +
                  2 * Gamma * std::exp(-2 * k2.alpha * L) * std::cos(k2.kprime * L);
  CHECK(amplitude_sq_closed_form(0.0, L, Gamma, k2) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("two-exponential part of the envelope has its minimum where the terms balance") {
  // For Gamma < 1 the balance point L - ln(Gamma)/(2 alpha) lies beyond L and
  // the sum decays monotonically on [0, L]; a reflection gain > 1 pulls it
  // inside, where a derivative sign change must appear.
  double L = 3.0;
  Wavenumber k{4.0, 0.9};
  auto two_exp = [&](double Gamma, double x) {
    double c = Gamma * std::exp(-k.alpha * L);
    return std::exp(-2 * k.alpha * x) + c * c * std::exp(2 * k.alpha * (x - L));
  };
  SUBCASE("interior minimum") {
    double Gamma = 3.0;
    double c = Gamma * std::exp(-k.alpha * L);
    double xstar = L / 2 - std::log(c) / (2 * k.alpha);
    REQUIRE(xstar > 0.0);
    REQUIRE(xstar < L);
    double h = 1e-4;
    CHECK(two_exp(Gamma, xstar - h) > two_exp(Gamma, xstar));
    CHECK(two_exp(Gamma, xstar + h) > two_exp(Gamma, xstar));
  }
  SUBCASE("passive reflection: monotone on the edge") {
    double prev = two_exp(0.5, 0.0);
    for (int i = 1; i <= 100; ++i) {
      double cur = two_exp(0.5, L * i / 100.0);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("first sidelobe abscissa") {
  CHECK(first_sidelobe(M_PI, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(first_sidelobe(M_PI / 2, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    double kp = 0.3 + 25.0 * urand(rng);
    double L = 0.2 + 6.0 * urand(rng);
    double got = first_sidelobe(kp, L);
    // brute-force oracle over a wide integer window
    double best = kInf;
    for (int n = -1000; n <= 1000; ++n) {
      double x = n * M_PI / (2 * kp) + L / 2;
      if (x > 0) best = std::min(best, x);
    }
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    // extremum of the cosine factor by construction
    CHECK(std::abs(std::cos(2 * kp * got - kp * L)) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("loss/threshold selection yields a connected superlevel set at 0") {
  SUBCASE("no reflection accepts the first rung") {
    auto [alpha, T] = select_loss_and_threshold(0.0, 3.0, 2.0);
    CHECK(alpha == doctest::Approx(0.5));  // 1/L
    CHECK(T > 0.0);
  }
  SUBCASE("strong reflection") {
    double Gamma = 0.9, kp = 20.0, L = 5.0;
    auto [alpha, T] = select_loss_and_threshold(Gamma, kp, L);
    CHECK(T > 0.0);
    Wavenumber k{kp, alpha};
    // sampled superlevel set is one interval containing 0
    int first_below = -1;
    bool reopened = false;
    for (int i = 0; i <= 10000; ++i) {
      double x = L * i / 10000.0;
      bool above = amplitude_sq_closed_form(x, L, Gamma, k) > T * T;
      if (i == 0) CHECK(above);
      if (!above && first_below < 0) first_below = i;
      if (above && first_below >= 0) reopened = true;
    }
    CHECK(!reopened);
    CHECK(first_below > 0);
  }
  SUBCASE("invalid reflection is rejected") {
    CHECK_THROWS_AS(select_loss_and_threshold(1.0, 2.0, 1.0), std::runtime_error);
  }
}
