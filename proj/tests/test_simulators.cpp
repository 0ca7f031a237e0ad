#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "simrep/abm.hpp"
#include "simrep/errors.hpp"
#include "simrep/flux.hpp"
#include "simrep/lotka_volterra.hpp"
#include "simrep/rng.hpp"
#include "simrep/testdata.hpp"
#include "oracles.hpp"

using namespace simrep;
using namespace simrep::oracle;

namespace {

void expect_feasible_flux(const FluxNetwork& net, const FbaResult& r) {
  for (std::size_t i = 0; i < net.metabolite_count(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < net.reaction_count(); ++j) sum += net.s(i, j) * r.flux[j];
    EXPECT_LE(std::abs(sum), 1e-8);
  }
  for (std::size_t j = 0; j < net.reaction_count(); ++j) {
    EXPECT_GE(r.flux[j], net.lower[j] - 1e-10);
    EXPECT_LE(r.flux[j], net.upper[j] + 1e-10);
  }
}

}  // namespace

TEST(TestData, LiftFormula) {
  const auto a = lift_point(1, 2);
  EXPECT_EQ(std::vector<double>(a.begin(), a.end()), (std::vector<double>{3, -1, 2, 1, 4, 2, 4, 1, 8}));
  const auto z = lift_point(0, 0);
  for (const double v : z) EXPECT_EQ(v, 0.0);
}

TEST(TestData, ShapesAreInjectiveAndDeterministic) {
  for (const auto shape : {TestShape::kBlobs, TestShape::kRings}) {
    const auto d = gen_testdata(shape, 500, 3);
    ASSERT_EQ(d.lifted.size(), 500u);
    ASSERT_EQ(d.points.size(), 1000u);
    std::set<std::vector<double>> seen;
    for (std::size_t i = 0; i < 500; ++i) {
      const auto l = lift_point(d.points[2 * i], d.points[2 * i + 1]);
      EXPECT_EQ(d.lifted[i].data, std::vector<double>(l.begin(), l.end()));
      seen.insert(d.lifted[i].data);
    }
    EXPECT_EQ(seen.size(), 500u);
    EXPECT_EQ(gen_testdata(shape, 500, 3).points, d.points);
  }
  EXPECT_THROW(gen_testdata(TestShape::kBlobs, 9, 1), InputError);
}

TEST(LotkaVolterra, ZeroGrowthIsConstant) {
  auto p = logistic_params(0.3);
  p.growth = {0, 0, 0, 0};
  const auto out = lv_simulate(p, 10.0, 0.1, 11);
  for (std::size_t t = 0; t < 11; ++t)
    for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(out.at(t, s), 0.3);
}

TEST(LotkaVolterra, LogisticClosedForm) {
  const double t_end = std::log(3.0);
  const auto out = lv_simulate(logistic_params(0.5), t_end, 0.01, 2);
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_NEAR(out.at(1, s), 0.75, 1e-6);
    EXPECT_NEAR(out.at(1, s), logistic(0.5, t_end), 1e-6);
  }
  const auto grid = lv_simulate(logistic_params(0.1), 8.0, 0.01, 81);
  for (std::size_t t = 0; t < 81; ++t) EXPECT_NEAR(grid.at(t, 2), logistic(0.1, 0.1 * static_cast<double>(t)), 1e-6);
}

TEST(LotkaVolterra, FourthOrderConvergence) {
  const double x0 = 0.05, t_end = 6.0;
  const double exact = logistic(x0, t_end);
  double previous = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double dt = 0.4 / std::pow(2.0, k);
    const double err = std::abs(lv_simulate(logistic_params(x0), t_end, dt, 2).at(1, 0) - exact);
    if (k > 0) {
      EXPECT_GE(std::log2(previous / err), 3.5) << "dt " << dt;
    }
    previous = err;
  }
}

TEST(LotkaVolterra, BaseParametersOscillateWithinBounds) {
  const auto out = lv_simulate(lv_base_params());
  ASSERT_EQ(out.dims, (std::vector<std::size_t>{200, 4}));
  for (std::size_t s = 0; s < 4; ++s) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t t = 100; t < 200; ++t) {
      EXPECT_GE(out.at(t, s), 0.0);
      EXPECT_LE(out.at(t, s), 2.0);
      lo = std::min(lo, out.at(t, s));
      hi = std::max(hi, out.at(t, s));
    }
    EXPECT_GT(hi - lo, 1e-3) << "species " << s << " is flat";
  }
}

TEST(LotkaVolterra, BlowUpReportsTime) {
  auto p = logistic_params(0.5);
  p.interaction[0] = -5.0;
  p.growth[0] = 3.0;
  try {
    lv_simulate(p, 50.0, 0.01, 10);
    FAIL() << "expected blow-up";
  } catch (const SimulationError& e) {
    EXPECT_GT(e.failure_time(), 0.0);
    EXPECT_LT(e.failure_time(), 50.0);
  } catch (const InputError&) {
    // A negative self-interaction may also be rejected up front.
  }
}

TEST(Fba, SingleReaction) {
  FluxNetwork net;
  net.reactions = {"R"};
  net.subsystems = {"s"};
  net.lower = {0};
  net.upper = {10};
  net.objective = {1};
  const auto r = fba_solve(net);
  ASSERT_TRUE(r.optimal());
  EXPECT_EQ(r.flux[0], 10.0);
}

TEST(Fba, UptakeChain) {
  const auto net = parse_flux_network(R"({
    "metabolites": ["a_ext", "a"],
    "reactions": [
      {"id": "EX_a", "lower": -5, "upper": 0, "stoichiometry": {"a_ext": -1}},
      {"id": "T", "lower": 0, "upper": 1000, "stoichiometry": {"a_ext": -1, "a": 1}},
      {"id": "OUT", "lower": 0, "upper": 1000, "objective": 1, "stoichiometry": {"a": -1}}
    ]})");
  // EX_a writes a_ext with coefficient -1: negative flux brings a_ext in.
  const auto r = fba_solve(net);
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.objective, 5.0, 1e-12);
  EXPECT_NEAR(r.flux[0], -5.0, 1e-12);
}

TEST(Fba, InfeasibleAndUnbounded) {
  FluxNetwork net;
  net.metabolites = {"m"};
  net.reactions = {"in", "out"};
  net.subsystems = {"s", "s"};
  net.stoichiometry = {1, -1};
  net.lower = {2, 0};
  net.upper = {3, 1};
  net.objective = {0, 1};
  EXPECT_EQ(fba_solve(net).status, LpStatus::kInfeasible);
  net.lower = {0, 0};
  net.upper = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  EXPECT_EQ(fba_solve(net).status, LpStatus::kUnbounded);
}

TEST(Fba, MatchesVertexEnumeration) {
  std::size_t feasible_cases = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto net = random_lp(seed);
    bool feasible = false;
    const double oracle = vertex_oracle(net, feasible);
    const auto r = fba_solve(net);
    ASSERT_EQ(r.optimal(), feasible) << "seed " << seed;
    if (!feasible) continue;
    ++feasible_cases;
    EXPECT_NEAR(r.objective, oracle, 1e-8) << "seed " << seed;
    expect_feasible_flux(net, r);
  }
  EXPECT_GT(feasible_cases, 100u);
}

TEST(Fba, ToyNetworkKnockoutsMatchOracle) {
  const auto net = load_flux_network(std::string(SIMREP_DATA_DIR) + "/toy_network.json");
  ASSERT_EQ(net.reaction_count(), 20u);
  ASSERT_EQ(net.metabolite_count(), 12u);
  const auto base = fba_solve(net);
  ASSERT_TRUE(base.optimal());
  expect_feasible_flux(net, base);
  for (std::size_t j = 0; j < net.reaction_count(); ++j) {
    const auto ko = fba_knockout(net, j);
    auto fixed = net;
    fixed.lower[j] = fixed.upper[j] = 0.0;
    bool feasible = false;
    const double oracle = basis_oracle(fixed, feasible);
    ASSERT_EQ(ko.optimal(), feasible) << net.reactions[j];
    if (!feasible) continue;
    EXPECT_NEAR(ko.objective, oracle, 1e-8) << net.reactions[j];
    EXPECT_EQ(ko.flux[j], 0.0);
    expect_feasible_flux(fixed, ko);
    if (base.flux[j] == 0.0) {
      EXPECT_NEAR(ko.objective, base.objective, 1e-9) << net.reactions[j];
    }
  }
}

TEST(Fba, JsonRoundTrip) {
  const auto net = load_flux_network(std::string(SIMREP_DATA_DIR) + "/toy_network.json");
  const auto again = parse_flux_network(flux_network_to_json(net));
  EXPECT_EQ(again.stoichiometry, net.stoichiometry);
  EXPECT_EQ(again.lower, net.lower);
  EXPECT_EQ(again.upper, net.upper);
  EXPECT_EQ(again.subsystems, net.subsystems);
  EXPECT_THROW(parse_flux_network(R"({"metabolites": [], "reactions": [{"id": "x", "lower": 1, "upper": 0,
                                      "stoichiometry": {}}]})"),
               InputError);
}

namespace {

AbmLattice lattice3(std::initializer_list<Cell> cells) { return AbmLattice{3, std::vector<Cell>(cells)}; }

constexpr Cell E = Cell::kEmpty, C = Cell::kCancer, T = Cell::kTCell, M = Cell::kMacrophage;

}  // namespace

TEST(Abm, SingleCancerCellDivides) {
  AbmRates rates;
  rates.cancer_proliferation = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto l = lattice3({E, E, E, E, C, E, E, E, E});
    Rng rng(seed);
    abm_step(l, rates, rng);
    EXPECT_EQ(l.count(Cell::kCancer), 2u);
    EXPECT_EQ(l.at(1, 1), Cell::kCancer);
    EXPECT_EQ(l.count(Cell::kEmpty), 7u);
  }
}

TEST(Abm, NewbornCellsDoNotDivideInTheSameStep) {
  AbmRates rates;
  rates.cancer_proliferation = 1.0;
  auto l = lattice3({C, E, E, E, E, E, E, E, E});
  Rng rng(1);
  abm_step(l, rates, rng);
  EXPECT_EQ(l.count(Cell::kCancer), 2u);
}

TEST(Abm, HandSteppedKillAndSuppression) {
  AbmRates rates;
  rates.tcell_kill = 1.0;
  // Corner T cell next to the only cancer cell: the kill is certain.
  auto l = lattice3({T, E, E, E, C, E, E, E, E});
  Rng rng(3);
  abm_step(l, rates, rng);
  EXPECT_EQ(l.cells, (std::vector<Cell>{T, E, E, E, E, E, E, E, E}));

  // A macrophage next to the T cell blocks the kill entirely.
  rates.macrophage_suppression = 1.0;
  auto s = lattice3({T, M, E, E, C, E, E, E, E});
  abm_step(s, rates, rng);
  EXPECT_EQ(s.cells, (std::vector<Cell>{T, M, E, E, C, E, E, E, E}));
}

TEST(Abm, DeathRemovesEveryCancerCell) {
  AbmRates rates;
  rates.cancer_death = 1.0;
  rates.cancer_proliferation = 1.0;
  auto l = lattice3({C, C, C, E, T, E, M, C, C});
  Rng rng(4);
  abm_step(l, rates, rng);
  EXPECT_EQ(l.cells, (std::vector<Cell>{E, E, E, E, T, E, M, E, E}));
}

TEST(Abm, RecruitmentFillsBoundaryOnly) {
  AbmRates rates;
  rates.tcell_recruitment = 1.0;
  // One cancer cell on a 3x3 grid: p = 1/9 per boundary site; with rate
  // capped at 1 the recruited cells always touch the cancer cell.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    AbmLattice l{9, std::vector<Cell>(81, E)};
    for (std::size_t s : {30u, 31u, 39u, 40u, 41u, 49u, 50u}) l.cells[s] = C;
    Rng rng(seed);
    abm_step(l, rates, rng);
    EXPECT_EQ(l.count(Cell::kCancer), 7u);
    for (std::size_t s = 0; s < 81; ++s) {
      if (l.cells[s] != T) continue;
      const long r = static_cast<long>(s / 9), c = static_cast<long>(s % 9);
      bool touches = false;
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) {
          const long rr = r + dr, cc = c + dc;
          if ((dr || dc) && rr >= 0 && cc >= 0 && rr < 9 && cc < 9 && l.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)) == C)
            touches = true;
        }
      EXPECT_TRUE(touches);
    }
  }
}

TEST(Abm, ZeroRatesIsIdentity) {
  ABMParams p;
  p.side = 20;
  p.steps = 30;
  const auto out = abm_simulate(p, 5);
  EXPECT_EQ(out.data, abm_to_output(abm_initial_state(20)).data);
}

TEST(Abm, DeterministicDisjointChannels) {
  ABMParams p;
  p.side = 24;
  p.steps = 40;
  p.rates = {0.3, 0.02, 0.4, 0.5, 0.3, 0.5};
  const auto a = abm_simulate(p, 8);
  EXPECT_EQ(a, abm_simulate(p, 8));
  EXPECT_NE(a.data, abm_simulate(p, 9).data);
  for (std::size_t s = 0; s < 24 * 24; ++s) {
    const double occupied = a.data[3 * s] + a.data[3 * s + 1] + a.data[3 * s + 2];
    EXPECT_LE(occupied, 1.0);
  }
  const auto counts = abm_counts(a);
  EXPECT_LE(counts[0] + counts[1] + counts[2], 24.0 * 24.0);
  p.rates.tcell_kill = 1.5;
  EXPECT_THROW(abm_simulate(p, 1), InputError);
  p.rates.tcell_kill = 0.5;
  p.side = 7;
  EXPECT_THROW(abm_simulate(p, 1), InputError);
}
