#include <gtest/gtest.h>

#include <sstream>

#include "netgate/features.hpp"

using namespace netgate;

namespace {

GraphSet path3() {
  std::istringstream in("0 1\n1 2\n");
  return single_graph(load_edge_list(in));
}

std::vector<double> col(const FeatureMatrix& m, Eigen::Index c) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m.values(i, c);
  return v;
}

}  // namespace

TEST(Recipe, ParseAndName) {
  for (const char* s : {"frac1", "num2", "adj3", "adj2:maskself", "cov:age", "frac1@school"})
    EXPECT_EQ(FeatureRecipe::parse(s).name(), s);
  EXPECT_EQ(FeatureRecipe::parse("frac2").kind, FeatureKind::FracTreated);
  EXPECT_EQ(FeatureRecipe::parse("num2").step, 2u);
  EXPECT_EQ(parse_recipes("none").size(), 0u);
  EXPECT_EQ(parse_recipes("").size(), 0u);
  EXPECT_EQ(parse_recipes("frac1, num1").size(), 2u);
  for (const char* s : {"frac0", "frac", "foo1", "num1:maskself", "cov:", "frac1@", "adj2:other", "frac1x"})
    EXPECT_THROW(FeatureRecipe::parse(s), ConfigError) << s;
}

TEST(Build, PathHandCases) {
  const TreatmentVector w({1, 0, 1}, 0.5);
  const auto m = build_features(path3(), parse_recipes("frac1,num1"), w);
  EXPECT_EQ(col(m, 0), (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(col(m, 1), (std::vector<double>{0, 2, 0}));
}

TEST(Build, TwoStepFeaturesOnPath) {
  const TreatmentVector w({1, 1, 0}, 0.5);
  const auto m = build_features(path3(), parse_recipes("frac2,num2"), w);
  // Two-step sets on the path: {2}, {} and {0}.
  EXPECT_EQ(col(m, 0), (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(col(m, 1), (std::vector<double>{0, 0, 1}));
}

TEST(Build, AdjacencyPowers) {
  const TreatmentVector w({1, 0, 1}, 0.5);
  const auto m = build_features(path3(), parse_recipes("adj1,adj2,adj2:maskself"), w);
  EXPECT_EQ(col(m, 0), (std::vector<double>{0, 1, 0}));
  // A^2 w for the path: unit 0 -> A(0,1,0)_0 = 1, unit 1 -> 0, unit 2 -> 1.
  EXPECT_EQ(col(m, 1), (std::vector<double>{1, 0, 1}));
  // Return-walk weights are (0.5, 1, 0.5).
  EXPECT_EQ(col(m, 2), (std::vector<double>{0.5, 0, 0.5}));
}

TEST(Build, GlobalTreatmentGivesOnes) {
  const auto g = single_graph(watts_strogatz(100, 6, 0.3, 2));
  const auto m = build_features(g, parse_recipes("frac1,frac2,adj1,adj3"), global_vector(100, 1));
  EXPECT_TRUE((m.values.array() == 1.0).all());
}

TEST(Build, StaticCovariate) {
  auto cov = std::make_shared<CovariateTable>();
  cov->names = {"age"};
  cov->columns = {{20, 30, 40}};
  const auto m = build_features(path3(), parse_recipes("cov:age"), TreatmentVector({0, 1, 0}, 0.5), cov);
  EXPECT_EQ(col(m, 0), (std::vector<double>{20, 30, 40}));
  const auto om = counterfactual_means(path3(), parse_recipes("cov:age"), cov);
  EXPECT_DOUBLE_EQ(om.omega0[1], 30.0);
  EXPECT_DOUBLE_EQ(om.omega1[1], 30.0);
  EXPECT_THROW(build_features(path3(), parse_recipes("cov:height"), TreatmentVector({0, 1, 0}, 0.5), cov),
               ConfigError);
}

TEST(Counterfactual, FracAndNum) {
  const Graph g = watts_strogatz(200, 8, 0.2, 4);
  const double dbar = g.mean_degree();
  const auto om = counterfactual_means(single_graph(g), parse_recipes("frac1,num1"));
  ASSERT_EQ(om.omega0.size(), 3);
  EXPECT_EQ(om.omega0[0], 1.0);
  EXPECT_EQ(om.omega1[0], 1.0);
  EXPECT_EQ(om.omega0[1], 0.0);
  EXPECT_EQ(om.omega1[1], 1.0);
  EXPECT_EQ(om.omega0[2], 0.0);
  EXPECT_NEAR(om.omega1[2], dbar, 1e-12);
}

TEST(Counterfactual, IsolatedUnitsTakeFracZero) {
  std::istringstream in("# nodes 4\n0 1\n1 2\n");
  const auto gs = single_graph(load_edge_list(in));
  FeatureBuilder fb(gs, parse_recipes("frac1"));
  EXPECT_EQ(fb.isolated_units(), 1u);
  EXPECT_DOUBLE_EQ(fb.counterfactual_means().omega1[1], 0.75);
}

TEST(Build, MultipleGraphLayers) {
  GraphSet gs{{"g", std::make_shared<const Graph>(watts_strogatz(30, 4, 0.0, 1))},
              {"h", std::make_shared<const Graph>(watts_strogatz(30, 2, 0.0, 1))}};
  const auto w = bernoulli_assign(30, 0.5, 3);
  const auto m = build_features(gs, parse_recipes("num1,num1@h"), w);
  for (Eigen::Index i = 0; i < 30; ++i) EXPECT_LE(m.values(i, 1), m.values(i, 0));
  EXPECT_THROW(build_features(gs, parse_recipes("num1@x"), w), ConfigError);
}

// Property sweep over random graphs and assignments: ranges, integrality and
// invariance of row i to W_i.
TEST(Build, InvariantsUnderRandomAssignments) {
  const auto recipes = parse_recipes("frac1,num1,frac2,num2,adj1,adj2:maskself,adj3:maskself");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = watts_strogatz(40, 4, 0.4, seed);
    const auto gs = single_graph(g);
    FeatureBuilder fb(gs, recipes);
    const auto w = bernoulli_assign(40, 0.5, seed);
    const auto X = fb.build(w).values;
    for (Node i = 0; i < 40; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      for (Eigen::Index c : {0, 2, 4}) {
        EXPECT_GE(X(r, c), 0.0);
        EXPECT_LE(X(r, c), 1.0);
      }
      EXPECT_EQ(X(r, 1), std::round(X(r, 1)));
      EXPECT_LE(X(r, 1), g.degree(i));
      EXPECT_LE(X(r, 3), neighborhood(g, i, 2).size());
      const auto Xf = fb.build(w.flipped(i)).values;
      for (Eigen::Index c = 0; c < X.cols(); ++c) EXPECT_NEAR(Xf(r, c), X(r, c), 1e-12) << recipes[c].name();
    }
  }
}
