#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "bprx/baselines.hpp"
#include "doctest.h"

using namespace bprx;

namespace {

PolicyLibrary scripted_nav_library() {
  PolicyLibrary library;
  for (const TaskSpec& task : make_source_suite(Domain::nav2d))
    library.entries.push_back(
        LibraryEntry{task.id, task, make_scripted_policy(task), nullptr});
  return library;
}

double native_return(const TaskSpec& task) {
  auto env = make_environment(task);
  const PolicyPtr policy = make_scripted_policy(task);
  Rng rng(0);
  std::vector<double> rewards;
  std::vector<double> state = env->reset();
  for (int t = 0; t < env->max_steps(); ++t) {
    EnvStep s = env->step(policy->act(state, rng));
    rewards.push_back(s.reward);
    state = std::move(s.next_state);
    if (s.done) break;
  }
  return discounted_return(rewards, DiscountConfig{1.0});
}

ReturnObservationTable nav_table(double eps2_u = 0.0, int episodes = 100) {
  const PolicyLibrary library = scripted_nav_library();
  const auto sources = make_source_suite(Domain::nav2d);
  Rng rng(1);
  ReturnTableConfig config;
  config.episodes_per_pair = episodes;
  config.eps2_u = eps2_u;
  return fit_return_table(library, sources, config, DiscountConfig{1.0}, rng);
}

}  // namespace

TEST_CASE("return table diagonal is near the native controller returns") {
  const ReturnObservationTable table = nav_table();
  const auto sources = make_source_suite(Domain::nav2d);
  for (int j = 0; j < table.n; ++j) {
    const double native = native_return(sources[static_cast<std::size_t>(j)]);
    CHECK(table.mu(j, j) == doctest::Approx(native).epsilon(1e-9));
    // Matched pairs beat every mismatched policy on the same task.
    for (int p = 0; p < table.n; ++p)
      if (p != j) CHECK(table.mu(j, j) > table.mu(j, p));
  }
}

TEST_CASE("deterministic env and policy give an exact table after one episode") {
  const ReturnObservationTable one = nav_table(0.0, 1);
  const ReturnObservationTable hundred = nav_table(0.0, 100);
  for (int j = 0; j < one.n; ++j)
    for (int p = 0; p < one.n; ++p)
      CHECK(one.mu(j, p) == doctest::Approx(hundred.mu(j, p)).epsilon(1e-12));
}

TEST_CASE("configured variance appears verbatim in every cell") {
  const ReturnObservationTable table = nav_table(123.5);
  for (int j = 0; j < table.n; ++j)
    for (int p = 0; p < table.n; ++p) CHECK(table.var(j, p) == 123.5);

  // Auto mode: (10% of the mean-return spread)^2.
  const ReturnObservationTable auto_table = nav_table(0.0);
  const auto [lo, hi] = std::minmax_element(auto_table.mean_return.begin(),
                                            auto_table.mean_return.end());
  const double expected = 0.01 * (*hi - *lo) * (*hi - *lo);
  CHECK(auto_table.var(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bpr_return_update posterior arithmetic") {
  ReturnObservationTable table;
  table.n = 2;
  table.mean_return = {10.0, 0.0, 30.0, 0.0};  // mu[0][0]=10, mu[1][0]=30
  table.variance.assign(4, 25.0);

  // Observation equidistant from both means keeps a uniform belief.
  const Belief uniform = belief_init(2);
  const Belief post = bpr_return_update(uniform, 20.0, 0, table);
  CHECK(post.weights[0] == doctest::Approx(0.5).epsilon(1e-12));

  // Observation at one mean with the other 10 sigma away concentrates.
  ReturnObservationTable far = table;
  far.mean_return = {10.0, 0.0, 10.0 + 10.0 * 5.0, 0.0};
  const Belief sharp = bpr_return_update(uniform, 10.0, 0, far);
  CHECK(sharp.weights[0] > 0.999);
}

TEST_CASE("bpr_return_select maximizes expected utility") {
  ReturnObservationTable table;
  table.n = 2;
  table.mean_return = {1.0, 0.0, 0.0, 2.0};
  table.variance.assign(4, 1.0);

  CHECK(bpr_return_select(Belief{{0.5, 0.5}}, table) == 1);  // 1.0 vs 0.5
  CHECK(bpr_return_select(Belief{{1.0, 0.0}}, table) == 0);
  CHECK(bpr_return_select(Belief{{0.0, 1.0}}, table) == 1);

  // A dominating column wins under any belief.
  ReturnObservationTable dominated;
  dominated.n = 3;
  dominated.mean_return = {5, 9, 1, 4, 9, 2, 3, 9, 0};
  dominated.variance.assign(9, 1.0);
  CHECK(bpr_return_select(Belief{{0.2, 0.5, 0.3}}, dominated) == 1);
}

TEST_CASE("pr-drl softmax selection") {
  PrDrlState state = make_pr_state(3);
  CHECK(state.temperature == 0.0);
  const auto uniform = pr_probabilities(state);
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // First update: running mean base case.
  pr_update(state, 0, 10.0);
  CHECK(state.gains[0] == 10.0);
  CHECK(state.counts[0] == 1);
  CHECK(state.temperature == doctest::Approx(0.05).epsilon(1e-15));

  const auto probs = pr_probabilities(state);
  const double expected = std::exp(0.5) / (std::exp(0.5) + 2.0);
  CHECK(probs[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(probs[0] == doctest::Approx(0.4519).epsilon(1e-3));
}

TEST_CASE("pr probabilities normalize and are shift invariant") {
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    PrDrlState state = make_pr_state(4);
    state.temperature = rng.uniform(0.0, 2.0);
    for (double& g : state.gains) g = rng.uniform(-100.0, 100.0);
    const auto probs = pr_probabilities(state);
    double sum = 0.0;
    for (double p : probs) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    PrDrlState shifted = state;
    const double shift = rng.uniform(-50.0, 50.0);
    for (double& g : shifted.gains) g += shift;
    const auto probs_shifted = pr_probabilities(shifted);
    for (std::size_t j = 0; j < probs.size(); ++j)
      CHECK(probs[j] == doctest::Approx(probs_shifted[j]).epsilon(1e-12));
  }
}

TEST_CASE("pr running mean preserves the gain-count identity") {
  Rng rng(6);
  PrDrlState state = make_pr_state(3);
  std::vector<double> totals(3, 0.0);
  for (int i = 0; i < 10000; ++i) {
    const int arm = static_cast<int>(rng.uniform_index(3));
    const double ret = rng.uniform(-100.0, 100.0);
    pr_update(state, arm, ret);
    totals[static_cast<std::size_t>(arm)] += ret;
  }
  for (int arm = 0; arm < 3; ++arm) {
    const auto a = static_cast<std::size_t>(arm);
    CHECK(std::abs(state.gains[a] * state.counts[a] - totals[a]) <= 1e-9 *
          std::max(1.0, std::abs(totals[a])));
  }
}

TEST_CASE("pr selection is a proper draw from the softmax") {
  PrDrlState state = make_pr_state(2);
  state.temperature = 1.0;
  state.gains = {100.0, 0.0};
  Rng rng(7);
  for (int i = 0; i < 50; ++i) CHECK(pr_select(state, rng) == 0);
}

TEST_CASE("ops-drl ucb scores") {
  OpsState state = make_ops_state(3);
  // All zero: scores are all sqrt(2 ln 1 / 1) = 0, tie to index 0.
  const auto zero_scores = ops_scores(state);
  for (double s : zero_scores) CHECK(s == 0.0);
  CHECK(ops_select(state) == 0);

  ops_update(state, 0, 5.0);
  const auto scores = ops_scores(state);
  CHECK(scores[0] ==
        doctest::Approx(5.0 + std::sqrt(2.0 * std::log(2.0) / 2.0)).epsilon(1e-12));
  CHECK(scores[1] == doctest::Approx(std::sqrt(2.0 * std::log(2.0))).epsilon(1e-12));
  CHECK(scores[0] == doctest::Approx(5.8326).epsilon(1e-4));
  CHECK(scores[1] == doctest::Approx(1.1774).epsilon(1e-4));
  CHECK(ops_select(state) == 0);
}

TEST_CASE("ops prefers the least-pulled arm at equal gains") {
  OpsState state = make_ops_state(3);
  state.gains = {1.0, 1.0, 1.0};
  state.counts = {5, 9, 2};
  CHECK(ops_select(state) == 2);

  // Same running-mean rule as pr-drl.
  ops_update(state, 2, 7.0);
  CHECK(state.gains[2] == doctest::Approx((1.0 * 2 + 7.0) / 3.0).epsilon(1e-15));
  CHECK(state.counts[2] == 3);
}
