#include "predpca/modelsel.hpp"

#include "helpers.hpp"
#include "predpca/synth.hpp"

#include "doctest.h"

#include <cmath>

using namespace predpca;

namespace {

struct Fixture {
  GroundTruth gt;
  TimeSeries centered;
  SuffStats stats{1, 1, 1};
  PredModel model;
};

// One medium-size noisy linear run shared by several checks.
const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    out.gt = gen_linear(4, 16, 0.9, 1.0, 1234);
    auto [states, obs] = simulate(out.gt, 8000, 77);
    out.centered = center(obs);
    out.stats = accumulate_series(out.centered, 3, 1);
    out.model = fit_batch(out.stats, 1, 1e-8);
    return out;
  }();
  return f;
}

}  // namespace

TEST_CASE("test_error_expectation edge cases") {
  const Fixture& f = fixture();

  SUBCASE("empty projector has zero generalization error") {
    const TestErrorTerms terms = test_error_expectation(f.model, f.stats, 0);
    CHECK(terms.generalization_error == 0.0);
    CHECK(terms.training_error ==
          doctest::Approx(0.5 * f.stats.sigma_target_mean().trace()));
    CHECK(terms.l_hat == terms.training_error);
  }
  SUBCASE("full-rank encoder reproduces the AR-model formula") {
    const TestErrorTerms terms = test_error_expectation(f.model, f.stats, 16);
    const double gap =
        (f.stats.sigma_target_mean() - f.model.sigma_hat).trace();
    const double n_phi = static_cast<double>(f.stats.n_phi());
    const double t = static_cast<double>(f.stats.count());
    CHECK(terms.l_hat == doctest::Approx(0.5 * (1.0 + n_phi / t) * gap).epsilon(1e-10));
  }
  SUBCASE("terms always sum to l_hat and keep their signs") {
    for (int n_u = 0; n_u <= 16; ++n_u) {
      const TestErrorTerms terms = test_error_expectation(f.model, f.stats, n_u);
      CHECK(terms.l_hat == terms.training_error + terms.generalization_error);
      CHECK(terms.generalization_error >= -1e-10);
    }
  }
  SUBCASE("generalization term is non-decreasing, training non-increasing") {
    double previous_gen = 0.0;
    double previous_train = std::numeric_limits<double>::infinity();
    for (int n_u = 0; n_u <= 16; ++n_u) {
      const TestErrorTerms terms = test_error_expectation(f.model, f.stats, n_u);
      CHECK(terms.generalization_error >= previous_gen - 1e-12);
      CHECK(terms.training_error <= previous_train + 1e-12);
      previous_gen = terms.generalization_error;
      previous_train = terms.training_error;
    }
  }
}

TEST_CASE("training term goes flat beyond the predicted-covariance rank") {
  // Noiseless system: the predicted covariance has rank N_x, so enlarging the
  // encoder beyond it cannot buy any training error.
  const GroundTruth gt = gen_linear(3, 10, 0.9, 0.0, 5);
  auto [states, obs] = simulate(gt, 20000, 9);
  const TimeSeries centered = center(obs);
  const SuffStats stats = accumulate_series(centered, 2, 1);
  const PredModel model = fit_batch(stats, 1, 1e-8);
  const double at_rank = test_error_expectation(model, stats, 3).training_error;
  for (int n_u = 4; n_u <= 10; ++n_u) {
    const double beyond = test_error_expectation(model, stats, n_u).training_error;
    CHECK(std::abs(beyond - at_rank) <= 1e-10 * std::max(1.0, at_rank));
  }
}

TEST_CASE("expectation tracks the held-out error over resampled training sets") {
  // Monte Carlo oracle: average the empirical held-out error of models fitted
  // on 20 independent training draws and compare with the analytic value.
  const GroundTruth gt = gen_linear(4, 16, 0.9, 1.0, 2024);
  const int k_p = 3;
  auto [test_states, test_obs] = simulate(gt, 40000, 999);

  double sum_empirical = 0.0;
  double sum_expected = 0.0;
  for (std::uint64_t draw = 0; draw < 20; ++draw) {
    auto [states, obs] = simulate(gt, 4000, 1000 + draw);
    const TimeSeries train = center(obs);
    const SuffStats stats = accumulate_series(train, k_p, 1);
    PredModel model = fit_batch(stats, 1, 1e-8);

    int chosen = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int n_u = 1; n_u <= 16; ++n_u) {
      const double l_hat = test_error_expectation(model, stats, n_u).l_hat;
      if (l_hat < best) {
        best = l_hat;
        chosen = n_u;
      }
    }
    set_encoder_count(model, chosen);
    sum_expected += 2.0 * best;  // l_hat carries the 1/2 error convention

    const TimeSeries test = center_with(test_obs, train.mean);
    const LagDataset test_d = lag_embed(test, k_p, 1);
    sum_empirical += empirical_error(model, test_d, 1, false);
  }
  CHECK(sum_empirical / 20.0 ==
        doctest::Approx(sum_expected / 20.0).epsilon(0.05));
}

TEST_CASE("select recovers the true basis dimensionality on a long run") {
  const GroundTruth gt = gen_linear(5, 30, 0.9, 1.0, 31);
  auto [states, obs] = simulate(gt, 100000, 8);
  const TimeSeries centered = center(obs);
  std::vector<int> n_u_grid;
  for (int i = 1; i <= 30; ++i) n_u_grid.push_back(i);
  const SelectionReport report = select(centered, n_u_grid, {5}, 1);
  CHECK(report.chosen_n_u == 5);
  CHECK(report.chosen_k_p == 5);
}

TEST_CASE("select bookkeeping") {
  const Fixture& f = fixture();
  auto [states, obs] = simulate(f.gt, 3000, 3);
  const TimeSeries centered = center(obs);

  SUBCASE("single K_p grid emits one row per N_u") {
    const SelectionReport report = select(centered, {1, 2, 3, 4, 8}, {1}, 1);
    CHECK(report.grid.size() == 5);
    int chosen_count = 0;
    for (const SelectionRecord& record : report.grid) chosen_count += record.chosen ? 1 : 0;
    CHECK(chosen_count == 1);
    CHECK(report.k_f == 1);
  }
  SUBCASE("chosen record sits within one standard error of the minimum") {
    const SelectionReport report = select(centered, {1, 2, 3, 4, 8, 12, 16}, {1, 2}, 1);
    double chosen_l_hat = 0.0;
    for (const SelectionRecord& record : report.grid)
      if (record.chosen) chosen_l_hat = record.l_hat;
    CHECK(chosen_l_hat <= report.l_hat_min + report.selection_window + 1e-12);
    CHECK(report.selection_window >= 0.0);
    // No record in the window has a smaller N_u than the chosen one.
    for (const SelectionRecord& record : report.grid)
      if (record.l_hat <= report.l_hat_min + report.selection_window)
        CHECK(record.n_u >= report.chosen_n_u);
  }
  SUBCASE("csv export shape") {
    const SelectionReport report = select(centered, {1, 2}, {1, 2}, 1);
    const std::string csv = report.to_csv();
    CHECK(csv.rfind("N_u,K_p,N_phi,train_err,gen_err,L_hat,chosen\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  }
  SUBCASE("grid errors carry the failing point") {
    CHECK_THROWS_WITH_AS(select(centered, {1}, {3000}, 1),
                         doctest::Contains("K_p=3000"), ParameterError);
  }
  SUBCASE("empty grids are rejected") {
    CHECK_THROWS_AS(select(centered, {}, {1}, 1), ParameterError);
  }
}

TEST_CASE("chosen dimensionality stabilizes as T grows") {
  const GroundTruth gt = gen_linear(5, 20, 0.9, 1.0, 71);
  std::vector<int> n_u_grid;
  for (int i = 1; i <= 20; ++i) n_u_grid.push_back(i);

  std::vector<int> chosen;
  for (long long t : {1000LL, 10000LL, 100000LL}) {
    auto [states, obs] = simulate(gt, t, 55);
    const SelectionReport report = select(center(obs), n_u_grid, {4}, 1);
    chosen.push_back(report.chosen_n_u);
  }
  // The long-sample choice sits at the truth; the threshold diagnostic is a
  // finite positive number.
  CHECK(chosen.back() == 5);

  auto [states, obs] = simulate(gt, 100000, 55);
  const TimeSeries centered = center(obs);
  const SuffStats stats = accumulate_series(centered, 4, 1);
  const PredModel model = fit_batch(stats, 1, 1e-8);
  const double threshold = stabilization_threshold(model, stats, 5);
  CHECK(threshold > 0.0);
  CHECK(std::isfinite(threshold));
}
