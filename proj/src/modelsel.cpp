#include "predpca/modelsel.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace predpca {

TestErrorTerms test_error_expectation(const PredModel& model, const SuffStats& stats,
                                      int n_u) {
  if (n_u < 0 || n_u > model.n_s())
    throw ParameterError("test_error_expectation: N_u out of range");
  if (stats.count() == 0) throw ParameterError("test_error_expectation: empty statistics");
  if (model.k_f != stats.k_f())
    throw ParameterError("test_error_expectation: model and statistics disagree on K_f");

  const double k_f = static_cast<double>(model.k_f);
  const double t_count = static_cast<double>(stats.count());
  const double n_phi = static_cast<double>(stats.n_phi());
  const Matrix sigma_s = stats.sigma_target_mean();

  double kept = 0.0;
  for (int i = 0; i < n_u; ++i) kept += model.eig.values(i);

  TestErrorTerms out;
  out.training_error = 0.5 * k_f * (sigma_s.trace() - kept);
  if (n_u > 0) {
    const Matrix projector = model.eig.leading_vectors(n_u);
    const Matrix gap = sigma_s - model.sigma_hat;
    out.generalization_error =
        0.5 * k_f * n_phi / t_count * (projector.transpose() * gap * projector).trace();
  }
  out.l_hat = out.training_error + out.generalization_error;
  return out;
}

double stabilization_threshold(const PredModel& model, const SuffStats& stats, int n_psi) {
  if (n_psi < 1 || n_psi > model.eig.size())
    throw ParameterError("stabilization_threshold: N_psi out of range");
  const double smallest_kept = model.eig.values(n_psi - 1);
  if (smallest_kept <= 0.0) return std::numeric_limits<double>::infinity();
  const Matrix gap = stats.sigma_target_mean() - model.sigma_hat;
  return static_cast<double>(stats.n_phi()) * gap.trace() / smallest_kept;
}

double expectation_standard_error(const PredModel& model, const SuffStats& stats) {
  const Matrix residual = stats.sigma_target_mean() - model.sigma_hat;
  const double t_count = static_cast<double>(stats.count());
  return 0.5 * model.k_f * std::sqrt(2.0 * residual.squaredNorm() / t_count);
}

SelectionReport select(const TimeSeries& centered, const std::vector<int>& n_u_grid,
                       const std::vector<int>& k_p_grid, int k_f, double rel_tol) {
  if (n_u_grid.empty() || k_p_grid.empty())
    throw ParameterError("select: empty parameter grid");

  std::vector<int> n_u_sorted = n_u_grid;
  std::sort(n_u_sorted.begin(), n_u_sorted.end());
  std::vector<int> k_p_sorted = k_p_grid;
  std::sort(k_p_sorted.begin(), k_p_sorted.end());

  SelectionReport report;
  report.k_f = k_f;

  double best = std::numeric_limits<double>::infinity();
  double best_standard_error = 0.0;
  for (int k_p : k_p_sorted) {
    SuffStats stats = [&] {
      try {
        return accumulate_series(centered, k_p, k_f);
      } catch (const std::exception& e) {
        throw ParameterError("select: K_p=" + std::to_string(k_p) + ": " + e.what());
      }
    }();
    PredModel model = [&] {
      try {
        return fit_batch(stats, 1, rel_tol);
      } catch (const std::exception& e) {
        throw NumericError("select: K_p=" + std::to_string(k_p) + ": " + e.what());
      }
    }();
    for (int n_u : n_u_sorted) {
      const TestErrorTerms terms = [&] {
        try {
          return test_error_expectation(model, stats, n_u);
        } catch (const std::exception& e) {
          throw ParameterError("select: K_p=" + std::to_string(k_p) +
                               " N_u=" + std::to_string(n_u) + ": " + e.what());
        }
      }();
      SelectionRecord record;
      record.n_u = n_u;
      record.k_p = k_p;
      record.n_phi = static_cast<int>(stats.n_phi());
      record.training_error = terms.training_error;
      record.generalization_error = terms.generalization_error;
      record.l_hat = terms.l_hat;
      report.grid.push_back(record);
      if (terms.l_hat < best) {
        best = terms.l_hat;
        best_standard_error = expectation_standard_error(model, stats);
      }
    }
  }

  // Records within one standard error of the minimum are indistinguishable at
  // the formula's resolution; among them the smallest N_u (then smallest K_p)
  // wins.
  report.l_hat_min = best;
  report.selection_window = best_standard_error;
  report.chosen_n_u = 0;
  for (const SelectionRecord& record : report.grid) {
    if (record.l_hat > best + best_standard_error) continue;
    if (report.chosen_n_u == 0 || record.n_u < report.chosen_n_u ||
        (record.n_u == report.chosen_n_u && record.k_p < report.chosen_k_p)) {
      report.chosen_n_u = record.n_u;
      report.chosen_k_p = record.k_p;
    }
  }
  for (SelectionRecord& record : report.grid)
    record.chosen = record.n_u == report.chosen_n_u && record.k_p == report.chosen_k_p;
  report.sample_count = centered.rows() - report.chosen_k_p + 1 - k_f;

  std::sort(report.grid.begin(), report.grid.end(),
            [](const SelectionRecord& a, const SelectionRecord& b) {
              return a.k_p != b.k_p ? a.k_p < b.k_p : a.n_u < b.n_u;
            });
  return report;
}

std::string SelectionReport::to_csv() const {
  std::ostringstream oss;
  oss << "N_u,K_p,N_phi,train_err,gen_err,L_hat,chosen\n";
  oss << std::setprecision(17);
  for (const SelectionRecord& record : grid) {
    oss << record.n_u << ',' << record.k_p << ',' << record.n_phi << ','
        << record.training_error << ',' << record.generalization_error << ','
        << record.l_hat << ',' << (record.chosen ? 1 : 0) << '\n';
  }
  return oss.str();
}

void SelectionReport::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << to_csv();
  if (!out.good()) throw IoError("write failure on " + path.string());
}

}  // namespace predpca
