// Command-line driver for the predictive dimensionality-reduction toolkit:
// generate benchmark systems, fit/select/identify models, run baseline
// comparisons, and emit CSV/PMAT artifacts. Every run writes its resolved
// configuration next to the outputs so results can be replayed.

#include "predpca/baselines.hpp"
#include "predpca/dataio.hpp"
#include "predpca/ica.hpp"
#include "predpca/model_io.hpp"
#include "predpca/modelsel.hpp"
#include "predpca/predpca.hpp"
#include "predpca/rng.hpp"
#include "predpca/synth.hpp"
#include "predpca/sysid.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace predpca;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  if (!out.good()) throw IoError("write failure on " + path.string());
}

void write_config(const fs::path& dir, const json& config) {
  write_text(dir / "config.json", config.dump(2) + "\n");
}

// PMAT by default; .csv inputs are parsed as comma-separated float rows.
TimeSeries load_series(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") return load_csv(path);
  return load_matrix(path);
}

fs::path make_out_dir(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

// "1,2,5" or "1..8" (inclusive) or a single value.
std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> out;
  const auto range = text.find("..");
  if (range != std::string::npos) {
    const int lo = std::stoi(text.substr(0, range));
    const int hi = std::stoi(text.substr(range + 2));
    if (hi < lo) throw ParameterError("grid: empty range '" + text + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stoi(cell));
  if (out.empty()) throw ParameterError("grid: no values in '" + text + "'");
  return out;
}

int default_jobs() {
  if (const char* env = std::getenv("PREDPCA_JOBS")) {
    const int jobs = std::atoi(env);
    if (jobs >= 1) return jobs;
  }
  return 1;
}

void run_jobs(const std::vector<std::function<void()>>& jobs, int parallelism) {
  if (parallelism <= 1) {
    for (const auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const int n_workers = std::min<int>(parallelism, static_cast<int>(jobs.size()));
  workers.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1))
        jobs[i]();
    });
  }
  for (std::thread& worker : workers) worker.join();
}

struct GenArgs {
  bool nonlinear = false;
  int n_x = 5;
  int n_psi = 0;  // nonlinear only; defaults to 10*n_x when unset
  int n_s = 30;
  long long t_steps = 10000;
  double radius = 0.9;
  double noise_ratio = 1.0;
  double noise_aniso = 1.0;
  std::uint64_t seed = 1;
  std::string out = "gen_out";
};

int cmd_gen(const GenArgs& args) {
  const fs::path dir = make_out_dir(args.out);
  GroundTruth gt;
  if (args.nonlinear) {
    const int n_psi = args.n_psi > 0 ? args.n_psi : 10 * args.n_x;
    gt = gen_nonlinear(args.n_x, n_psi, args.n_s, Nonlinearity::kTanh, args.seed,
                       args.noise_ratio, args.radius);
  } else {
    gt = gen_linear(args.n_x, args.n_s, args.radius, args.noise_ratio, args.seed,
                    args.noise_aniso);
  }
  const auto [states, observations] = simulate(gt, args.t_steps, args.seed);
  save_ground_truth(gt, dir / "truth");
  save_matrix(states, dir / "states.pmat");
  save_matrix(observations, dir / "observations.pmat");

  json config;
  config["command"] = "gen";
  config["family"] = args.nonlinear ? "nonlinear" : "linear";
  config["N_x"] = args.n_x;
  config["N_psi"] = gt.n_psi;
  config["N_s"] = args.n_s;
  config["T"] = args.t_steps;
  config["spectral_radius"] = args.radius;
  config["noise_ratio"] = args.noise_ratio;
  config["noise_anisotropy"] = args.noise_aniso;
  config["seed"] = args.seed;
  config["conditioning_ratio"] = gt.conditioning_ratio;
  write_config(dir, config);
  return 0;
}

struct FitArgs {
  std::string input;
  int k_p = 1;
  int k_f = 1;
  std::string n_u = "auto";
  bool online = false;
  double rel_tol = kDefaultRelTol;
  double train_fraction = 0.8;
  double eta0 = 1e-2;
  int epochs = 20000;
  std::uint64_t seed = 0;
  std::string out = "fit_out";
};

int cmd_fit(const FitArgs& args) {
  const fs::path dir = make_out_dir(args.out);
  const TimeSeries raw = load_series(args.input);
  const auto [train_raw, test_raw] = split_contiguous(raw, args.train_fraction);
  const TimeSeries train = center(train_raw);
  const TimeSeries test = center_with(test_raw, train.mean);

  int n_u;
  if (args.n_u == "auto") {
    std::vector<int> grid(static_cast<std::size_t>(train.cols()));
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<int>(i + 1);
    n_u = select(train, grid, {args.k_p}, args.k_f, args.rel_tol).chosen_n_u;
  } else {
    n_u = std::stoi(args.n_u);
  }

  const SuffStats stats = accumulate_series(train, args.k_p, args.k_f);
  PredModel model =
      args.online
          ? fit_online(stats, n_u, LearningSchedule{args.eta0, 0.0}, args.epochs,
                       args.seed, args.rel_tol)
          : fit_batch(stats, n_u, args.rel_tol);
  model.k_p = args.k_p;
  model.mean = train.mean;
  save_model(model, dir / "model");

  std::ostringstream metrics;
  metrics << "metric,value\n";
  metrics << "N_u," << n_u << "\n";
  const LagDataset train_d = lag_embed(train, args.k_p, args.k_f);
  const LagDataset test_d = lag_embed(test, args.k_p, args.k_f);
  for (int k = 1; k <= args.k_f; ++k) {
    metrics << "train_error_k" << k << ',' << empirical_error(model, train_d, k, true)
            << "\n";
    metrics << "test_error_k" << k << ',' << empirical_error(model, test_d, k, true)
            << "\n";
  }
  write_text(dir / "metrics.csv", metrics.str());

  json config;
  config["command"] = "fit";
  config["input"] = args.input;
  config["K_p"] = args.k_p;
  config["K_f"] = args.k_f;
  config["N_u"] = n_u;
  config["N_u_requested"] = args.n_u;
  config["online"] = args.online;
  config["rel_tol"] = args.rel_tol;
  config["train_fraction"] = args.train_fraction;
  config["eta0"] = args.eta0;
  config["epochs"] = args.epochs;
  config["seed"] = args.seed;
  write_config(dir, config);
  return 0;
}

struct SelectArgs {
  std::string input;
  std::string n_u_grid = "1..10";
  std::string k_p_grid = "1";
  int k_f = 1;
  double rel_tol = kDefaultRelTol;
  std::string out = "select_out";
};

int cmd_select(const SelectArgs& args) {
  const fs::path dir = make_out_dir(args.out);
  const TimeSeries centered = center(load_series(args.input));
  const SelectionReport report = select(centered, parse_grid(args.n_u_grid),
                                        parse_grid(args.k_p_grid), args.k_f, args.rel_tol);
  report.save_csv(dir / "selection.csv");

  json config;
  config["command"] = "select";
  config["input"] = args.input;
  config["N_u_grid"] = args.n_u_grid;
  config["K_p_grid"] = args.k_p_grid;
  config["K_f"] = args.k_f;
  config["rel_tol"] = args.rel_tol;
  config["chosen_N_u"] = report.chosen_n_u;
  config["chosen_K_p"] = report.chosen_k_p;
  config["selection_window"] = report.selection_window;
  write_config(dir, config);
  return 0;
}

struct IdentifyArgs {
  std::string input;
  int k_p = 1;
  int k_f = 1;
  std::string n_u = "auto";
  double rel_tol = kDefaultRelTol;
  std::string truth;
  std::string out = "identify_out";
};

int cmd_identify(const IdentifyArgs& args) {
  const fs::path dir = make_out_dir(args.out);
  const TimeSeries raw = load_series(args.input);

  IdentifyOptions options;
  options.k_p = args.k_p;
  options.k_f = args.k_f;
  options.rel_tol = args.rel_tol;
  if (args.n_u != "auto") options.n_u_override = std::stoi(args.n_u);
  const SystemEstimate est = identify_all(raw, options);
  save_estimate(est, dir / "estimate");

  std::vector<std::pair<std::string, double>> extra;
  {
    const TimeSeries centered = center(raw);
    const SuffStats stats = accumulate_series(centered, args.k_p, args.k_f);
    extra.emplace_back("stabilization_threshold",
                       stabilization_threshold(est.model, stats, est.n_psi_hat));
  }
  if (!args.truth.empty()) {
    const GroundTruth gt = load_ground_truth(args.truth);
    for (auto& metric : truth_error_metrics(est, gt)) extra.push_back(std::move(metric));
  }
  write_text(dir / "report.csv", identification_report_csv(est, extra));

  json config;
  config["command"] = "identify";
  config["input"] = args.input;
  config["K_p"] = args.k_p;
  config["K_f"] = args.k_f;
  config["N_u"] = args.n_u;
  config["rel_tol"] = args.rel_tol;
  config["truth"] = args.truth;
  config["N_psi_hat"] = est.n_psi_hat;
  config["N_x_hat"] = est.n_x_hat;
  write_config(dir, config);
  return 0;
}

struct BenchmarkArgs {
  std::string methods = "predpca,ar,pca,kalman";
  std::string t_grid = "1000,10000";
  int seeds = 10;
  int n_x = 5;
  int n_s = 30;
  int k_p = 5;
  double radius = 0.9;
  double noise_ratio = 1.0;
  long long t_test = 20000;
  int jobs = default_jobs();
  std::string out = "benchmark_out";
};

struct BenchmarkRow {
  std::string method;
  long long t_train = 0;
  std::uint64_t seed = 0;
  double noise_ratio = 0.0;
  int n_u = 0;
  double test_error = 0.0;
};

double normalized_error(const Matrix& predicted, const Matrix& target) {
  return (predicted - target).squaredNorm() / target.squaredNorm();
}

int cmd_benchmark(const BenchmarkArgs& args) {
  const fs::path dir = make_out_dir(args.out);
  std::vector<std::string> methods;
  {
    std::stringstream ss(args.methods);
    std::string cell;
    while (std::getline(ss, cell, ',')) methods.push_back(cell);
  }
  const std::vector<int> t_grid = parse_grid(args.t_grid);

  struct Task {
    std::string method;
    long long t_train;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const std::string& method : methods)
    for (int t_train : t_grid)
      for (int seed = 0; seed < args.seeds; ++seed)
        tasks.push_back({method, t_train, static_cast<std::uint64_t>(seed)});

  std::vector<BenchmarkRow> rows(tasks.size());
  std::vector<std::function<void()>> jobs;
  jobs.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    jobs.emplace_back([&, i] {
      const Task& task = tasks[i];
      const GroundTruth gt =
          gen_linear(args.n_x, args.n_s, args.radius, args.noise_ratio, 7000 + task.seed);
      auto [train_states, train_obs] = simulate(gt, task.t_train, 100 + task.seed);
      auto [test_states, test_obs] = simulate(gt, args.t_test, 900 + task.seed);
      const TimeSeries train = center(train_obs);
      const TimeSeries test = center_with(test_obs, train.mean);
      const LagDataset train_d = lag_embed(train, args.k_p, 1);
      const LagDataset test_d = lag_embed(test, args.k_p, 1);

      BenchmarkRow row;
      row.method = task.method;
      row.t_train = task.t_train;
      row.seed = task.seed;
      row.noise_ratio = args.noise_ratio;
      if (task.method == "predpca") {
        std::vector<int> grid(static_cast<std::size_t>(args.n_s));
        for (std::size_t g = 0; g < grid.size(); ++g) grid[g] = static_cast<int>(g + 1);
        const SelectionReport report = select(train, grid, {args.k_p}, 1);
        const PredModel model = fit_batch(train_d, report.chosen_n_u);
        row.n_u = report.chosen_n_u;
        row.test_error = empirical_error(model, test_d, 1, true);
      } else if (task.method == "ar") {
        const PredModel model = fit_ar(train_d);
        row.n_u = args.n_s;
        row.test_error = empirical_error(model, test_d, 1, true);
      } else if (task.method == "pca") {
        const PcaBaseline baseline = fit_pca_baseline(train_d, args.n_x);
        row.n_u = args.n_x;
        row.test_error =
            normalized_error(pca_baseline_predict(baseline, test_d), test_d.targets[0]);
      } else if (task.method == "kalman") {
        KalmanOptions options;
        options.max_iter = 50;
        options.seed = task.seed;
        const KalmanModel model = kalman_em(train, args.n_x, options);
        const Matrix predicted = kalman_predict(model, test, 1);
        // One-step-ahead predictions of rows 0..T-2 target rows 1..T-1.
        row.n_u = args.n_x;
        row.test_error = normalized_error(predicted.topRows(test.rows() - 1),
                                          test.data.bottomRows(test.rows() - 1));
      } else {
        throw ParameterError("benchmark: unknown method '" + task.method + "'");
      }
      rows[i] = std::move(row);
    });
  }
  run_jobs(jobs, args.jobs);

  std::sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.t_train != b.t_train) return a.t_train < b.t_train;
    return a.seed < b.seed;
  });
  std::ostringstream csv;
  csv << "method,T,seed,noise_ratio,N_u,test_error\n";
  csv.precision(17);
  for (const BenchmarkRow& row : rows)
    csv << row.method << ',' << row.t_train << ',' << row.seed << ',' << row.noise_ratio
        << ',' << row.n_u << ',' << row.test_error << "\n";
  write_text(dir / "benchmark.csv", csv.str());

  json config;
  config["command"] = "benchmark";
  config["methods"] = args.methods;
  config["T_grid"] = args.t_grid;
  config["seeds"] = args.seeds;
  config["N_x"] = args.n_x;
  config["N_s"] = args.n_s;
  config["K_p"] = args.k_p;
  config["spectral_radius"] = args.radius;
  config["noise_ratio"] = args.noise_ratio;
  config["T_test"] = args.t_test;
  config["jobs"] = args.jobs;
  write_config(dir, config);
  return 0;
}

struct RolloutArgs {
  bool synthetic = false;
  bool second_order = false;
  int k_p = 0;  // 0: pick by rollout order
  std::string input;        // PMAT observation sequence (alternative to synthetic)
  std::string labels_path;  // PMAT column of labels, required with --input
  long long horizon = 1000;
  long long t_train = 3000;
  int n_s = 24;
  double noise = 0.3;
  std::uint64_t seed = 1;
  std::string out = "rollout_out";
};

int cmd_rollout(const RolloutArgs& args) {
  const fs::path dir = make_out_dir(args.out);

  TimeSeries series;
  std::vector<int> labels;
  if (args.synthetic) {
    // Ten separated templates visited in ascending order under light noise.
    Rng rng(args.seed);
    const Matrix templates = 3.0 * rng.orthonormal_columns(args.n_s, 10).transpose();
    series.data.resize(args.t_train, args.n_s);
    series.mean = Vector::Zero(args.n_s);
    for (Eigen::Index t = 0; t < args.t_train; ++t) {
      const int digit = static_cast<int>(t % 10);
      series.data.row(t) =
          templates.row(digit) + args.noise * rng.gaussian(1, args.n_s).row(0);
      labels.push_back(digit);
    }
  } else {
    if (args.input.empty())
      throw ParameterError("rollout: need --synthetic or --input with --labels");
    series = load_series(args.input);
    const TimeSeries label_series = load_series(args.labels_path);
    if (label_series.cols() != 1 || label_series.rows() != series.rows())
      throw DataError("rollout: labels must be one column matching the sequence");
    for (Eigen::Index t = 0; t < label_series.rows(); ++t)
      labels.push_back(static_cast<int>(label_series.data(t, 0)));
  }

  const TimeSeries centered = center(series);
  // Higher-order streams need a longer past window before the linear
  // predictor can resolve the successor (deterministic cycles are memorized
  // once their positions are linearly independent lag patterns).
  const int k_f = args.second_order ? 3 : 2;
  const int k_p = args.k_p > 0 ? args.k_p : (args.second_order ? 8 : 1);
  const LagDataset dataset = lag_embed(centered, k_p, k_f);
  const PredModel model = fit_batch(dataset, 10, kDefaultRelTol);
  Matrix u1(dataset.rows(), 10), u2(dataset.rows(), 10), u3;
  if (args.second_order) u3.resize(dataset.rows(), 10);
  for (Eigen::Index t = 0; t < dataset.rows(); ++t) {
    u1.row(t) = encode(model, dataset.phi.row(t).transpose(), 1).transpose();
    u2.row(t) = encode(model, dataset.phi.row(t).transpose(), 2).transpose();
    if (args.second_order)
      u3.row(t) = encode(model, dataset.phi.row(t).transpose(), 3).transpose();
  }
  const ICAModel ica = fit_ica(u1, 0.05, 2000, args.seed);
  const Matrix codes1 = ica.transform_rows(u1);
  const Matrix codes2 = ica.transform_rows(u2);
  std::vector<int> labels1(labels.begin() + k_p,
                           labels.begin() + k_p + static_cast<long>(dataset.rows()));
  const std::vector<int> matched = match_components(codes1, labels1, 10);

  const Eigen::Index t0 = codes1.rows() - 1;
  Matrix b_tilde;
  std::vector<int> rollout;
  if (args.second_order) {
    const Matrix codes3 = ica.transform_rows(u3);
    b_tilde = fit_rollout_map_second_order(codes1, codes2, codes3, kDefaultRelTol);
    rollout = greedy_rollout_second_order(b_tilde, codes2.row(t0).transpose(),
                                          codes1.row(t0).transpose(), args.horizon);
  } else {
    b_tilde = fit_rollout_map(codes1, codes2, kDefaultRelTol);
    rollout = greedy_rollout(b_tilde, codes1.row(t0).transpose(), args.horizon);
  }

  std::ostringstream csv;
  csv << "step,component,label\n";
  for (std::size_t k = 0; k < rollout.size(); ++k)
    csv << k << ',' << rollout[k] << ','
        << matched[static_cast<std::size_t>(rollout[k])] << "\n";
  write_text(dir / "rollout.csv", csv.str());
  save_ica(ica, dir / "ica");
  save_matrix(b_tilde, dir / "transition.pmat");

  json config;
  config["command"] = "rollout";
  config["synthetic"] = args.synthetic;
  config["second_order"] = args.second_order;
  config["K_p"] = k_p;
  config["input"] = args.input;
  config["labels"] = args.labels_path;
  config["horizon"] = args.horizon;
  config["T_train"] = args.t_train;
  config["N_s"] = args.n_s;
  config["noise"] = args.noise;
  config["seed"] = args.seed;
  config["categorization_error"] = categorization_error(codes1, labels1);
  write_config(dir, config);
  return 0;
}

struct MnistArgs {
  std::string images;
  std::string labels;
  int dims = 40;
  std::string sequence;  // "", "ascending", or "fibonacci"
  long long t_steps = 60000;
  double replace_prob = 0.1;
  double invert_prob = 0.1;
  std::uint64_t seed = 1;
  std::string basis;  // reuse the PCA basis from a previous run's directory
  std::string out = "mnist_out";
};

int cmd_mnist_prep(const MnistArgs& args) {
  const fs::path dir = make_out_dir(args.out);
  const IdxData images = load_idx(args.images);
  const IdxData labels = load_idx(args.labels);
  if (images.dims.size() != 3) throw DataError("mnist-prep: image container must be 3-D");
  if (labels.dims.size() != 1) throw DataError("mnist-prep: label container must be 1-D");
  const int count = images.dims[0];
  const int pixels = images.dims[1] * images.dims[2];
  if (labels.dims[0] != count) throw DataError("mnist-prep: image/label count mismatch");

  Matrix flat(count, pixels);
  for (int i = 0; i < count; ++i)
    for (int p = 0; p < pixels; ++p)
      flat(i, p) =
          static_cast<double>(images.data[static_cast<std::size_t>(i) * pixels + p]) /
          255.0;

  Vector mean;
  Matrix projector;  // pixels x dims
  if (args.basis.empty()) {
    mean = flat.colwise().mean();
    Matrix centered = flat;
    centered.rowwise() -= mean.transpose();
    Matrix cov = centered.transpose() * centered / count;
    const EigenSystem eig = sym_eig(0.5 * (cov + cov.transpose()));
    projector = eig.leading_vectors(args.dims);
    save_matrix(Matrix(mean), dir / "pixel_mean.pmat");
    save_matrix(projector, dir / "basis.pmat");
  } else {
    mean = load_matrix(fs::path(args.basis) / "pixel_mean.pmat").data.col(0);
    projector = load_matrix(fs::path(args.basis) / "basis.pmat").data;
  }

  const Matrix compressed = (flat.rowwise() - mean.transpose()) * projector;
  save_matrix(compressed, dir / "compressed.pmat");
  Matrix label_column(count, 1);
  for (int i = 0; i < count; ++i)
    label_column(i, 0) = static_cast<double>(labels.data[static_cast<std::size_t>(i)]);
  save_matrix(label_column, dir / "labels.pmat");

  if (!args.sequence.empty()) {
    // Digit stream in the requested order; with some probability the shown
    // image is a random digit, or monochrome-inverted.
    std::vector<std::vector<int>> by_digit(10);
    for (int i = 0; i < count; ++i)
      by_digit[labels.data[static_cast<std::size_t>(i)]].push_back(i);
    for (const auto& bucket : by_digit)
      if (bucket.empty()) throw DataError("mnist-prep: a digit class is empty");

    Rng rng(args.seed);
    Matrix sequence(args.t_steps, args.dims);
    Matrix sequence_labels(args.t_steps, 1);
    int previous = 1, current = 1;
    for (long long t = 0; t < args.t_steps; ++t) {
      int digit;
      if (args.sequence == "fibonacci") {
        digit = (previous + current) % 10;
        previous = current;
        current = digit;
      } else {
        digit = static_cast<int>(t % 10);
      }
      sequence_labels(t, 0) = digit;
      int shown = digit;
      if (rng.uniform() < args.replace_prob) shown = rng.uniform_int(0, 9);
      const auto& bucket = by_digit[static_cast<std::size_t>(shown)];
      const int index = bucket[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(bucket.size()) - 1))];
      Vector image = flat.row(index).transpose();
      if (rng.uniform() < args.invert_prob) image = Vector::Ones(pixels) - image;
      sequence.row(t) = ((image - mean).transpose() * projector);
    }
    save_matrix(sequence, dir / "sequence.pmat");
    save_matrix(sequence_labels, dir / "sequence_labels.pmat");
  }

  json config;
  config["command"] = "mnist-prep";
  config["images"] = args.images;
  config["labels"] = args.labels;
  config["dims"] = args.dims;
  config["sequence"] = args.sequence;
  config["T"] = args.t_steps;
  config["replace_prob"] = args.replace_prob;
  config["invert_prob"] = args.invert_prob;
  config["seed"] = args.seed;
  config["basis"] = args.basis;
  write_config(dir, config);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predictive principal component analysis toolkit"};
  app.require_subcommand(1);

  GenArgs gen_args;
  bool linear_flag = false;
  CLI::App* gen = app.add_subcommand("gen", "Generate a ground-truth system and simulate it");
  gen->add_flag("--nonlinear", gen_args.nonlinear, "tanh basis family instead of linear");
  gen->add_flag("--linear", linear_flag, "linear family (default)");
  gen->add_option("--nx", gen_args.n_x, "hidden state count");
  gen->add_option("--npsi", gen_args.n_psi, "basis count (nonlinear; default 10*N_x)");
  gen->add_option("--ns", gen_args.n_s, "observation dimensions");
  gen->add_option("--T", gen_args.t_steps, "steps to simulate");
  gen->add_option("--radius", gen_args.radius, "spectral radius of the transition");
  gen->add_option("--noise-ratio", gen_args.noise_ratio, "tr[sigma_omega]/tr[signal]");
  gen->add_option("--noise-aniso", gen_args.noise_aniso, "noise eigenvalue ratio");
  gen->add_option("--seed", gen_args.seed, "generator seed");
  gen->add_option("--out", gen_args.out, "output directory");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit a predictive model on a PMAT sequence");
  fit->add_option("--input", fit_args.input, "observation PMAT")->required();
  fit->add_option("--kp", fit_args.k_p, "past window length");
  fit->add_option("--kf", fit_args.k_f, "future horizon count");
  fit->add_option("--nu", fit_args.n_u, "encoder count or 'auto'");
  fit->add_flag("--online", fit_args.online, "gradient (subspace-rule) fit of W");
  fit->add_option("--rel-tol", fit_args.rel_tol, "inverse truncation tolerance");
  fit->add_option("--train-fraction", fit_args.train_fraction, "contiguous split point");
  fit->add_option("--eta0", fit_args.eta0, "online learning rate");
  fit->add_option("--epochs", fit_args.epochs, "online epoch cap");
  fit->add_option("--seed", fit_args.seed, "online init seed");
  fit->add_option("--out", fit_args.out, "output directory");

  SelectArgs select_args;
  CLI::App* sel = app.add_subcommand("select", "Sweep (N_u, K_p) with the analytic test error");
  sel->add_option("--input", select_args.input, "observation PMAT")->required();
  sel->add_option("--nu", select_args.n_u_grid, "N_u grid, e.g. 1..30 or 2,6,10");
  sel->add_option("--kp", select_args.k_p_grid, "K_p grid");
  sel->add_option("--kf", select_args.k_f, "future horizon count");
  sel->add_option("--rel-tol", select_args.rel_tol, "inverse truncation tolerance");
  sel->add_option("--out", select_args.out, "output directory");

  IdentifyArgs identify_args;
  CLI::App* ident = app.add_subcommand("identify", "Full latent-system identification");
  ident->add_option("--input", identify_args.input, "observation PMAT")->required();
  ident->add_option("--kp", identify_args.k_p, "past window length");
  ident->add_option("--kf", identify_args.k_f, "future horizon count");
  ident->add_option("--nu", identify_args.n_u, "encoder count or 'auto'");
  ident->add_option("--rel-tol", identify_args.rel_tol, "inverse truncation tolerance");
  ident->add_option("--truth", identify_args.truth, "ground-truth directory for error metrics");
  ident->add_option("--out", identify_args.out, "output directory");

  BenchmarkArgs benchmark_args;
  CLI::App* bench = app.add_subcommand("benchmark", "Method comparison on synthetic systems");
  bench->add_option("--methods", benchmark_args.methods, "comma list: predpca,ar,pca,kalman");
  bench->add_option("--T", benchmark_args.t_grid, "training length grid");
  bench->add_option("--seeds", benchmark_args.seeds, "seeds per grid point");
  bench->add_option("--nx", benchmark_args.n_x, "hidden state count");
  bench->add_option("--ns", benchmark_args.n_s, "observation dimensions");
  bench->add_option("--kp", benchmark_args.k_p, "past window length");
  bench->add_option("--radius", benchmark_args.radius, "spectral radius");
  bench->add_option("--noise-ratio", benchmark_args.noise_ratio, "observation noise ratio");
  bench->add_option("--t-test", benchmark_args.t_test, "held-out length");
  bench->add_option("--jobs", benchmark_args.jobs, "parallel workers (PREDPCA_JOBS)");
  bench->add_option("--out", benchmark_args.out, "output directory");

  RolloutArgs rollout_args;
  CLI::App* roll = app.add_subcommand("rollout", "Greedy categorical rollout from codes");
  roll->add_flag("--synthetic", rollout_args.synthetic, "built-in cyclic template stream");
  roll->add_flag("--second-order", rollout_args.second_order,
                 "Kronecker-pair transition over the last two codes");
  roll->add_option("--kp", rollout_args.k_p, "past window length (default 1, or 8 "
                   "with --second-order)");
  roll->add_option("--input", rollout_args.input, "observation PMAT (labeled stream)");
  roll->add_option("--labels", rollout_args.labels_path, "label PMAT column");
  roll->add_option("--horizon", rollout_args.horizon, "steps to roll out");
  roll->add_option("--T", rollout_args.t_train, "synthetic training length");
  roll->add_option("--ns", rollout_args.n_s, "synthetic observation dimensions");
  roll->add_option("--noise", rollout_args.noise, "synthetic observation noise");
  roll->add_option("--seed", rollout_args.seed, "stream/ICA seed");
  roll->add_option("--out", rollout_args.out, "output directory");

  MnistArgs mnist_args;
  CLI::App* mnist = app.add_subcommand("mnist-prep", "IDX to PCA-compressed PMAT inputs");
  mnist->add_option("--images", mnist_args.images, "IDX image file")->required();
  mnist->add_option("--labels", mnist_args.labels, "IDX label file")->required();
  mnist->add_option("--dims", mnist_args.dims, "compressed dimensionality");
  mnist->add_option("--sequence", mnist_args.sequence, "ascending or fibonacci stream");
  mnist->add_option("--T", mnist_args.t_steps, "sequence length");
  mnist->add_option("--replace-prob", mnist_args.replace_prob, "random digit probability");
  mnist->add_option("--invert-prob", mnist_args.invert_prob, "monochrome inversion probability");
  mnist->add_option("--seed", mnist_args.seed, "sequence seed");
  mnist->add_option("--basis", mnist_args.basis, "reuse basis from a previous run");
  mnist->add_option("--out", mnist_args.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_args);
    if (fit->parsed()) return cmd_fit(fit_args);
    if (sel->parsed()) return cmd_select(select_args);
    if (ident->parsed()) return cmd_identify(identify_args);
    if (bench->parsed()) return cmd_benchmark(benchmark_args);
    if (roll->parsed()) return cmd_rollout(rollout_args);
    if (mnist->parsed()) return cmd_mnist_prep(mnist_args);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {  // format, data, io
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
