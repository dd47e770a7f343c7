#include "predpca/model_io.hpp"

#include "predpca/dataio.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace predpca {

namespace {

constexpr const char* kHeader = "predpca-container v1";

class Manifest {
 public:
  void set_int(const std::string& key, long long value) { entries_[key] = std::to_string(value); }

  void set_double(const std::string& key, double value) {
    std::ostringstream oss;
    oss << std::setprecision(17) << value;
    entries_[key] = oss.str();
  }

  void set_string(const std::string& key, const std::string& value) { entries_[key] = value; }

  long long get_int(const std::string& key) const { return std::stoll(fetch(key)); }
  double get_double(const std::string& key) const { return std::stod(fetch(key)); }
  const std::string& get_string(const std::string& key) const { return fetch(key); }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << kHeader << '\n';
    for (const auto& [key, value] : entries_) out << key << '=' << value << '\n';
    if (!out.good()) throw IoError("write failure on " + path.string());
  }

  static Manifest load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kHeader)
      throw FormatError("manifest: missing or unsupported header in " + path.string());
    Manifest m;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("manifest: bad line '" + line + "'");
      m.entries_[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
  }

 private:
  const std::string& fetch(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw FormatError("manifest: missing key '" + key + "'");
    return it->second;
  }

  std::map<std::string, std::string> entries_;
};

void save_blob(const std::filesystem::path& dir, const std::string& name, const Matrix& m) {
  save_matrix(m, dir / (name + ".pmat"));
}

void save_blob(const std::filesystem::path& dir, const std::string& name, const Vector& v) {
  save_matrix(Matrix(v), dir / (name + ".pmat"));
}

Matrix load_blob(const std::filesystem::path& dir, const std::string& name) {
  return load_matrix(dir / (name + ".pmat")).data;
}

Vector load_blob_vector(const std::filesystem::path& dir, const std::string& name) {
  const Matrix m = load_blob(dir, name);
  if (m.cols() != 1) throw FormatError("blob " + name + " is not a column vector");
  return m.col(0);
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string());
}

void check_kind(const Manifest& m, const std::string& expected) {
  if (m.get_string("kind") != expected)
    throw FormatError("container kind mismatch: expected " + expected + ", found " +
                      m.get_string("kind"));
}

void save_eigensystem(const std::filesystem::path& dir, const std::string& prefix,
                      const EigenSystem& eig) {
  save_blob(dir, prefix + "_values", eig.values);
  save_blob(dir, prefix + "_vectors", eig.vectors);
}

EigenSystem load_eigensystem(const std::filesystem::path& dir, const std::string& prefix) {
  EigenSystem eig;
  eig.values = load_blob_vector(dir, prefix + "_values");
  eig.vectors = load_blob(dir, prefix + "_vectors");
  return eig;
}

}  // namespace

void save_model(const PredModel& model, const std::filesystem::path& dir) {
  prepare_dir(dir);
  Manifest m;
  m.set_string("kind", "pred_model");
  m.set_int("K_p", model.k_p);
  m.set_int("K_f", model.k_f);
  m.set_int("N_u", model.n_u);
  m.set_double("rel_tol", model.rel_tol);
  m.save(dir / "manifest.txt");
  for (std::size_t k = 0; k < model.Q.size(); ++k)
    save_blob(dir, "Q_" + std::to_string(k + 1), model.Q[k]);
  save_blob(dir, "sigma_hat", model.sigma_hat);
  save_eigensystem(dir, "eig", model.eig);
  save_blob(dir, "W", model.W);
  save_blob(dir, "mean", model.mean);
}

PredModel load_model(const std::filesystem::path& dir) {
  const Manifest m = Manifest::load(dir / "manifest.txt");
  check_kind(m, "pred_model");
  PredModel model;
  model.k_p = static_cast<int>(m.get_int("K_p"));
  model.k_f = static_cast<int>(m.get_int("K_f"));
  model.n_u = static_cast<int>(m.get_int("N_u"));
  model.rel_tol = m.get_double("rel_tol");
  for (int k = 1; k <= model.k_f; ++k)
    model.Q.push_back(load_blob(dir, "Q_" + std::to_string(k)));
  model.sigma_hat = load_blob(dir, "sigma_hat");
  model.eig = load_eigensystem(dir, "eig");
  model.W = load_blob(dir, "W");
  model.mean = load_blob_vector(dir, "mean");
  return model;
}

void save_estimate(const SystemEstimate& est, const std::filesystem::path& dir) {
  prepare_dir(dir);
  Manifest m;
  m.set_string("kind", "system_estimate");
  m.set_int("N_psi_hat", est.n_psi_hat);
  m.set_int("N_x_hat", est.n_x_hat);
  m.save(dir / "manifest.txt");
  save_blob(dir, "A_hat", est.A_hat);
  save_blob(dir, "Psi_hat", est.Psi_hat);
  save_blob(dir, "sigma_psi_hat", est.sigma_psi_hat);
  save_blob(dir, "sigma_omega_hat", est.sigma_omega_hat);
  save_blob(dir, "B_hat", est.B_hat);
  save_blob(dir, "sigma_z_hat", est.sigma_z_hat);
  save_eigensystem(dir, "basis_eig", est.basis_eig);
  save_model(est.model, dir / "model");
}

SystemEstimate load_estimate(const std::filesystem::path& dir) {
  const Manifest m = Manifest::load(dir / "manifest.txt");
  check_kind(m, "system_estimate");
  SystemEstimate est;
  est.n_psi_hat = static_cast<int>(m.get_int("N_psi_hat"));
  est.n_x_hat = static_cast<int>(m.get_int("N_x_hat"));
  est.A_hat = load_blob(dir, "A_hat");
  est.Psi_hat = load_blob(dir, "Psi_hat");
  est.sigma_psi_hat = load_blob(dir, "sigma_psi_hat");
  est.sigma_omega_hat = load_blob(dir, "sigma_omega_hat");
  est.B_hat = load_blob(dir, "B_hat");
  est.sigma_z_hat = load_blob(dir, "sigma_z_hat");
  est.basis_eig = load_eigensystem(dir, "basis_eig");
  est.model = load_model(dir / "model");
  return est;
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir) {
  prepare_dir(dir);
  Manifest m;
  m.set_string("kind", "ground_truth");
  m.set_int("N_x", gt.n_x);
  m.set_int("N_psi", gt.n_psi);
  m.set_int("N_s", gt.n_s);
  m.set_int("rho", gt.rho == Nonlinearity::kTanh ? 1 : 0);
  m.set_int("seed", static_cast<long long>(gt.seed));
  m.set_double("conditioning_ratio", gt.conditioning_ratio);
  m.set_int("nonlinear_blobs", gt.linear() ? 0 : 1);
  m.save(dir / "manifest.txt");
  save_blob(dir, "A", gt.A);
  save_blob(dir, "B", gt.B);
  save_blob(dir, "sigma_z", gt.sigma_z);
  save_blob(dir, "sigma_omega", gt.sigma_omega);
  if (!gt.linear()) {
    save_blob(dir, "C", gt.C);
    save_blob(dir, "R", gt.R);
    save_blob(dir, "r", gt.r);
    save_blob(dir, "rho_mean", gt.rho_mean);
  }
}

GroundTruth load_ground_truth(const std::filesystem::path& dir) {
  const Manifest m = Manifest::load(dir / "manifest.txt");
  check_kind(m, "ground_truth");
  GroundTruth gt;
  gt.n_x = static_cast<int>(m.get_int("N_x"));
  gt.n_psi = static_cast<int>(m.get_int("N_psi"));
  gt.n_s = static_cast<int>(m.get_int("N_s"));
  gt.rho = m.get_int("rho") == 1 ? Nonlinearity::kTanh : Nonlinearity::kIdentity;
  gt.seed = static_cast<std::uint64_t>(m.get_int("seed"));
  gt.conditioning_ratio = m.get_double("conditioning_ratio");
  gt.A = load_blob(dir, "A");
  gt.B = load_blob(dir, "B");
  gt.sigma_z = load_blob(dir, "sigma_z");
  gt.sigma_omega = load_blob(dir, "sigma_omega");
  if (m.get_int("nonlinear_blobs") == 1) {
    gt.C = load_blob(dir, "C");
    gt.R = load_blob(dir, "R");
    gt.r = load_blob_vector(dir, "r");
    gt.rho_mean = load_blob_vector(dir, "rho_mean");
  }
  return gt;
}

void save_ica(const ICAModel& model, const std::filesystem::path& dir) {
  prepare_dir(dir);
  Manifest m;
  m.set_string("kind", "ica_model");
  m.set_int("iterations", model.iterations);
  m.set_double("final_update", model.final_update);
  m.save(dir / "manifest.txt");
  save_blob(dir, "unmixing", model.unmixing);
  save_blob(dir, "mean", model.mean);
}

ICAModel load_ica(const std::filesystem::path& dir) {
  const Manifest m = Manifest::load(dir / "manifest.txt");
  check_kind(m, "ica_model");
  ICAModel model;
  model.iterations = static_cast<int>(m.get_int("iterations"));
  model.final_update = m.get_double("final_update");
  model.unmixing = load_blob(dir, "unmixing");
  model.mean = load_blob_vector(dir, "mean");
  return model;
}

}  // namespace predpca
