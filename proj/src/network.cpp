#include "ngdconv/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "ngdconv/io.hpp"

namespace ngdconv {

NetworkParams::NetworkParams(Matrix w, Vector a, double nu, std::uint64_t seed)
    : NetworkParams(w, std::move(a), w, nu, seed) {}

NetworkParams::NetworkParams(Matrix w, Vector a, Matrix w0, double nu, std::uint64_t seed)
    : w_(std::move(w)), a_(std::move(a)), w0_(std::move(w0)), nu_(nu), seed_(seed) {
  if (w_.rows() < 1) throw Error(ErrorKind::contract, "network width m must be >= 1");
  if (!(nu_ > 0.0)) throw Error(ErrorKind::contract, "init scale nu must be > 0");
  require_shape(a_.size() == w_.rows(), "output signs must have length m");
  require_shape(w0_.rows() == w_.rows() && w0_.cols() == w_.cols(),
                "initial snapshot must match weight shape");
  for (Eigen::Index r = 0; r < a_.size(); ++r) {
    if (a_(r) != 1.0 && a_(r) != -1.0) {
      throw Error(ErrorKind::contract, "output signs must be +1 or -1");
    }
  }
}

NetworkParams NetworkParams::with_weights(Matrix w) const {
  require_shape(w.rows() == w_.rows() && w.cols() == w_.cols(), "with_weights: shape mismatch");
  NetworkParams out = *this;
  out.w_ = std::move(w);
  return out;
}

double NetworkParams::weight_drift() const { return (w_ - w0_).norm(); }

double NetworkParams::per_unit_max_drift() const {
  return (w_ - w0_).rowwise().norm().maxCoeff();
}

bool NetworkParams::same_architecture(const NetworkParams& other) const {
  return m() == other.m() && d() == other.d() && a_ == other.a_;
}

NetworkParams init(Eigen::Index m, Eigen::Index d, double nu, std::uint64_t seed) {
  if (m < 1) throw Error(ErrorKind::contract, "network width m must be >= 1");
  if (!(nu > 0.0)) throw Error(ErrorKind::contract, "init scale nu must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, nu);
  std::bernoulli_distribution coin(0.5);
  Matrix w(m, d);
  Vector a(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) w(r, c) = normal(rng);
  }
  for (Eigen::Index r = 0; r < m; ++r) a(r) = coin(rng) ? 1.0 : -1.0;
  return NetworkParams(std::move(w), std::move(a), nu, seed);
}

namespace {

void check_inputs(const NetworkParams& p, const Matrix& X) {
  if (X.cols() != p.d()) {
    std::ostringstream os;
    os << "input has " << X.cols() << " columns, network expects d = " << p.d();
    throw Error(ErrorKind::shape, os.str());
  }
}

ActivationPattern pattern_for(const Matrix& w, const Vector& a, const Matrix& X) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(w.rows()));
  ActivationPattern ap;
  const Matrix pre = X * w.transpose();
  ap.S = (pre.array() >= 0.0).cast<double>();
  ap.Stilde = ap.S * (a * scale).asDiagonal();
  return ap;
}

}  // namespace

Vector forward(const NetworkParams& p, const Matrix& X) {
  check_inputs(p, X);
  const Matrix hidden = (X * p.w().transpose()).cwiseMax(0.0);
  return hidden * p.a() / std::sqrt(static_cast<double>(p.m()));
}

ActivationPattern activation_pattern(const NetworkParams& p, const Matrix& X) {
  check_inputs(p, X);
  return pattern_for(p.w(), p.a(), X);
}

ActivationPattern initial_activation_pattern(const NetworkParams& p, const Matrix& X) {
  check_inputs(p, X);
  return pattern_for(p.w0(), p.a(), X);
}

JacobianView::JacobianView(Matrix X, Matrix Stilde) : X_(std::move(X)), Stilde_(std::move(Stilde)) {
  require_shape(X_.rows() == Stilde_.rows(), "JacobianView: X and Stilde row counts differ");
}

Matrix JacobianView::dense() const {
  const Eigen::Index d = this->d();
  Matrix J(n(), m() * d);
  for (Eigen::Index i = 0; i < n(); ++i) {
    for (Eigen::Index r = 0; r < m(); ++r) {
      J.block(i, r * d, 1, d) = Stilde_(i, r) * X_.row(i);
    }
  }
  return J;
}

Vector JacobianView::apply(const Matrix& V) const {
  require_shape(V.rows() == m() && V.cols() == d(), "JacobianView::apply: direction must be m x d");
  // (J vec V)_i = sum_r Stilde(i,r) (V x_i)_r
  const Matrix proj = X_ * V.transpose();  // n x m
  return (Stilde_.array() * proj.array()).rowwise().sum();
}

Matrix JacobianView::apply_transpose(const Vector& z) const {
  require_shape(z.size() == n(), "JacobianView::apply_transpose: length must be n");
  return Stilde_.transpose() * z.asDiagonal() * X_;
}

Matrix JacobianView::gram() const {
  const Matrix xx = X_ * X_.transpose();
  const Matrix ss = Stilde_ * Stilde_.transpose();
  return xx.cwiseProduct(ss);
}

JacobianView jacobian(const NetworkParams& p, const Matrix& X) {
  auto ap = activation_pattern(p, X);
  return JacobianView(X, std::move(ap.Stilde));
}

Matrix unflatten_weights(const Vector& flat, Eigen::Index m, Eigen::Index d) {
  require_shape(flat.size() == m * d, "unflatten_weights: length must be m*d");
  Matrix w(m, d);
  for (Eigen::Index r = 0; r < m; ++r) w.row(r) = flat.segment(r * d, d).transpose();
  return w;
}

Vector flatten_weights(const Matrix& w) {
  Vector flat(w.size());
  for (Eigen::Index r = 0; r < w.rows(); ++r) flat.segment(r * w.cols(), w.cols()) = w.row(r).transpose();
  return flat;
}

void save_params(const NetworkParams& p, const std::filesystem::path& path) {
  std::string out = "ngdconv-params,1," + std::to_string(p.m()) + "," + std::to_string(p.d()) + "," +
                    io::format_double(p.nu()) + "," + std::to_string(p.seed()) + "\n";
  for (Eigen::Index r = 0; r < p.m(); ++r) {
    out += io::format_double(p.a()(r));
    for (Eigen::Index c = 0; c < p.d(); ++c) out += "," + io::format_double(p.w()(r, c));
    for (Eigen::Index c = 0; c < p.d(); ++c) out += "," + io::format_double(p.w0()(r, c));
    out += '\n';
  }
  io::write_file_atomic(path, out);
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "empty params file");
  const auto head = io::split_csv_line(line);
  if (head.size() != 6 || head[0] != "ngdconv-params" || head[1] != "1") {
    throw Error(ErrorKind::format, "not an ngdconv-params v1 file: " + path.string());
  }
  const auto m = static_cast<Eigen::Index>(std::stoll(head[2]));
  const auto d = static_cast<Eigen::Index>(std::stoll(head[3]));
  const auto nu = io::parse_double(head[4]);
  const auto seed = static_cast<std::uint64_t>(std::stoull(head[5]));
  if (!nu || m < 1 || d < 1) throw Error(ErrorKind::format, "bad params header");

  Matrix w(m, d), w0(m, d);
  Vector a(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (!std::getline(in, line)) throw Error(ErrorKind::format, "params file truncated");
    const auto fields = io::split_csv_line(line);
    if (static_cast<Eigen::Index>(fields.size()) != 1 + 2 * d) {
      throw Error(ErrorKind::format, "params row " + std::to_string(r) + " has wrong width");
    }
    auto get = [&](std::size_t k) {
      const auto v = io::parse_double(fields[k]);
      if (!v) throw Error(ErrorKind::format, "params row " + std::to_string(r) + ": bad number");
      return *v;
    };
    a(r) = get(0);
    for (Eigen::Index c = 0; c < d; ++c) w(r, c) = get(1 + static_cast<std::size_t>(c));
    for (Eigen::Index c = 0; c < d; ++c) w0(r, c) = get(1 + static_cast<std::size_t>(d + c));
  }
  return NetworkParams(std::move(w), std::move(a), std::move(w0), *nu, seed);
}

}  // namespace ngdconv
