#include "zolqr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace zolqr {

namespace {

// splitmix64: the output function is a strong mixer, so stepping the state
// by the golden-ratio increment gives an independent-looking stream per
// derived seed. Reference: Steele, Lea & Flood (2014).
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t run_index,
                     const std::string& purpose) {
  state_ = mix(master_seed + kGolden) ^ mix(run_index * kGolden + kGolden) ^
           mix(fnv1a(purpose) + kGolden);
}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 == 0.0) u1 = uniform01();
  double u2 = uniform01();
  double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2.0 * M_PI * u2);
  have_spare_ = true;
  return mag * std::cos(2.0 * M_PI * u2);
}

VectorXd RngStream::normal_vector(int d) {
  VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = normal();
  return v;
}

VectorXd unit_sphere_direction(int D, RngStream& rng) {
  if (D < 1) throw std::invalid_argument("dimension must be >= 1");
  for (;;) {
    VectorXd v = rng.normal_vector(D);
    double nrm = v.norm();
    if (nrm > 0.0) return v / nrm;
    // probability-zero event; redraw
  }
}

InitDistribution InitDistribution::finite_support(std::vector<VectorXd> atoms,
                                                  std::vector<double> probs) {
  if (atoms.empty() || atoms.size() != probs.size())
    throw std::invalid_argument("finite support needs matching atoms/probs");
  double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("probabilities must sum to 1");
  InitDistribution d;
  d.kind = Kind::FiniteSupport;
  d.atoms = std::move(atoms);
  d.probs = std::move(probs);
  return d;
}

InitDistribution InitDistribution::uniform_atoms(std::vector<VectorXd> atoms) {
  std::vector<double> probs(atoms.size(), 1.0 / atoms.size());
  return finite_support(std::move(atoms), std::move(probs));
}

InitDistribution InitDistribution::gaussian(const MatrixXd& covariance) {
  InitDistribution d;
  d.kind = Kind::GaussianZeroMean;
  d.covariance = covariance;
  d.chol = Eigen::LLT<MatrixXd>(covariance).matrixL();
  return d;
}

InitDistribution InitDistribution::scaled_basis(const VectorXd& scales) {
  std::vector<VectorXd> atoms;
  const int n = static_cast<int>(scales.size());
  for (int i = 0; i < n; ++i) {
    VectorXd v = VectorXd::Zero(n);
    v(i) = scales(i);
    atoms.push_back(v);
  }
  InitDistribution d = uniform_atoms(std::move(atoms));
  d.kind = Kind::ScaledBasis;
  return d;
}

int InitDistribution::dim() const {
  return kind == Kind::GaussianZeroMean ? static_cast<int>(covariance.rows())
                                        : static_cast<int>(atoms[0].size());
}

MatrixXd InitDistribution::second_moment() const {
  if (kind == Kind::GaussianZeroMean) return covariance;
  MatrixXd S = MatrixXd::Zero(dim(), dim());
  for (size_t i = 0; i < atoms.size(); ++i)
    S += probs[i] * atoms[i] * atoms[i].transpose();
  return S;
}

double InitDistribution::cn_bound() const {
  if (kind != Kind::GaussianZeroMean) {
    double cn = 0.0;
    for (const auto& v : atoms) cn = std::max(cn, v.squaredNorm());
    return cn;
  }
  // 0.999 quantile of ||v||^2 via a fixed-seed Monte Carlo; diagnostic only.
  RngStream rng(0x5eedc0de, 0, "cn-quantile");
  const int draws = 100000;
  std::vector<double> sq(draws);
  for (int i = 0; i < draws; ++i)
    sq[i] = (chol * rng.normal_vector(dim())).squaredNorm();
  std::nth_element(sq.begin(), sq.begin() + (draws - draws / 1000), sq.end());
  return sq[draws - draws / 1000];
}

VectorXd InitDistribution::sample(RngStream& rng) const {
  if (kind == Kind::GaussianZeroMean) return chol * rng.normal_vector(dim());
  double u = rng.uniform01();
  double acc = 0.0;
  for (size_t i = 0; i < atoms.size(); ++i) {
    acc += probs[i];
    if (u < acc) return atoms[i];
  }
  return atoms.back();
}

}  // namespace zolqr
