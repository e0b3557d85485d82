#ifndef RESCALE_INSTANCES_HPP
#define RESCALE_INSTANCES_HPP

#include "rescale/oracles.hpp"
#include "rescale/types.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace rescale {

// ---------------------------------------------------------------------------
// Generators

/**
 * Six vertices of an irregular simplex in R^5: a_j - (1 + eps) p for
 * a_j = 4^j e_j (j = 1..5), then -p, where p is the convex combination of
 * the a_j with weights proportional to 4^-j (so every entry of p equals
 * 1 / sum 4^-j). For small eps the origin lies just outside one facet.
 */
inline FiniteSetOracle gen_simplex(double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
  constexpr Index n = 5;
  double weight_sum = 0.0;
  for (int j = 1; j <= n; ++j) weight_sum += std::ldexp(1.0, -2 * j);
  const Vector p = Vector::Constant(n, 1.0 / weight_sum);
  std::vector<Vector> points;
  for (int j = 1; j <= n; ++j) {
    Vector a = Vector::Zero(n);
    a(j - 1) = std::ldexp(1.0, 2 * j);
    points.push_back(a - (1.0 + eps) * p);
  }
  points.push_back(-p);
  return FiniteSetOracle(std::move(points));
}

/// The vertices a_j = 4^j e_j and weights w_j = 4^-j / sum 4^-i behind gen_simplex.
inline std::pair<std::vector<Vector>, Vector> simplex_vertices_and_weights() {
  constexpr Index n = 5;
  std::vector<Vector> a;
  Vector w(n);
  for (int j = 1; j <= n; ++j) {
    Vector v = Vector::Zero(n);
    v(j - 1) = std::ldexp(1.0, 2 * j);
    a.push_back(v);
    w(j - 1) = std::ldexp(1.0, -2 * j);
  }
  w /= w.sum();
  return {a, w};
}

struct EllipsoidInstance {
  Matrix A;
  Vector c;
  Vector u;      // the unit direction with c = (1 + d) A u
  Vector start;  // unit start vector for the separator
};

/// A = diag(10^exponents), u and start random unit vectors, c = (1 + d) A u.
inline EllipsoidInstance gen_ellipsoid(const std::vector<int>& exponents, double d, std::uint64_t seed) {
  if (!(d > 0.0)) throw Error(ErrorKind::InvalidArgument, "d must be positive");
  if (exponents.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one exponent");
  const Index n = static_cast<Index>(exponents.size());
  Vector diag(n);
  for (Index i = 0; i < n; ++i) diag(i) = std::pow(10.0, exponents[static_cast<std::size_t>(i)]);
  Rng rng(seed);
  EllipsoidInstance out;
  out.A = diag.asDiagonal();
  out.u = random_unit_vector(n, rng);
  out.c = (1.0 + d) * (out.A * out.u);
  out.start = random_unit_vector(n, rng);
  return out;
}

/**
 * The planar example on which classic Shor updating cycles:
 * A = diag(1, 10), v = -(10, 39), c = 1.01 A v / ||v||, started at (-1, 0).
 */
inline EllipsoidInstance failure_instance() {
  EllipsoidInstance out;
  out.A = Vector((Vector(2) << 1.0, 10.0).finished()).asDiagonal();
  const Vector v = (Vector(2) << -10.0, -39.0).finished();
  out.u = v / v.norm();
  out.c = (1.0 + 1e-2) * (out.A * out.u);
  out.start = (Vector(2) << -1.0, 0.0).finished();
  return out;
}

/// Pieces 1/2 x^T P x + b^T x + c with P = G^T G + I; G, b, c standard normal.
inline MaxQuadSubdiff gen_max_quadratics(Index n, Index m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw Error(ErrorKind::InvalidArgument, "n and m must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<QuadraticPiece> pieces;
  for (Index i = 0; i < m; ++i) {
    const Matrix G = random_normal_matrix(n, n, rng);
    QuadraticPiece q;
    q.P = G.transpose() * G + Matrix::Identity(n, n);
    q.b = random_normal_vector(n, rng);
    q.c = normal(rng);
    pieces.push_back(std::move(q));
  }
  return MaxQuadSubdiff(std::move(pieces));
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
inline Matrix random_orthogonal(Index n, Rng& rng) {
  const Matrix G = random_normal_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

/// Random SPD matrix U diag(cond^(i/(n-1))) U^T with condition number cond.
inline Matrix random_spd(Index n, double cond, Rng& rng) {
  if (!(cond >= 1.0)) throw Error(ErrorKind::InvalidArgument, "condition number must be >= 1");
  const Matrix U = random_orthogonal(n, rng);
  Vector ev(n);
  for (Index i = 0; i < n; ++i) ev(i) = n > 1 ? std::pow(cond, static_cast<double>(i) / (n - 1)) : 1.0;
  Matrix S = U * ev.asDiagonal() * U.transpose();
  return 0.5 * (S + S.transpose());
}

/// R = U diag(sigma) W^T with cond(R^T R) = cond; cond = 0 means a plain Gaussian R.
inline Matrix gen_quadratic_factor(Index n, double cond, std::uint64_t seed) {
  Rng rng(seed);
  if (cond == 0.0) return random_normal_matrix(n, n, rng);
  if (!(cond >= 1.0)) throw Error(ErrorKind::InvalidArgument, "condition number must be >= 1");
  const Matrix U = random_orthogonal(n, rng);
  const Matrix W = random_orthogonal(n, rng);
  Vector sigma(n);
  for (Index i = 0; i < n; ++i)
    sigma(i) = n > 1 ? std::pow(cond, 0.5 * static_cast<double>(i) / (n - 1)) : 1.0;
  return U * sigma.asDiagonal() * W.transpose();
}

enum class UnitBallStart { Wishart, LogNormal, Identity };

inline UnitBallStart parse_unit_ball_start(const std::string& name) {
  if (name == "wishart") return UnitBallStart::Wishart;
  if (name == "lognormal") return UnitBallStart::LogNormal;
  if (name == "identity") return UnitBallStart::Identity;
  throw Error(ErrorKind::InvalidArgument, "unknown H0 distribution '" + name + "'");
}

inline const char* to_string(UnitBallStart kind) {
  switch (kind) {
    case UnitBallStart::Wishart: return "wishart";
    case UnitBallStart::LogNormal: return "lognormal";
    case UnitBallStart::Identity: return "identity";
  }
  return "wishart";
}

struct UnitBallInstance {
  Vector g0;
  SpdMatrix H0;
};

/**
 * Random start for the unit-ball iteration: H0 = G^T G (Wishart), expm of
 * the symmetric part of G (log-normal) or I, then g0 a random unit vector.
 */
inline UnitBallInstance gen_unit_ball(Index n, std::uint64_t seed, UnitBallStart kind = UnitBallStart::Wishart) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be positive");
  Rng rng(seed);
  Matrix H = Matrix::Identity(n, n);
  if (kind != UnitBallStart::Identity) {
    const Matrix G = random_normal_matrix(n, n, rng);
    if (kind == UnitBallStart::Wishart) {
      H = G.transpose() * G;
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (G + G.transpose()));
      H = es.eigenvectors() * es.eigenvalues().array().exp().matrix().asDiagonal() *
          es.eigenvectors().transpose();
    }
    H = 0.5 * (H + H.transpose()).eval();
  }
  Vector g0 = random_unit_vector(n, rng);
  return {std::move(g0), SpdMatrix(std::move(H))};
}

// ---------------------------------------------------------------------------
// Instance specifications

/**
 * A named instance family with parameters and a seed. Families and their
 * parameters:
 *   simplex     eps
 *   ellipsoid   exponents (list of integers), d
 *   failure-r2  (none)
 *   maxquad     n, m
 *   unitball    n, h0 (wishart | lognormal | identity)
 *   segment     c, d (vectors)
 *   quad        n, cond (cond = 0 or R = "random" for a Gaussian factor)
 *   points      p (list of vectors)
 *   norm        n
 */
struct InstanceSpec {
  std::string family;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t seed = 0;

  bool operator==(const InstanceSpec& other) const {
    return family == other.family && params == other.params && seed == other.seed;
  }
};

inline const std::vector<std::string>& known_families() {
  static const std::vector<std::string> names = {"simplex", "ellipsoid", "failure-r2", "maxquad", "unitball",
                                                 "segment", "quad",      "points",     "norm"};
  return names;
}

inline nlohmann::json to_json(const InstanceSpec& spec) {
  return {{"family", spec.family}, {"params", spec.params}, {"seed", spec.seed}};
}

inline void check_family(const std::string& family) {
  for (const auto& name : known_families())
    if (name == family) return;
  throw Error(ErrorKind::InvalidArgument, "unknown instance family '" + family + "'");
}

inline InstanceSpec instance_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw Error(ErrorKind::InvalidArgument, "instance JSON needs a string 'family'");
  InstanceSpec spec;
  spec.family = j["family"].get<std::string>();
  check_family(spec.family);
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw Error(ErrorKind::InvalidArgument, "'params' must be an object");
    spec.params = j["params"];
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw Error(ErrorKind::InvalidArgument, "'seed' must be an integer");
    spec.seed = j["seed"].get<std::uint64_t>();
  }
  return spec;
}

namespace detail {

inline nlohmann::json parse_scalar(const std::string& text) {
  if (text.empty()) return text;
  try {
    std::size_t used = 0;
    if (text.find_first_of(".eEnN") == std::string::npos) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return v;
    }
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  return text;
}

}  // namespace detail

/**
 * Parses "family:key=value,..." or "@file.json". Tokens are separated by
 * ',' or ';'; a token without '=' extends the value list of the previous
 * key, and repeating a key collects its lists into a list of lists.
 * The key "seed" sets the seed.
 */
inline InstanceSpec parse_instance(const std::string& text) {
  if (!text.empty() && text.front() == '@') {
    std::ifstream in(text.substr(1));
    if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open instance file '" + text.substr(1) + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidArgument, std::string("bad instance JSON: ") + e.what());
    }
    return instance_from_json(j);
  }
  InstanceSpec spec;
  const auto colon = text.find(':');
  spec.family = text.substr(0, colon);
  check_family(spec.family);
  if (colon == std::string::npos) return spec;

  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
  std::string token;
  std::vector<std::string> tokens;
  for (char ch : text.substr(colon + 1)) {
    if (ch == ',' || ch == ';') {
      tokens.push_back(token);
      token.clear();
    } else {
      token += ch;
    }
  }
  tokens.push_back(token);
  for (const auto& tok : tokens) {
    if (tok.empty()) continue;
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      if (entries.empty()) throw Error(ErrorKind::InvalidArgument, "value '" + tok + "' has no key");
      entries.back().second.push_back(tok);
    } else {
      entries.push_back({tok.substr(0, eq), {tok.substr(eq + 1)}});
    }
  }
  for (const auto& [key, values] : entries) {
    nlohmann::json value;
    if (values.size() == 1) {
      value = detail::parse_scalar(values.front());
    } else {
      value = nlohmann::json::array();
      for (const auto& v : values) value.push_back(detail::parse_scalar(v));
    }
    if (key == "seed") {
      if (!value.is_number_integer() || value.get<long long>() < 0)
        throw Error(ErrorKind::InvalidArgument, "seed must be a nonnegative integer");
      spec.seed = value.get<std::uint64_t>();
      continue;
    }
    if (!spec.params.contains(key)) {
      spec.params[key] = value;
    } else {
      nlohmann::json& slot = spec.params[key];
      const bool nested = slot.is_array() && !slot.empty() && slot.front().is_array();
      if (!nested) slot = nlohmann::json::array({slot});
      slot.push_back(value);
    }
  }
  return spec;
}

namespace detail {

inline const nlohmann::json& require(const InstanceSpec& spec, const std::string& key) {
  if (!spec.params.contains(key))
    throw Error(ErrorKind::InvalidArgument, spec.family + " instance needs parameter '" + key + "'");
  return spec.params.at(key);
}

inline double number(const InstanceSpec& spec, const std::string& key, double fallback) {
  if (!spec.params.contains(key)) return fallback;
  const auto& v = spec.params.at(key);
  if (!v.is_number()) throw Error(ErrorKind::InvalidArgument, "parameter '" + key + "' must be a number");
  return v.get<double>();
}

inline Index count(const InstanceSpec& spec, const std::string& key, Index fallback) {
  const double v = number(spec, key, static_cast<double>(fallback));
  if (!(v >= 1.0) || v != std::floor(v))
    throw Error(ErrorKind::InvalidArgument, "parameter '" + key + "' must be a positive integer");
  return static_cast<Index>(v);
}

inline Vector to_vector(const nlohmann::json& j, const std::string& what) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::InvalidArgument, what + " must be a list of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::InvalidArgument, what + " must be a list of numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace detail

/// The finite point set of a simplex, points or segment instance.
inline FiniteSetOracle instance_points(const InstanceSpec& spec) {
  if (spec.family == "simplex") return gen_simplex(detail::number(spec, "eps", 1e-3));
  if (spec.family == "segment") {
    return FiniteSetOracle({detail::to_vector(detail::require(spec, "c"), "c"),
                            detail::to_vector(detail::require(spec, "d"), "d")});
  }
  if (spec.family == "points") {
    const auto& list = detail::require(spec, "p");
    std::vector<Vector> points;
    if (list.is_array() && !list.empty() && list.front().is_array()) {
      for (const auto& item : list) points.push_back(detail::to_vector(item, "p"));
    } else {
      points.push_back(detail::to_vector(list, "p"));
    }
    return FiniteSetOracle(std::move(points));
  }
  throw Error(ErrorKind::InvalidArgument, "instance family '" + spec.family + "' is not a finite point set");
}

inline EllipsoidInstance instance_ellipsoid(const InstanceSpec& spec) {
  if (spec.family == "failure-r2") return failure_instance();
  if (spec.family != "ellipsoid")
    throw Error(ErrorKind::InvalidArgument, "instance family '" + spec.family + "' is not an ellipsoid");
  std::vector<int> exponents = {0, 1, 2, 3, 4};
  if (spec.params.contains("exponents")) {
    const Vector e = detail::to_vector(spec.params.at("exponents"), "exponents");
    exponents.clear();
    for (Index i = 0; i < e.size(); ++i) exponents.push_back(static_cast<int>(std::lround(e(i))));
  }
  return gen_ellipsoid(exponents, detail::number(spec, "d", 0.1), spec.seed);
}

inline UnitBallInstance instance_unit_ball(const InstanceSpec& spec) {
  if (spec.family != "unitball")
    throw Error(ErrorKind::InvalidArgument, "instance family '" + spec.family + "' is not a unit-ball start");
  const std::string h0 = spec.params.contains("h0") ? spec.params.at("h0").get<std::string>() : "wishart";
  return gen_unit_ball(detail::count(spec, "n", 5), spec.seed, parse_unit_ball_start(h0));
}

inline MaxQuadSubdiff instance_max_quadratics(const InstanceSpec& spec) {
  if (spec.family != "maxquad")
    throw Error(ErrorKind::InvalidArgument, "instance family '" + spec.family + "' is not a max of quadratics");
  return gen_max_quadratics(detail::count(spec, "n", 5), detail::count(spec, "m", 4), spec.seed);
}

inline Matrix instance_quadratic_factor(const InstanceSpec& spec) {
  if (spec.family != "quad")
    throw Error(ErrorKind::InvalidArgument, "instance family '" + spec.family + "' is not a quadratic");
  double cond = detail::number(spec, "cond", 0.0);
  if (spec.params.contains("R")) {
    const auto& r = spec.params.at("R");
    if (!r.is_string() || r.get<std::string>() != "random")
      throw Error(ErrorKind::InvalidArgument, "R must be 'random'");
    cond = 0.0;
  }
  return gen_quadratic_factor(detail::count(spec, "n", 5), cond, spec.seed);
}

}  // namespace rescale

#endif  // RESCALE_INSTANCES_HPP
