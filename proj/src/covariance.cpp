#include "critpoint/covariance.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "critpoint/errors.hpp"

namespace critpoint {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void require_positive_moments(const SpectralMoments& m) {
  const double v[] = {m.l2, m.l4, m.l6, m.l8};
  for (int n = 0; n < 4; ++n)
    if (!(v[n] > 0.0) || !std::isfinite(v[n]))
      throw PreconditionError("invalid covariance model: lambda_" + std::to_string(2 * n + 2) +
                              " must be positive and finite");
}

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw PreconditionError("cannot parse " + std::string(what) + " value '" + std::string(text) +
                            "'");
  return v;
}

std::map<std::string, double> parse_params(std::string_view body) {
  std::map<std::string, double> out;
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto item = body.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw PreconditionError("model parameter '" + std::string(item) + "' lacks '='");
    const std::string key(item.substr(0, eq));
    if (out.count(key)) throw PreconditionError("duplicate model parameter '" + key + "'");
    out[key] = parse_number(item.substr(eq + 1), key);
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

double SpectralMoments::operator[](int n) const {
  switch (n) {
    case 0: return 1.0;
    case 1: return l2;
    case 2: return l4;
    case 3: return l6;
    case 4: return l8;
    default: throw PreconditionError("spectral moment order must be 0..4");
  }
}

CovarianceModel CovarianceModel::gaussian(double a) {
  if (!(a > 0.0) || !std::isfinite(a))
    throw PreconditionError("gaussian model needs a > 0");
  const long double al = a;
  std::ostringstream name;
  name.precision(17);
  name << "gaussian:a=" << a;
  return analytic(name.str(), [al](int m, long double x) {
    long double c = 1.0L;
    for (int i = 0; i < m; ++i) c *= -al;
    return c * std::exp(-al * x);
  });
}

CovarianceModel CovarianceModel::analytic(std::string name, Radial r) {
  if (!r) throw PreconditionError("analytic model needs a radial function");
  if (std::abs(static_cast<double>(r(0, 0.0L)) - 1.0) > 1e-12)
    throw PreconditionError("invalid covariance model: r(0) must equal 1");
  CovarianceModel m;
  m.name_ = std::move(name);
  m.radial_ = std::move(r);
  double v[4];
  for (int n = 1; n <= 4; ++n) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    v[n - 1] = sign * factorial(2 * n) / factorial(n) * static_cast<double>(m.radial_(n, 0.0L));
  }
  m.moments_ = {v[0], v[1], v[2], v[3]};
  require_positive_moments(m.moments_);
  return m;
}

CovarianceModel CovarianceModel::from_moments(double l2, double l4, double l6, double l8) {
  CovarianceModel m;
  m.moments_ = {l2, l4, l6, l8};
  require_positive_moments(m.moments_);
  std::ostringstream name;
  name.precision(17);
  name << "moments:l2=" << l2 << ",l4=" << l4 << ",l6=" << l6 << ",l8=" << l8;
  m.name_ = name.str();
  return m;
}

long double CovarianceModel::radial(int order, long double x) const {
  if (!radial_)
    throw PreconditionError("model '" + name_ +
                            "' carries spectral moments only; this operation needs r(x)");
  if (order < 0 || order > 4) throw PreconditionError("radial derivative order must be 0..4");
  return radial_(order, x);
}

std::string CovarianceModel::describe() const { return name_; }

CovarianceModel parse_model(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string kind(spec.substr(0, colon));
  const auto params =
      parse_params(colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1));
  auto take = [&](const std::string& key) {
    auto it = params.find(key);
    if (it == params.end())
      throw PreconditionError("model '" + kind + "' needs parameter '" + key + "'");
    return it->second;
  };
  if (kind == "gaussian") {
    for (const auto& [k, v] : params)
      if (k != "a") throw PreconditionError("unknown gaussian model parameter '" + k + "'");
    return CovarianceModel::gaussian(params.count("a") ? params.at("a") : 1.0);
  }
  if (kind == "moments") {
    for (const auto& [k, v] : params)
      if (k != "l2" && k != "l4" && k != "l6" && k != "l8")
        throw PreconditionError("unknown moments model parameter '" + k + "'");
    return CovarianceModel::from_moments(take("l2"), take("l4"), take("l6"), take("l8"));
  }
  throw PreconditionError("unknown model kind '" + kind + "' (expected gaussian or moments)");
}

double derivative_covariance(const CovarianceModel& model, std::span<const int> i,
                             std::span<const int> j) {
  if (i.size() != j.size()) throw PreconditionError("multi-index lengths differ");
  int beta_sum = 0;
  int j_sum = 0;
  double prod = 1.0;
  for (std::size_t l = 0; l < i.size(); ++l) {
    if (i[l] < 0 || j[l] < 0) throw PreconditionError("multi-index entries must be nonnegative");
    const int s = i[l] + j[l];
    if (s % 2 != 0) return 0.0;
    const int b = s / 2;
    beta_sum += b;
    j_sum += j[l];
    prod *= factorial(2 * b) / factorial(b);
  }
  if (beta_sum > 4)
    throw PreconditionError("derivative order |beta| = " + std::to_string(beta_sum) +
                            " exceeds the supported 4");
  const double sign = ((beta_sum + j_sum) % 2 == 0) ? 1.0 : -1.0;
  return sign * model.spectral_moment(beta_sum) * factorial(beta_sum) / factorial(2 * beta_sum) *
         prod;
}

ZetaBlocks zeta_block_covariances(const CovarianceModel& model, int N) {
  if (N < 2) throw PreconditionError("zeta blocks need N >= 2");
  using MI = std::vector<int>;
  auto unit = [N](std::initializer_list<std::pair<int, int>> parts) {
    MI v(static_cast<std::size_t>(N), 0);
    for (auto [axis, order] : parts) v[static_cast<std::size_t>(axis)] += order;
    return v;
  };
  auto gram = [&](const std::vector<MI>& vars) {
    const auto n = static_cast<Eigen::Index>(vars.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b)
        m(a, b) = derivative_covariance(model, vars[static_cast<std::size_t>(a)],
                                        vars[static_cast<std::size_t>(b)]);
    return m;
  };
  const int ell = 1;  // the coordinate paired with X_11l in zeta5 (0-based)

  std::vector<MI> z1, z2, z3, z4;
  for (int a = 1; a < N; ++a)
    if (a != ell) z1.push_back(unit({{a, 1}}));
  for (int a = 0; a < N; ++a)
    for (int b = a + 1; b < N; ++b) z2.push_back(unit({{a, 1}, {b, 1}}));
  z3.push_back(unit({}));
  z3.push_back(unit({{0, 4}}));
  for (int a = 0; a < N; ++a) z3.push_back(unit({{a, 2}}));
  z4.push_back(unit({{0, 1}}));
  z4.push_back(unit({{0, 3}}));
  for (int a = 1; a < N; ++a) z4.push_back(unit({{0, 1}, {a, 2}}));
  const std::vector<MI> z5{unit({{ell, 1}}), unit({{0, 2}, {ell, 1}})};

  return {gram(z1), gram(z2), gram(z3), gram(z4), gram(z5)};
}

double moment_inequality_constant(int n, int N) {
  return (2.0 * n - 1.0) / (2.0 * n - 3.0) * (2.0 * n - 4.0 + N) / (2.0 * n - 2.0 + N);
}

std::vector<MomentCheck> moment_inequality_check(const CovarianceModel& model, int N) {
  if (N < 1) throw PreconditionError("dimension must be >= 1");
  std::vector<MomentCheck> out;
  for (int n = 2; n <= 4; ++n) {
    MomentCheck c;
    c.n = n;
    c.lhs = model.spectral_moment(n) * model.spectral_moment(n - 2);
    const double prev = model.spectral_moment(n - 1);
    c.rhs = moment_inequality_constant(n, N) * prev * prev;
    c.margin = c.lhs - c.rhs;
    c.pass = c.margin > 1e-12 * c.rhs;
    out.push_back(c);
  }
  return out;
}

}  // namespace critpoint
