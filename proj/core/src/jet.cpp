#include "fracstep/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace fracstep::ad {

// Monomials are stored graded by total degree; within a degree they are in
// lexicographic order with the first variable's exponent descending, so the
// degree-1 block is e_0, e_1, ..., e_{m-1} and every lower-degree jet is a
// prefix of a higher-degree one.
class JetShape {
public:
  struct Triple {
    std::uint32_t i;
    std::uint32_t j;
    std::uint32_t k;
  };
  struct DerivEntry {
    std::uint32_t src;
    double factor;
  };

  JetShape(int nvars, int degree, const JetShape* lower);

  static const JetShape* get(int nvars, int degree);
  static const JetShape* scalar();

  int nvars;
  int degree;
  std::size_t size = 0;
  std::vector<std::size_t> offsets;  // offsets[d] = first monomial of degree d
  std::vector<std::uint8_t> exps;    // size * nvars
  std::vector<Triple> triples;
  std::vector<std::vector<DerivEntry>> deriv;  // per variable, per result monomial
  const JetShape* lower;

  [[nodiscard]] const JetShape* at_degree(int d) const {
    const JetShape* s = this;
    while (s->degree > d) s = s->lower;
    return s;
  }
};

namespace {

void enumerate(int nvars, int remaining, int var, std::vector<std::uint8_t>& cur, std::vector<std::uint8_t>& out) {
  if (var == nvars - 1) {
    cur[var] = static_cast<std::uint8_t>(remaining);
    out.insert(out.end(), cur.begin(), cur.end());
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[var] = static_cast<std::uint8_t>(e);
    enumerate(nvars, remaining - e, var + 1, cur, out);
  }
}

}  // namespace

JetShape::JetShape(int nv, int deg, const JetShape* low) : nvars(nv), degree(deg), lower(low) {
  if (nvars == 0) {
    size = 1;
    offsets = {0, 1};
    return;
  }
  std::vector<std::uint8_t> cur(nvars, 0);
  for (int d = 0; d <= degree; ++d) {
    offsets.push_back(exps.size() / nvars);
    enumerate(nvars, d, 0, cur, exps);
  }
  size = exps.size() / nvars;
  offsets.push_back(size);

  std::map<std::vector<std::uint8_t>, std::uint32_t> index;
  auto monomial = [&](std::size_t m) {
    return std::vector<std::uint8_t>(exps.begin() + m * nvars, exps.begin() + (m + 1) * nvars);
  };
  for (std::size_t m = 0; m < size; ++m) index.emplace(monomial(m), static_cast<std::uint32_t>(m));

  auto deg_of = [&](std::size_t m) {
    return static_cast<int>(std::upper_bound(offsets.begin(), offsets.end(), m) - offsets.begin()) - 1;
  };
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      if (deg_of(i) + deg_of(j) > degree) continue;
      std::vector<std::uint8_t> e(nvars);
      for (int v = 0; v < nvars; ++v) e[v] = exps[i * nvars + v] + exps[j * nvars + v];
      triples.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), index.at(e)});
    }
  }

  if (degree > 0) {
    const std::size_t out_size = offsets[degree];
    deriv.resize(nvars);
    for (int v = 0; v < nvars; ++v) {
      deriv[v].resize(out_size);
      for (std::size_t r = 0; r < out_size; ++r) {
        std::vector<std::uint8_t> e = monomial(r);
        const double factor = e[v] + 1.0;
        e[v] += 1;
        deriv[v][r] = {index.at(e), factor};
      }
    }
  }
}

const JetShape* JetShape::scalar() {
  static const JetShape s(0, 0, nullptr);
  return &s;
}

const JetShape* JetShape::get(int nvars, int degree) {
  if (nvars < 0 || degree < 0) throw std::invalid_argument("Jet: nvars and degree must be non-negative");
  if (nvars == 0) return scalar();
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<JetShape>> registry;
  std::lock_guard lock(mutex);
  const JetShape* lower = nullptr;
  for (int d = 0; d <= degree; ++d) {
    auto& slot = registry[{nvars, d}];
    if (!slot) slot = std::make_unique<JetShape>(nvars, d, lower);
    lower = slot.get();
  }
  return lower;
}

Jet::Jet(double c) : shape_(JetShape::scalar()), coeffs_(1, c) {}

Jet Jet::constant(int nvars, int degree, double c) {
  const JetShape* s = JetShape::get(nvars, degree);
  Storage st(s->size, 0.0);
  st[0] = c;
  return Jet(s, std::move(st));
}

Jet Jet::variable(int nvars, int degree, int index, double value) {
  if (index < 0 || index >= nvars) throw std::out_of_range("Jet::variable: index out of range");
  Jet j = constant(nvars, degree, value);
  if (degree > 0) j.coeffs_[1 + index] = 1.0;
  return j;
}

int Jet::nvars() const noexcept { return shape_->nvars; }
int Jet::degree() const noexcept { return shape_->degree; }

double Jet::partial(int index) const {
  if (index < 0 || index >= nvars()) throw std::out_of_range("Jet::partial: index out of range");
  return degree() >= 1 ? coeffs_[1 + index] : 0.0;
}

Jet Jet::derivative(int index) const {
  if (index < 0 || index >= nvars()) throw std::out_of_range("Jet::derivative: index out of range");
  if (degree() == 0) throw std::logic_error("Jet::derivative: degree-0 jet has no derivative information");
  const auto& table = shape_->deriv[index];
  Storage out(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) out[r] = table[r].factor * coeffs_[table[r].src];
  return Jet(shape_->lower, std::move(out));
}

Jet Jet::truncated(int d) const {
  if (is_scalar() || d >= degree()) return *this;
  if (d < 0) throw std::invalid_argument("Jet::truncated: negative degree");
  const JetShape* s = shape_->at_degree(d);
  return Jet(s, Storage(coeffs_.begin(), coeffs_.begin() + static_cast<std::ptrdiff_t>(s->size)));
}

double Jet::coefficient(std::span<const int> exponents) const {
  if (is_scalar()) return std::all_of(exponents.begin(), exponents.end(), [](int e) { return e == 0; }) ? coeffs_[0] : 0.0;
  if (static_cast<int>(exponents.size()) != nvars()) throw std::invalid_argument("Jet::coefficient: wrong arity");
  int total = 0;
  for (int e : exponents) total += e;
  if (total > degree()) return 0.0;
  const auto n = static_cast<std::size_t>(nvars());
  for (std::size_t m = shape_->offsets[total]; m < shape_->offsets[total + 1]; ++m) {
    bool match = true;
    for (std::size_t v = 0; v < n && match; ++v) match = shape_->exps[m * n + v] == exponents[v];
    if (match) return coeffs_[m];
  }
  return 0.0;
}

namespace {

void check_compatible(const Jet& a, const Jet& b) {
  if (a.nvars() != b.nvars()) throw std::invalid_argument("Jet: operands have different variable counts");
}

}  // namespace

Jet& Jet::operator+=(const Jet& rhs) {
  if (rhs.is_scalar()) return *this += rhs.value();
  if (is_scalar()) return *this = rhs + value();
  check_compatible(*this, rhs);
  if (rhs.degree() < degree()) *this = truncated(rhs.degree());
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += rhs.coeffs_[i];
  return *this;
}

Jet& Jet::operator-=(const Jet& rhs) {
  if (rhs.is_scalar()) return *this -= rhs.value();
  if (is_scalar()) return *this = value() - rhs;
  check_compatible(*this, rhs);
  if (rhs.degree() < degree()) *this = truncated(rhs.degree());
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= rhs.coeffs_[i];
  return *this;
}

Jet& Jet::operator*=(double rhs) {
  for (double& c : coeffs_) c *= rhs;
  return *this;
}

Jet& Jet::operator*=(const Jet& rhs) { return *this = *this * rhs; }
Jet& Jet::operator/=(const Jet& rhs) { return *this = *this / rhs; }

Jet operator-(Jet a) {
  for (double& c : a.coeffs_) c = -c;
  return a;
}

Jet operator*(const Jet& a, const Jet& b) {
  if (a.is_scalar()) return b * a.value();
  if (b.is_scalar()) return a * b.value();
  check_compatible(a, b);
  const JetShape* s = a.degree() <= b.degree() ? a.shape_ : b.shape_;
  Jet::Storage out(s->size, 0.0);
  for (const auto& t : s->triples) out[t.k] += a.coeffs_[t.i] * b.coeffs_[t.j];
  return Jet(s, std::move(out));
}

Jet operator/(const Jet& a, const Jet& b) {
  if (b.is_scalar()) return a / b.value();
  return a * reciprocal(b);
}

Jet operator/(double a, const Jet& b) { return reciprocal(b) * a; }

Jet compose(const Jet& a, std::span<const double> derivs) {
  const int k_max = a.degree();
  if (static_cast<int>(derivs.size()) < k_max + 1) throw std::invalid_argument("compose: not enough derivatives");
  if (k_max == 0) return Jet(a.shape_, Jet::Storage(1, derivs[0]));
  Jet delta = a;
  delta.coeffs_[0] = 0.0;
  double fact = 1.0;
  for (int k = 2; k <= k_max; ++k) fact *= k;
  Jet result = Jet::constant(a.nvars(), k_max, derivs[k_max] / fact);
  for (int k = k_max - 1; k >= 0; --k) {
    fact /= (k + 1);
    result = result * delta;
    result.coeffs_[0] += derivs[k] / fact;
  }
  return result;
}

Jet reciprocal(const Jet& a) {
  const double x = a.value();
  if (x == 0.0) throw std::domain_error("Jet reciprocal of zero");
  std::vector<double> d(a.degree() + 1);
  double v = 1.0 / x;
  for (int k = 0; k <= a.degree(); ++k) {
    d[k] = v;
    v *= -(k + 1) / x;
  }
  return compose(a, d);
}

Jet sqrt(const Jet& a) {
  const double x = a.value();
  if (!(x > 0.0) && a.degree() > 0) throw std::domain_error("Jet sqrt needs a positive value");
  std::vector<double> d(a.degree() + 1);
  double c = 1.0;
  for (int k = 0; k <= a.degree(); ++k) {
    d[k] = c * std::pow(x, 0.5 - k);
    c *= 0.5 - k;
  }
  return compose(a, d);
}

Jet exp(const Jet& a) {
  std::vector<double> d(a.degree() + 1, std::exp(a.value()));
  return compose(a, d);
}

Jet sin(const Jet& a) {
  const double s = std::sin(a.value());
  const double c = std::cos(a.value());
  const double cycle[4] = {s, c, -s, -c};
  std::vector<double> d(a.degree() + 1);
  for (int k = 0; k <= a.degree(); ++k) d[k] = cycle[k % 4];
  return compose(a, d);
}

Jet cos(const Jet& a) {
  const double s = std::sin(a.value());
  const double c = std::cos(a.value());
  const double cycle[4] = {c, -s, -c, s};
  std::vector<double> d(a.degree() + 1);
  for (int k = 0; k <= a.degree(); ++k) d[k] = cycle[k % 4];
  return compose(a, d);
}

Jet pow(const Jet& a, int k) {
  if (k < 0) return reciprocal(pow(a, -k));
  Jet result = Jet::constant(a.nvars(), a.degree(), 1.0);
  if (a.is_scalar()) return Jet(std::pow(a.value(), k));
  Jet base = a;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

}  // namespace fracstep::ad
