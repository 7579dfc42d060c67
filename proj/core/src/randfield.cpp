#include "sgfem/randfield.hpp"

#include "sgfem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sgfem::randfield {

using polychaos::IndexSet;
using polychaos::MultiIndex;

FieldTerm FieldTerm::constant(double c) {
    return {[c](Point) { return c; }, [](Point) { return Vec2{}; }};
}

AffineField::AffineField(Rect domain, FieldTerm mean, std::vector<FieldTerm> modes)
    : domain_(domain), mean_(std::move(mean)), modes_(std::move(modes)) {}

double AffineField::value(Point x, std::span<const double> y) const {
    if (y.size() != modes_.size()) throw std::invalid_argument("AffineField::value: parameter length differs from M");
    double a = mean_.value(x);
    for (std::size_t m = 0; m < modes_.size(); ++m) a += modes_[m].value(x) * y[m];
    return a;
}

// ---------------------------------------------------------------------------
// Karhunen-Loeve

double KLEigenpair::value(double t) const {
    const double s = t - center;
    const double L = half_length;
    if (kind == Parity::Even)
        return std::cos(omega * s) / std::sqrt(L + std::sin(2.0 * omega * L) / (2.0 * omega));
    return std::sin(omega * s) / std::sqrt(L - std::sin(2.0 * omega * L) / (2.0 * omega));
}

double KLEigenpair::derivative(double t) const {
    const double s = t - center;
    const double L = half_length;
    if (kind == Parity::Even)
        return -omega * std::sin(omega * s) / std::sqrt(L + std::sin(2.0 * omega * L) / (2.0 * omega));
    return omega * std::cos(omega * s) / std::sqrt(L - std::sin(2.0 * omega * L) / (2.0 * omega));
}

namespace {

// f(lo) and f(hi) have opposite signs; midpoints only, so tan poles at the
// bracket ends are never evaluated.
template <class F>
double bisect(F&& f, double lo, double hi) {
    double flo = f(lo + 1e-12 * (hi - lo));
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

std::vector<KLEigenpair> kl_eigenpairs_1d(double ell, double center, double half_length, std::size_t count,
                                          int direction) {
    if (!(ell > 0.0) || !(half_length > 0.0)) throw std::invalid_argument("kl_eigenpairs_1d: non-positive length");
    const double c = 1.0 / ell;
    const double L = half_length;
    const double pi = std::numbers::pi;
    std::vector<KLEigenpair> out;
    out.reserve(count);
    // Roots alternate even/odd with omega*L in ((j-1) pi/2, j pi/2), j = 1, 2, ...
    for (std::size_t j = 1; out.size() < count; ++j) {
        const double lo = (static_cast<double>(j) - 1.0) * 0.5 * pi / L;
        const double hi = static_cast<double>(j) * 0.5 * pi / L;
        KLEigenpair e;
        if (j % 2 == 1) {
            e.kind = Parity::Even;
            e.omega = bisect([&](double w) { return c - w * std::tan(w * L); }, lo, hi);
        } else {
            e.kind = Parity::Odd;
            e.omega = bisect([&](double w) { return c * std::tan(w * L) + w; }, lo, hi);
        }
        const double fe = e.kind == Parity::Even ? c - e.omega * std::tan(e.omega * L)
                                                 : c * std::tan(e.omega * L) + e.omega;
        if (!std::isfinite(fe) || std::abs(fe) > 1e-6 * (1.0 + std::abs(c) + e.omega))
            throw NumericalError("kl_eigenpairs_1d: root bracketing failed");
        e.lambda = 2.0 * c / (e.omega * e.omega + c * c);
        e.direction = direction;
        e.index = static_cast<int>(out.size());
        e.center = center;
        e.half_length = L;
        out.push_back(e);
    }
    return out;
}

std::vector<KLMode> kl_modes_2d(double sigma, double ell1, double ell2, std::size_t M, const Rect& domain) {
    if (M == 0) throw std::invalid_argument("kl_modes_2d: M must be positive");
    const double half = 0.5 * domain.side;
    const auto e1 = kl_eigenpairs_1d(ell1, domain.x0 + half, half, M, 1);
    const auto e2 = kl_eigenpairs_1d(ell2, domain.y0 + half, half, M, 2);
    std::vector<KLMode> all;
    all.reserve(M * M);
    for (const auto& a : e1)
        for (const auto& b : e2) all.push_back({sigma * sigma * (a.lambda * b.lambda), a, b});
    std::stable_sort(all.begin(), all.end(), [](const KLMode& p, const KLMode& q) {
        if (p.lambda != q.lambda) return p.lambda > q.lambda;
        if (p.first.index != q.first.index) return p.first.index < q.first.index;
        return p.second.index < q.second.index;
    });
    all.resize(M);
    return all;
}

AffineField kl_field(double sigma, double ell1, double ell2, std::size_t M, const Rect& domain) {
    std::vector<FieldTerm> modes;
    for (const auto& mode : kl_modes_2d(sigma, ell1, ell2, M, domain)) {
        const double s = std::sqrt(mode.lambda);
        const KLEigenpair p = mode.first;
        const KLEigenpair q = mode.second;
        modes.push_back({[s, p, q](Point x) { return s * p.value(x.x) * q.value(x.y); },
                         [s, p, q](Point x) {
                             return Vec2{s * p.derivative(x.x) * q.value(x.y), s * p.value(x.x) * q.derivative(x.y)};
                         }});
    }
    return AffineField(domain, FieldTerm::constant(1.0), std::move(modes));
}

// ---------------------------------------------------------------------------
// Cosine family

std::pair<int, int> cosine_frequencies(int m) {
    if (m < 1) throw std::invalid_argument("cosine_frequencies: m must be >= 1");
    int k = static_cast<int>(std::floor(-0.5 + std::sqrt(0.25 + 2.0 * m)));
    while (k * (k + 1) / 2 > m) --k;
    while ((k + 1) * (k + 2) / 2 <= m) ++k;
    const int beta1 = m - k * (k + 1) / 2;
    return {beta1, k - beta1};
}

AffineField cosine_field(double alpha_bar, double sigma_tilde, std::size_t M) {
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<FieldTerm> modes;
    for (std::size_t m = 1; m <= M; ++m) {
        const auto [b1, b2] = cosine_frequencies(static_cast<int>(m));
        const double amp = alpha_bar * std::pow(static_cast<double>(m), -sigma_tilde);
        const double w1 = two_pi * b1;
        const double w2 = two_pi * b2;
        modes.push_back({[amp, w1, w2](Point x) { return amp * std::cos(w1 * x.x) * std::cos(w2 * x.y); },
                         [amp, w1, w2](Point x) {
                             return Vec2{-amp * w1 * std::sin(w1 * x.x) * std::cos(w2 * x.y),
                                         -amp * w2 * std::cos(w1 * x.x) * std::sin(w2 * x.y)};
                         }});
    }
    return AffineField(Rect::unit(), FieldTerm::constant(1.0), std::move(modes));
}

// ---------------------------------------------------------------------------
// CoefficientModel

std::string to_string(Nonlinearity kind) { return kind == Nonlinearity::Exp ? "exp" : "square"; }

CoefficientModel::CoefficientModel(Nonlinearity kind, std::shared_ptr<const AffineField> field,
                                   std::shared_ptr<const polychaos::UnivariateBasis> basis, int quad_extra)
    : kind_(kind), field_(std::move(field)), basis_(std::move(basis)), quad_extra_(quad_extra) {
    if (!field_ || !basis_) throw std::invalid_argument("CoefficientModel: null field or basis");
    if (quad_extra_ < 1) throw std::invalid_argument("CoefficientModel: quad_extra must be positive");
    const int nm = basis_->n_max();
    const std::size_t stride = static_cast<std::size_t>(nm) + 1;
    rule_pvals_.resize(static_cast<std::size_t>(nm));
    for (int r = 1; r <= nm; ++r) {
        const auto& rule = basis_->rule(static_cast<std::size_t>(r));
        auto& tab = rule_pvals_[static_cast<std::size_t>(r - 1)];
        tab.assign(rule.size() * stride, 0.0);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const auto p = basis_->evaluate_all(rule.nodes[q], nm);
            std::copy(p.begin(), p.end(), tab.begin() + static_cast<std::ptrdiff_t>(q * stride));
        }
    }
    // int y^k P_n p dy; orthogonality and parity zeros are set exactly.
    const auto& rule = basis_->rule(std::min<std::size_t>(4, static_cast<std::size_t>(nm)));
    for (int k = 0; k <= 2; ++k) {
        for (int n = 0; n <= std::min(2, nm); ++n) {
            if (n > k || (n + k) % 2 == 1) continue;
            double s = 0.0;
            for (std::size_t q = 0; q < rule.size(); ++q)
                s += rule.weights[q] * std::pow(rule.nodes[q], k) * basis_->evaluate(n, rule.nodes[q]);
            moments_[k][n] = s;
        }
    }
    moments_[0][0] = 1.0;
}

IndexSet CoefficientModel::support() const {
    if (kind_ == Nonlinearity::Square) return polychaos::complete_set(num_params(), 2);
    return IndexSet(num_params());
}

IndexSet CoefficientModel::restrict_to_support(const IndexSet& gammas) const {
    if (kind_ == Nonlinearity::Exp) return gammas;
    std::vector<MultiIndex> out;
    for (const auto& g : gammas)
        if (g.total_degree() <= 2) out.push_back(g);
    return IndexSet(gammas.num_params(), std::move(out));
}

double CoefficientModel::T(Point x, std::span<const double> y) const {
    const double a = field_->value(x, y);
    return kind_ == Nonlinearity::Exp ? std::exp(a) : a * a;
}

CoefficientModel::ModeData CoefficientModel::sample_modes(Point x) const {
    ModeData md;
    md.a0 = field_->mean().value(x);
    md.g0 = field_->mean().gradient(x);
    const std::size_t M = num_params();
    md.a.resize(M);
    md.g.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        md.a[m] = field_->mode(m).value(x);
        md.g[m] = field_->mode(m).gradient(x);
    }
    return md;
}

double CoefficientModel::t_gamma(const MultiIndex& gamma, Point x) const {
    double v = 0.0;
    evaluate(x, std::span<const MultiIndex>(&gamma, 1), std::span<double>(&v, 1), {});
    return v;
}

Vec2 CoefficientModel::grad_t_gamma(const MultiIndex& gamma, Point x) const {
    double v = 0.0;
    Vec2 g;
    evaluate(x, std::span<const MultiIndex>(&gamma, 1), std::span<double>(&v, 1), std::span<Vec2>(&g, 1));
    return g;
}

void CoefficientModel::evaluate(Point x, std::span<const MultiIndex> gammas, std::span<double> values,
                                std::span<Vec2> grads) const {
    if (values.size() != gammas.size() || (!grads.empty() && grads.size() != gammas.size()))
        throw std::invalid_argument("CoefficientModel::evaluate: output size mismatch");
    for (const auto& g : gammas)
        if (g.size() != num_params()) throw std::invalid_argument("CoefficientModel::evaluate: gamma length differs from M");
    const ModeData md = sample_modes(x);
    if (kind_ == Nonlinearity::Square) {
        evaluate_square(md, gammas, values, grads);
        return;
    }
    int maxdeg = 0;
    for (const auto& g : gammas) maxdeg = std::max(maxdeg, g.max_degree());
    evaluate_exp(md, maxdeg + quad_extra_, gammas, values, grads);
}

void CoefficientModel::evaluate_exp(const ModeData& md, int rule_size, std::span<const MultiIndex> gammas,
                                    std::span<double> values, std::span<Vec2> grads) const {
    const int nm = basis_->n_max();
    if (rule_size > nm)
        throw NumericalError("t_gamma: degree exceeds the parameter quadrature capacity (n_max = " +
                             std::to_string(nm) + ")");
    const auto& rule = basis_->rule(static_cast<std::size_t>(rule_size));
    const auto& pv = rule_pvals_[static_cast<std::size_t>(rule_size - 1)];
    const std::size_t stride = static_cast<std::size_t>(nm) + 1;
    const std::size_t M = num_params();
    const std::size_t nd = static_cast<std::size_t>(rule_size - quad_extra_) + 1;

    // I[m][n] = int exp(a_m y) P_n p dy, J[m][n] = int y exp(a_m y) P_n p dy.
    std::vector<double> I(M * nd, 0.0), J(M * nd, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const double e = rule.weights[q] * std::exp(md.a[m] * rule.nodes[q]);
            const double* p = pv.data() + q * stride;
            for (std::size_t n = 0; n < nd; ++n) {
                I[m * nd + n] += e * p[n];
                J[m * nd + n] += e * rule.nodes[q] * p[n];
            }
        }
    }
    const double e0 = std::exp(md.a0);
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        const auto& g = gammas[i];
        double prod = 1.0;
        for (std::size_t m = 0; m < M; ++m) prod *= I[m * nd + static_cast<std::size_t>(g[m])];
        values[i] = e0 * prod;
        if (grads.empty()) continue;
        Vec2 grad = prod * md.g0;
        for (std::size_t m = 0; m < M; ++m) {
            double others = 1.0;
            for (std::size_t k = 0; k < M; ++k)
                if (k != m) others *= I[k * nd + static_cast<std::size_t>(g[k])];
            grad += (J[m * nd + static_cast<std::size_t>(g[m])] * others) * md.g[m];
        }
        grads[i] = e0 * grad;
    }
}

void CoefficientModel::evaluate_square(const ModeData& md, std::span<const MultiIndex> gammas,
                                       std::span<double> values, std::span<Vec2> grads) const {
    const std::size_t M = num_params();
    const auto mu = [this](int k, int n) { return moments_[k][n]; };
    const double a0 = md.a0;
    const Vec2 g0 = md.g0;
    const auto& a = md.a;
    const auto& g = md.g;

    for (std::size_t i = 0; i < gammas.size(); ++i) {
        const auto& gm = gammas[i];
        const int deg = gm.total_degree();
        const std::size_t nnz = gm.support_size();
        double v = 0.0;
        Vec2 d;
        if (M == 1) {
            const int n = gm[0];
            if (n <= 2) {
                v = a0 * a0 * mu(0, n) + 2.0 * a0 * a[0] * mu(1, n) + a[0] * a[0] * mu(2, n);
                d = (2.0 * a0 * mu(0, n) + 2.0 * a[0] * mu(1, n)) * g0 +
                    (2.0 * a0 * mu(1, n) + 2.0 * a[0] * mu(2, n)) * g[0];
            }
        } else if (deg == 0) {
            v = a0 * a0;
            d = (2.0 * a0) * g0;
            for (std::size_t m = 0; m < M; ++m) {
                v += 2.0 * a0 * a[m] * mu(1, 0) + a[m] * a[m] * mu(2, 0);
                d += (2.0 * a[m] * mu(1, 0)) * g0 + (2.0 * a0 * mu(1, 0) + 2.0 * a[m] * mu(2, 0)) * g[m];
                for (std::size_t n = 0; n < m; ++n) {
                    v += 2.0 * a[m] * a[n] * mu(1, 0) * mu(1, 0);
                    d += (2.0 * mu(1, 0) * mu(1, 0)) * (a[n] * g[m] + a[m] * g[n]);
                }
            }
        } else if (deg == 1) {
            std::size_t j = 0;
            while (gm[j] == 0) ++j;
            v = 2.0 * a0 * a[j] * mu(1, 1) + a[j] * a[j] * mu(2, 1);
            d = (2.0 * a[j] * mu(1, 1)) * g0 + (2.0 * a0 * mu(1, 1) + 2.0 * a[j] * mu(2, 1)) * g[j];
            for (std::size_t n = 0; n < M; ++n) {
                if (n == j) continue;
                const double c = 2.0 * mu(1, 1) * mu(1, 0);
                v += c * a[j] * a[n];
                d += c * (a[n] * g[j] + a[j] * g[n]);
            }
        } else if (deg == 2 && nnz == 1) {
            std::size_t j = 0;
            while (gm[j] == 0) ++j;
            v = a[j] * a[j] * mu(2, 2);
            d = (2.0 * a[j] * mu(2, 2)) * g[j];
        } else if (deg == 2 && nnz == 2) {
            std::size_t j = 0;
            while (gm[j] == 0) ++j;
            std::size_t k = j + 1;
            while (gm[k] == 0) ++k;
            const double c = 2.0 * mu(1, 1) * mu(1, 1);
            v = c * a[j] * a[k];
            d = c * (a[k] * g[j] + a[j] * g[k]);
        }
        values[i] = v;
        if (!grads.empty()) grads[i] = d;
    }
}

CoefficientRange sample_coefficient_range(const CoefficientModel& model, int grid_points) {
    const Rect& D = model.field().domain();
    const std::size_t M = model.num_params();
    std::size_t combos = 1;
    for (std::size_t m = 0; m < M; ++m) combos *= 3;
    CoefficientRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    std::vector<double> y(M);
    for (int i = 0; i < grid_points; ++i) {
        for (int j = 0; j < grid_points; ++j) {
            const Point x{D.x0 + D.side * i / (grid_points - 1), D.y0 + D.side * j / (grid_points - 1)};
            for (std::size_t c = 0; c < combos; ++c) {
                std::size_t code = c;
                for (std::size_t m = 0; m < M; ++m) {
                    y[m] = static_cast<double>(code % 3) - 1.0;
                    code /= 3;
                }
                const double t = model.T(x, y);
                r.min = std::min(r.min, t);
                r.max = std::max(r.max, t);
            }
        }
    }
    return r;
}

} // namespace sgfem::randfield
