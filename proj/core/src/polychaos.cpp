#include "sgfem/polychaos.hpp"

#include "sgfem/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace sgfem::polychaos {

// ---------------------------------------------------------------------------
// MultiIndex / IndexSet

MultiIndex::MultiIndex(std::initializer_list<int> entries) : entries_(entries) {
    for (int e : entries_)
        if (e < 0) throw std::invalid_argument("MultiIndex: negative entry");
}

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
    for (int e : entries_)
        if (e < 0) throw std::invalid_argument("MultiIndex: negative entry");
}

MultiIndex MultiIndex::unit(std::size_t M, std::size_t m, int degree) {
    MultiIndex a(M);
    a[m] = degree;
    return a;
}

int MultiIndex::total_degree() const noexcept {
    int s = 0;
    for (int e : entries_) s += e;
    return s;
}

int MultiIndex::max_degree() const noexcept {
    int s = 0;
    for (int e : entries_) s = std::max(s, e);
    return s;
}

std::size_t MultiIndex::support_size() const noexcept {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                  [](int e) { return e != 0; }));
}

std::string MultiIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t m = 0; m < entries_.size(); ++m) os << (m ? " " : "") << entries_[m];
    os << ')';
    return os.str();
}

bool grlex_less(const MultiIndex& a, const MultiIndex& b) {
    const int da = a.total_degree();
    const int db = b.total_degree();
    if (da != db) return da < db;
    return a.entries() < b.entries();
}

std::size_t MultiIndexHash::operator()(const MultiIndex& a) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (int e : a.entries()) {
        h ^= static_cast<std::size_t>(e) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

IndexSet::IndexSet(std::size_t M, std::vector<MultiIndex> members) : M_(M), members_(std::move(members)) {
    for (const auto& a : members_)
        if (a.size() != M_) throw std::invalid_argument("IndexSet: multi-index length differs from M");
    std::sort(members_.begin(), members_.end(), grlex_less);
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
    lookup_.reserve(members_.size());
    for (std::size_t i = 0; i < members_.size(); ++i) lookup_.emplace(members_[i], i);
}

std::optional<std::size_t> IndexSet::position(const MultiIndex& a) const {
    auto it = lookup_.find(a);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

int IndexSet::max_total_degree() const noexcept {
    int d = 0;
    for (const auto& a : members_) d = std::max(d, a.total_degree());
    return d;
}

int IndexSet::max_entry() const noexcept {
    int d = 0;
    for (const auto& a : members_) d = std::max(d, a.max_degree());
    return d;
}

IndexSet IndexSet::set_union(const IndexSet& other) const {
    std::vector<MultiIndex> all = members_;
    all.insert(all.end(), other.members_.begin(), other.members_.end());
    return IndexSet(M_, std::move(all));
}

IndexSet IndexSet::set_difference(const IndexSet& other) const {
    std::vector<MultiIndex> out;
    for (const auto& a : members_)
        if (!other.contains(a)) out.push_back(a);
    return IndexSet(M_, std::move(out));
}

IndexSet IndexSet::set_intersection(const IndexSet& other) const {
    std::vector<MultiIndex> out;
    for (const auto& a : members_)
        if (other.contains(a)) out.push_back(a);
    return IndexSet(M_, std::move(out));
}

IndexSet complete_set(std::size_t M, int d) {
    if (M < 1) throw std::invalid_argument("complete_set: M must be >= 1");
    if (d < 0) throw std::invalid_argument("complete_set: d must be >= 0");
    std::vector<MultiIndex> out;
    MultiIndex a(M);
    // odometer over the simplex
    std::function<void(std::size_t, int)> rec = [&](std::size_t m, int remaining) {
        if (m == M) {
            out.push_back(a);
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            a[m] = k;
            rec(m + 1, remaining - k);
        }
        a[m] = 0;
    };
    rec(0, d);
    return IndexSet(M, std::move(out));
}

IndexSet neighborhood(const IndexSet& P, const IndexSet& Q) {
    if (P.num_params() != Q.num_params())
        throw std::invalid_argument("neighborhood: index sets over different M");
    const std::size_t M = P.num_params();
    std::set<std::vector<int>> seen;
    std::vector<int> lo(M), hi(M), g(M);
    for (const auto& a : P) {
        for (const auto& b : Q) {
            for (std::size_t m = 0; m < M; ++m) {
                lo[m] = std::abs(a[m] - b[m]);
                hi[m] = a[m] + b[m];
                g[m] = lo[m];
            }
            // enumerate the box [lo, hi]
            while (true) {
                seen.insert(g);
                std::size_t m = 0;
                while (m < M) {
                    if (++g[m] <= hi[m]) break;
                    g[m] = lo[m];
                    ++m;
                }
                if (m == M) break;
            }
        }
    }
    std::vector<MultiIndex> out;
    out.reserve(seen.size());
    for (const auto& v : seen) out.emplace_back(v);
    return IndexSet(M, std::move(out));
}

// ---------------------------------------------------------------------------
// Quadrature

double GaussRule::integrate(const std::function<double(double)>& g) const {
    double s = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) s += weights[q] * g(nodes[q]);
    return s;
}

namespace {

// Legendre P_n(x) and P_{n-1}(x) by the three-term recurrence.
std::pair<double, double> legendre_pair(std::size_t n, double x) {
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * static_cast<double>(k) - 1.0) * x * p1 - (static_cast<double>(k) - 1.0) * p0) /
                          static_cast<double>(k);
        p0 = p1;
        p1 = p2;
    }
    return {p1, p0};
}

} // namespace

GaussRule gauss_legendre(std::size_t n, double a, double b) {
    if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            const auto [pn, pm] = legendre_pair(n, x);
            dp = dn * (x * pn - pm) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const auto [pn, pm] = legendre_pair(n, x);
        dp = dn * (x * pn - pm) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = mid - half * x;
        rule.nodes[n - 1 - i] = mid + half * x;
        rule.weights[i] = half * w;
        rule.weights[n - 1 - i] = half * w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = mid;
    return rule;
}

GaussRule composite_gauss_legendre(std::size_t panels, std::size_t points, double a, double b) {
    GaussRule out;
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + width * static_cast<double>(p);
        GaussRule r = gauss_legendre(points, lo, lo + width);
        out.nodes.insert(out.nodes.end(), r.nodes.begin(), r.nodes.end());
        out.weights.insert(out.weights.end(), r.weights.begin(), r.weights.end());
    }
    return out;
}

double truncated_gaussian_density(double y, double sigma0) {
    if (y < -1.0 || y > 1.0) return 0.0;
    const double norm = sigma0 * std::sqrt(2.0 * std::numbers::pi) * std::erf(1.0 / (std::sqrt(2.0) * sigma0));
    return std::exp(-y * y / (2.0 * sigma0 * sigma0)) / norm;
}

// ---------------------------------------------------------------------------
// UnivariateBasis

UnivariateBasis::UnivariateBasis(double sigma0, int n_max, std::vector<double> alpha_rec,
                                 std::vector<double> beta_rec)
    : sigma0_(sigma0), n_max_(n_max), alpha_(std::move(alpha_rec)), beta_(std::move(beta_rec)) {
    if (static_cast<int>(alpha_.size()) < n_max_ + 1 || static_cast<int>(beta_.size()) < n_max_ + 1)
        throw std::invalid_argument("UnivariateBasis: recurrence arrays shorter than n_max + 1");
    for (double b : beta_)
        if (!(b > 0.0)) throw NumericalError("UnivariateBasis: non-positive recurrence coefficient beta");
    precompute();
}

double UnivariateBasis::density(double y) const { return truncated_gaussian_density(y, sigma0_); }

std::vector<double> UnivariateBasis::evaluate_all(double y, int n) const {
    if (n > n_max_) throw std::out_of_range("UnivariateBasis: degree exceeds n_max");
    std::vector<double> p(static_cast<std::size_t>(n) + 1);
    p[0] = 1.0 / std::sqrt(beta_[0]);
    if (n >= 1) p[1] = (y - alpha_[0]) * p[0] / std::sqrt(beta_[1]);
    for (int k = 1; k < n; ++k)
        p[k + 1] = ((y - alpha_[k]) * p[k] - std::sqrt(beta_[k]) * p[k - 1]) / std::sqrt(beta_[k + 1]);
    return p;
}

double UnivariateBasis::evaluate(int n, double y) const { return evaluate_all(y, n).back(); }

const GaussRule& UnivariateBasis::rule(std::size_t n) const {
    if (n == 0 || n > rules_.size()) throw std::out_of_range("UnivariateBasis: rule size out of range");
    return rules_[n - 1];
}

double UnivariateBasis::triple(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i > n_max_ || j > n_max_ || k > n_max_)
        throw std::out_of_range("triple_product: degree outside basis range");
    const std::size_t N = static_cast<std::size_t>(n_max_) + 1;
    const double v = triple_table_[(static_cast<std::size_t>(i) * N + static_cast<std::size_t>(j)) * N +
                                   static_cast<std::size_t>(k)];
    if (std::isnan(v)) throw std::out_of_range("triple_product: i+j+k exceeds quadrature exactness");
    return v;
}

GaussRule gauss_rule(const UnivariateBasis& basis, std::size_t n) {
    if (n == 0 || static_cast<int>(n) > basis.n_max())
        throw std::out_of_range("gauss_rule: n must be in [1, n_max]");
    const auto& a = basis.alpha_rec();
    const auto& b = basis.beta_rec();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = a[i];
        if (i + 1 < n) {
            const double off = std::sqrt(b[i + 1]);
            J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = off;
            J(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    if (eig.info() != Eigen::Success) throw NumericalError("gauss_rule: eigen-decomposition failed");
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        rule.nodes[i] = eig.eigenvalues()(ii);
        const double v0 = eig.eigenvectors()(0, ii);
        rule.weights[i] = b[0] * v0 * v0;
    }
    // The weight is even: enforce exact node symmetry and equal paired weights.
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

void UnivariateBasis::precompute() {
    rules_.clear();
    rules_.reserve(static_cast<std::size_t>(n_max_));
    for (int n = 1; n <= n_max_; ++n) rules_.push_back(gauss_rule(*this, static_cast<std::size_t>(n)));

    const std::size_t N = static_cast<std::size_t>(n_max_) + 1;
    triple_table_.assign(N * N * N, std::numeric_limits<double>::quiet_NaN());
    // P values at the nodes of every rule
    std::vector<std::vector<std::vector<double>>> pvals(rules_.size());
    for (std::size_t r = 0; r < rules_.size(); ++r) {
        pvals[r].reserve(rules_[r].size());
        for (double y : rules_[r].nodes) pvals[r].push_back(evaluate_all(y, n_max_));
    }
    for (int i = 0; i <= n_max_; ++i) {
        for (int j = 0; j <= n_max_; ++j) {
            for (int k = 0; k <= n_max_; ++k) {
                const int s = i + j + k;
                const int npts = (s + 1) / 2 + 1;   // ceil(s/2) + 1
                if (npts > n_max_) continue;
                double v = 0.0;
                const bool triangle_fails = (i + j < k) || (j + k < i) || (k + i < j);
                if (!triangle_fails && s % 2 == 0) {
                    // sorted degrees make the table exactly symmetric
                    std::array<std::size_t, 3> d{static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                                                 static_cast<std::size_t>(k)};
                    std::sort(d.begin(), d.end());
                    const auto& rr = rules_[static_cast<std::size_t>(npts) - 1];
                    const auto& pv = pvals[static_cast<std::size_t>(npts) - 1];
                    for (std::size_t q = 0; q < rr.size(); ++q)
                        v += rr.weights[q] * pv[q][d[0]] * pv[q][d[1]] * pv[q][d[2]];
                }
                triple_table_[(static_cast<std::size_t>(i) * N + static_cast<std::size_t>(j)) * N +
                              static_cast<std::size_t>(k)] = v;
            }
        }
    }
}

UnivariateBasis build_basis(double sigma0, int n_max) {
    if (!(sigma0 > 0.0)) throw std::invalid_argument("build_basis: sigma0 must be positive");
    if (n_max < 1) throw std::invalid_argument("build_basis: n_max must be >= 1");

    // Discretized measure: 10 panels x 20 Gauss-Legendre points.
    const GaussRule gl = composite_gauss_legendre(10, 20);
    const std::size_t N = gl.size();
    std::vector<double> w(N);
    for (std::size_t q = 0; q < N; ++q) w[q] = gl.weights[q] * truncated_gaussian_density(gl.nodes[q], sigma0);

    std::vector<double> alpha(static_cast<std::size_t>(n_max) + 1);
    std::vector<double> beta(static_cast<std::size_t>(n_max) + 1);
    // Stieltjes on monic polynomials
    std::vector<double> p_prev(N, 0.0), p(N, 1.0), p_next(N);
    double norm_prev = 0.0;
    double norm = 0.0;
    for (std::size_t q = 0; q < N; ++q) norm += w[q];
    beta[0] = norm;
    for (int n = 0; n <= n_max; ++n) {
        double num = 0.0;
        for (std::size_t q = 0; q < N; ++q) num += w[q] * gl.nodes[q] * p[q] * p[q];
        alpha[static_cast<std::size_t>(n)] = num / norm;
        if (n > 0) beta[static_cast<std::size_t>(n)] = norm / norm_prev;
        if (!(beta[static_cast<std::size_t>(n)] > 0.0))
            throw NumericalError("build_basis: non-positive beta at degree " + std::to_string(n) +
                                 " (loss of orthogonality)");
        if (n == n_max) break;
        const double bn = n > 0 ? beta[static_cast<std::size_t>(n)] : 0.0;
        for (std::size_t q = 0; q < N; ++q)
            p_next[q] = (gl.nodes[q] - alpha[static_cast<std::size_t>(n)]) * p[q] - bn * p_prev[q];
        p_prev.swap(p);
        p.swap(p_next);
        norm_prev = norm;
        norm = 0.0;
        for (std::size_t q = 0; q < N; ++q) norm += w[q] * p[q] * p[q];
    }
    return UnivariateBasis(sigma0, n_max, std::move(alpha), std::move(beta));
}

double triple_product(const UnivariateBasis& basis, int i, int j, int k) { return basis.triple(i, j, k); }

double spectral_entry(const UnivariateBasis& basis, const MultiIndex& alpha, const MultiIndex& beta,
                      const MultiIndex& gamma) {
    double v = 1.0;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        const int a = alpha[m], b = beta[m], g = gamma[m];
        if (a + b < g || b + g < a || g + a < b || ((a + b + g) & 1)) return 0.0;
        v *= basis.triple(a, b, g);
    }
    return v;
}

double SpectralMatrix::max_abs() const noexcept {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, std::abs(e.value));
    return m;
}

std::vector<double> SpectralMatrix::to_dense() const {
    std::vector<double> d(rows * cols, 0.0);
    for (const auto& e : entries) d[e.row * cols + e.col] = e.value;
    return d;
}

SpectralMatrix spectral_matrix(const MultiIndex& gamma, const IndexSet& P, const IndexSet& Q,
                               const UnivariateBasis& basis) {
    SpectralMatrix G;
    G.rows = P.size();
    G.cols = Q.size();
    for (std::size_t i = 0; i < P.size(); ++i) {
        for (std::size_t j = 0; j < Q.size(); ++j) {
            const double v = spectral_entry(basis, P[i], Q[j], gamma);
            if (v != 0.0)
                G.entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), v});
        }
    }
    return G;
}

} // namespace sgfem::polychaos
