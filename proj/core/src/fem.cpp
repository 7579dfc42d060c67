#include "sgfem/fem.hpp"

#include "sgfem/parallel.hpp"
#include "sgfem/polychaos.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sgfem::fem {

// ---------------------------------------------------------------------------
// UniformGrid

UniformGrid::UniformGrid(Rect domain, int level) : domain_(domain), level_(level) {
    if (level < 0 || level > 14) throw std::invalid_argument("UniformGrid: level out of range");
    if (!(domain.side > 0.0)) throw std::invalid_argument("UniformGrid: non-positive domain side");
    n_ = std::size_t{1} << level;
    h_ = std::ldexp(domain.side, -level);

    const std::size_t n = n_;
    edges_.resize(2 * n * (n + 1));
    for (std::size_t j = 0; j <= n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            Edge& e = edges_[j * n + i];
            e.vertical = false;
            e.a = node(i, j);
            e.b = node(i + 1, j);
            int k = 0;
            if (j > 0) {
                e.elem[k] = static_cast<int>((j - 1) * n + i);
                e.local[k++] = 2;
            }
            if (j < n) {
                e.elem[k] = static_cast<int>(j * n + i);
                e.local[k++] = 0;
            }
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i <= n; ++i) {
            Edge& e = edges_[n * (n + 1) + j * (n + 1) + i];
            e.vertical = true;
            e.a = node(i, j);
            e.b = node(i, j + 1);
            int k = 0;
            if (i > 0) {
                e.elem[k] = static_cast<int>(j * n + i - 1);
                e.local[k++] = 1;
            }
            if (i < n) {
                e.elem[k] = static_cast<int>(j * n + i);
                e.local[k++] = 3;
            }
        }
    }
}

Point UniformGrid::node(std::size_t i, std::size_t j) const {
    return {domain_.x0 + static_cast<double>(i) * h_, domain_.y0 + static_cast<double>(j) * h_};
}

Point UniformGrid::element_origin(std::size_t e) const { return node(e % n_, e / n_); }

Point UniformGrid::to_physical(std::size_t e, Point ref) const {
    const Point o = element_origin(e);
    return {o.x + h_ * ref.x, o.y + h_ * ref.y};
}

std::array<std::size_t, 4> UniformGrid::element_edges(std::size_t e) const {
    const std::size_t ex = e % n_, ey = e / n_;
    const std::size_t nv = n_ * (n_ + 1);
    return {ey * n_ + ex, nv + ey * (n_ + 1) + ex + 1, (ey + 1) * n_ + ex, nv + ey * (n_ + 1) + ex};
}

int level_for_edge_length(const Rect& domain, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("level_for_edge_length: h must be positive");
    const double r = std::log2(domain.side / h);
    const int level = static_cast<int>(std::lround(r));
    if (level < 0 || std::abs(r - level) > 1e-9)
        throw std::invalid_argument("edge length " + std::to_string(h) + " is not side * 2^-level");
    return level;
}

// ---------------------------------------------------------------------------
// Quadrature

ElementQuadrature tensor_gauss(std::size_t n) {
    const auto g = polychaos::gauss_legendre(n, 0.0, 1.0);
    ElementQuadrature q;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t a = 0; a < n; ++a) {
            q.points.push_back({g.nodes[a], g.nodes[b]});
            q.weights.push_back(g.weights[a] * g.weights[b]);
        }
    return q;
}

ElementQuadrature composite_gauss(std::size_t n) {
    const auto base = tensor_gauss(n);
    ElementQuadrature q;
    for (int sy = 0; sy < 2; ++sy)
        for (int sx = 0; sx < 2; ++sx)
            for (std::size_t k = 0; k < base.points.size(); ++k) {
                q.points.push_back({0.5 * (sx + base.points[k].x), 0.5 * (sy + base.points[k].y)});
                q.weights.push_back(0.25 * base.weights[k]);
            }
    return q;
}

ElementQuadrature edge_quadrature() {
    const auto g = polychaos::gauss_legendre(3, 0.0, 0.5);
    ElementQuadrature q;
    for (int half = 0; half < 2; ++half)
        for (std::size_t k = 0; k < g.size(); ++k) {
            q.points.push_back({g.nodes[k] + 0.5 * half, 0.0});
            q.weights.push_back(g.weights[k]);
        }
    return q;
}

// ---------------------------------------------------------------------------
// FESpace

namespace {

constexpr int kBubbleLattice[5][2] = {{1, 0}, {2, 1}, {1, 2}, {0, 1}, {1, 1}};

double lagrange2(int a, double t) {
    switch (a) {
    case 0: return 2.0 * (t - 0.5) * (t - 1.0);
    case 1: return -4.0 * t * (t - 1.0);
    default: return 2.0 * t * (t - 0.5);
    }
}

double lagrange2_d(int a, double t) {
    switch (a) {
    case 0: return 4.0 * t - 3.0;
    case 1: return -8.0 * t + 4.0;
    default: return 4.0 * t - 1.0;
    }
}

double hat(int a, double t) {
    switch (a) {
    case 0: return std::max(0.0, 1.0 - 2.0 * t);
    case 1: return 1.0 - std::abs(2.0 * t - 1.0);
    default: return std::max(0.0, 2.0 * t - 1.0);
    }
}

double hat_d(int a, double t) {
    switch (a) {
    case 0: return t < 0.5 ? -2.0 : 0.0;
    case 1: return t < 0.5 ? 2.0 : -2.0;
    default: return t < 0.5 ? 0.0 : 2.0;
    }
}

} // namespace

FESpace::FESpace(const UniformGrid& grid, SpaceKind kind) : grid_(grid), kind_(kind) {
    const std::size_t n = grid_.n();
    const Rect& D = grid_.domain();
    if (kind_ == SpaceKind::Q1) {
        local_ = 4;
        for (std::size_t j = 0; j <= n; ++j)
            for (std::size_t i = 0; i <= n; ++i) {
                points_.push_back(grid_.node(i, j));
                const bool bnd = i == 0 || j == 0 || i == n || j == n;
                free_index_.push_back(bnd ? -1 : static_cast<std::int64_t>(num_free_++));
            }
        element_dofs_.resize(n * n * 4);
        for (std::size_t e = 0; e < n * n; ++e) {
            const std::size_t ex = e % n, ey = e / n;
            const std::size_t base = ey * (n + 1) + ex;
            element_dofs_[4 * e + 0] = static_cast<std::uint32_t>(base);
            element_dofs_[4 * e + 1] = static_cast<std::uint32_t>(base + 1);
            element_dofs_[4 * e + 2] = static_cast<std::uint32_t>(base + n + 1);
            element_dofs_[4 * e + 3] = static_cast<std::uint32_t>(base + n + 2);
        }
        return;
    }

    const std::size_t m = 2 * n + 1;
    const double hh = 0.5 * grid_.h();
    std::vector<std::int64_t> lattice(m * m, -1);
    for (std::size_t J = 0; J < m; ++J)
        for (std::size_t I = 0; I < m; ++I) {
            if (kind_ == SpaceKind::Bubble && I % 2 == 0 && J % 2 == 0) continue;
            lattice[J * m + I] = static_cast<std::int64_t>(points_.size());
            points_.push_back({D.x0 + static_cast<double>(I) * hh, D.y0 + static_cast<double>(J) * hh});
            const bool bnd = I == 0 || J == 0 || I == m - 1 || J == m - 1;
            free_index_.push_back(bnd ? -1 : static_cast<std::int64_t>(num_free_++));
        }
    local_ = kind_ == SpaceKind::Q2 ? 9 : 5;
    element_dofs_.resize(n * n * local_);
    for (std::size_t e = 0; e < n * n; ++e) {
        const std::size_t I0 = 2 * (e % n), J0 = 2 * (e / n);
        for (std::size_t l = 0; l < local_; ++l) {
            std::size_t a, b;
            if (kind_ == SpaceKind::Q2) {
                a = l % 3;
                b = l / 3;
            } else {
                a = static_cast<std::size_t>(kBubbleLattice[l][0]);
                b = static_cast<std::size_t>(kBubbleLattice[l][1]);
            }
            element_dofs_[e * local_ + l] = static_cast<std::uint32_t>(lattice[(J0 + b) * m + I0 + a]);
        }
    }
}

void FESpace::shape(Point r, std::span<double> v) const {
    switch (kind_) {
    case SpaceKind::Q1:
        v[0] = (1.0 - r.x) * (1.0 - r.y);
        v[1] = r.x * (1.0 - r.y);
        v[2] = (1.0 - r.x) * r.y;
        v[3] = r.x * r.y;
        return;
    case SpaceKind::Q2:
        for (int l = 0; l < 9; ++l) v[l] = lagrange2(l % 3, r.x) * lagrange2(l / 3, r.y);
        return;
    case SpaceKind::Bubble:
        for (int l = 0; l < 5; ++l) v[l] = hat(kBubbleLattice[l][0], r.x) * hat(kBubbleLattice[l][1], r.y);
        return;
    }
}

void FESpace::shape_gradients(Point r, std::span<Vec2> g) const {
    switch (kind_) {
    case SpaceKind::Q1:
        g[0] = {-(1.0 - r.y), -(1.0 - r.x)};
        g[1] = {1.0 - r.y, -r.x};
        g[2] = {-r.y, 1.0 - r.x};
        g[3] = {r.y, r.x};
        return;
    case SpaceKind::Q2:
        for (int l = 0; l < 9; ++l) {
            const int a = l % 3, b = l / 3;
            g[l] = {lagrange2_d(a, r.x) * lagrange2(b, r.y), lagrange2(a, r.x) * lagrange2_d(b, r.y)};
        }
        return;
    case SpaceKind::Bubble:
        for (int l = 0; l < 5; ++l) {
            const int a = kBubbleLattice[l][0], b = kBubbleLattice[l][1];
            g[l] = {hat_d(a, r.x) * hat(b, r.y), hat(a, r.x) * hat_d(b, r.y)};
        }
        return;
    }
}

Vector FESpace::interpolate(const ScalarFn& f) const {
    Vector v(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) v[i] = f(points_[i]);
    return v;
}

Vector FESpace::expand(std::span<const double> free_values) const {
    if (free_values.size() != num_free_) throw std::invalid_argument("FESpace::expand: size mismatch");
    Vector v(points_.size(), 0.0);
    for (std::size_t i = 0; i < points_.size(); ++i)
        if (free_index_[i] >= 0) v[i] = free_values[static_cast<std::size_t>(free_index_[i])];
    return v;
}

Vector FESpace::restrict_to_free(std::span<const double> all_values) const {
    if (all_values.size() != points_.size()) throw std::invalid_argument("FESpace::restrict_to_free: size mismatch");
    Vector v(num_free_);
    for (std::size_t i = 0; i < points_.size(); ++i)
        if (free_index_[i] >= 0) v[static_cast<std::size_t>(free_index_[i])] = all_values[i];
    return v;
}

double FESpace::evaluate(std::span<const double> all_values, Point x) const {
    const Rect& D = grid_.domain();
    const std::size_t n = grid_.n();
    const double h = grid_.h();
    const auto cell = [&](double t, double t0) {
        const double c = std::floor((t - t0) / h);
        return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(n - 1)));
    };
    const std::size_t ex = cell(x.x, D.x0), ey = cell(x.y, D.y0);
    const std::size_t e = ey * n + ex;
    const Point o = grid_.element_origin(e);
    const Point r{(x.x - o.x) / h, (x.y - o.y) / h};
    double vals[9];
    shape(r, std::span<double>(vals, local_));
    double s = 0.0;
    const auto dofs = element_dofs(e);
    for (std::size_t l = 0; l < local_; ++l) s += vals[l] * all_values[dofs[l]];
    return s;
}

// ---------------------------------------------------------------------------
// Sparse storage

std::size_t CsrPattern::find(std::size_t i, std::size_t j) const {
    const auto b = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto e = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    const auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(j));
    if (it == e || *it != j) throw std::out_of_range("CsrPattern::find: entry not in pattern");
    return static_cast<std::size_t>(it - col_idx.begin());
}

std::shared_ptr<const CsrPattern> stiffness_pattern(const FESpace& space) {
    const std::size_t nf = space.num_free();
    std::vector<std::vector<std::uint32_t>> rows(nf);
    for (std::size_t e = 0; e < space.grid().num_elements(); ++e) {
        const auto dofs = space.element_dofs(e);
        for (auto a : dofs) {
            const auto fa = space.free_index(a);
            if (fa < 0) continue;
            for (auto b : dofs) {
                const auto fb = space.free_index(b);
                if (fb >= 0) rows[static_cast<std::size_t>(fa)].push_back(static_cast<std::uint32_t>(fb));
            }
        }
    }
    auto p = std::make_shared<CsrPattern>();
    p->rows = p->cols = nf;
    p->row_ptr.assign(nf + 1, 0);
    for (std::size_t i = 0; i < nf; ++i) {
        auto& r = rows[i];
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        p->row_ptr[i + 1] = p->row_ptr[i] + r.size();
    }
    p->col_idx.reserve(p->row_ptr[nf]);
    for (auto& r : rows) p->col_idx.insert(p->col_idx.end(), r.begin(), r.end());
    return p;
}

SparseMatrix::SparseMatrix(std::shared_ptr<const CsrPattern> pattern, Vector values)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
    if (!pattern_ || values_.size() != pattern_->nnz()) throw std::invalid_argument("SparseMatrix: value count mismatch");
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    const auto& p = *pattern_;
    if (x.size() != p.cols || y.size() != p.rows) throw std::invalid_argument("SparseMatrix::multiply: size mismatch");
    for (std::size_t i = 0; i < p.rows; ++i) {
        double s = 0.0;
        for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s += values_[k] * x[p.col_idx[k]];
        y[i] = s;
    }
}

Vector SparseMatrix::multiply(std::span<const double> x) const {
    Vector y(rows());
    multiply(x, y);
    return y;
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    const auto& p = *pattern_;
    const auto b = p.col_idx.begin() + static_cast<std::ptrdiff_t>(p.row_ptr[i]);
    const auto e = p.col_idx.begin() + static_cast<std::ptrdiff_t>(p.row_ptr[i + 1]);
    const auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(j));
    if (it == e || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - p.col_idx.begin())];
}

std::vector<double> SparseMatrix::to_dense() const {
    const auto& p = *pattern_;
    std::vector<double> d(p.rows * p.cols, 0.0);
    for (std::size_t i = 0; i < p.rows; ++i)
        for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) d[i * p.cols + p.col_idx[k]] = values_[k];
    return d;
}

SparseMatrix MatrixFamily::term(std::size_t t) const {
    if (t >= terms) throw std::out_of_range("MatrixFamily::term");
    Vector v(pattern->nnz());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = values[k * terms + t];
    return SparseMatrix(pattern, std::move(v));
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

ElementQuadrature volume_rule(const FESpace& space) {
    return space.kind() == SpaceKind::Bubble ? composite_gauss(3) : tensor_gauss(3);
}

// Elements of one parity class share no dofs, so classes can be processed in
// parallel without write conflicts; the class order fixes the summation order.
template <class F>
void for_each_element_colored(const UniformGrid& grid, F&& body) {
    const std::size_t n = grid.n();
    for (std::size_t color = 0; color < 4; ++color) {
        const std::size_t cx = color % 2, cy = color / 2;
        const std::size_t nx = (n - cx + 1) / 2, ny = (n - cy + 1) / 2;
        parallel_for(nx * ny, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                const std::size_t ex = cx + 2 * (k % nx), ey = cy + 2 * (k / nx);
                body(ey * n + ex);
            }
        });
    }
}

} // namespace

MatrixFamily assemble_stiffness_family(const FESpace& space, std::size_t terms, const FamilyWeights& weights) {
    MatrixFamily fam;
    fam.pattern = stiffness_pattern(space);
    fam.terms = terms;
    fam.values.assign(fam.pattern->nnz() * terms, 0.0);
    const auto rule = volume_rule(space);
    const std::size_t L = space.dofs_per_element();
    const auto& grid = space.grid();

    // Reference gradient products per quadrature point are shared by all elements.
    const std::size_t nq = rule.points.size();
    std::vector<double> gg(nq * L * L);
    {
        std::vector<Vec2> g(L);
        for (std::size_t q = 0; q < nq; ++q) {
            space.shape_gradients(rule.points[q], g);
            for (std::size_t a = 0; a < L; ++a)
                for (std::size_t b = 0; b < L; ++b) gg[(q * L + a) * L + b] = rule.weights[q] * dot(g[a], g[b]);
        }
    }

    for_each_element_colored(grid, [&](std::size_t e) {
        std::vector<double> w(terms), local(L * L * terms, 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            weights(grid.to_physical(e, rule.points[q]), w);
            for (std::size_t ab = 0; ab < L * L; ++ab) {
                const double c = gg[q * L * L + ab];
                double* dst = local.data() + ab * terms;
                for (std::size_t t = 0; t < terms; ++t) dst[t] += c * w[t];
            }
        }
        const auto dofs = space.element_dofs(e);
        for (std::size_t a = 0; a < L; ++a) {
            const auto fa = space.free_index(dofs[a]);
            if (fa < 0) continue;
            for (std::size_t b = 0; b < L; ++b) {
                const auto fb = space.free_index(dofs[b]);
                if (fb < 0) continue;
                const std::size_t pos = fam.pattern->find(static_cast<std::size_t>(fa), static_cast<std::size_t>(fb));
                double* dst = fam.values.data() + pos * terms;
                const double* src = local.data() + (a * L + b) * terms;
                for (std::size_t t = 0; t < terms; ++t) dst[t] += src[t];
            }
        }
    });
    return fam;
}

SparseMatrix assemble_stiffness(const FESpace& space, const ScalarFn& w) {
    auto fam = assemble_stiffness_family(space, 1, [&](Point x, std::span<double> out) { out[0] = w(x); });
    return SparseMatrix(fam.pattern, std::move(fam.values));
}

Vector assemble_load(const FESpace& space, const ScalarFn& f, bool free_only) {
    const auto rule = volume_rule(space);
    const std::size_t L = space.dofs_per_element();
    const auto& grid = space.grid();
    const double area = grid.h() * grid.h();
    Vector all(space.num_dofs(), 0.0);
    std::vector<std::vector<double>> phi(rule.points.size(), std::vector<double>(L));
    for (std::size_t q = 0; q < rule.points.size(); ++q) space.shape(rule.points[q], phi[q]);
    for_each_element_colored(grid, [&](std::size_t e) {
        const auto dofs = space.element_dofs(e);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double fw = f(grid.to_physical(e, rule.points[q])) * rule.weights[q] * area;
            for (std::size_t a = 0; a < L; ++a) all[dofs[a]] += fw * phi[q][a];
        }
    });
    return free_only ? space.restrict_to_free(all) : all;
}

// ---------------------------------------------------------------------------
// Q1 gradients and edge jumps

Vec2 q1_gradient(const std::array<double, 4>& u, Point r, double h) {
    return {((u[1] - u[0]) * (1.0 - r.y) + (u[3] - u[2]) * r.y) / h,
            ((u[2] - u[0]) * (1.0 - r.x) + (u[3] - u[1]) * r.x) / h};
}

std::array<double, 4> q1_corner_values(const FESpace& q1, std::span<const double> all_values, std::size_t e) {
    const auto d = q1.element_dofs(e);
    return {all_values[d[0]], all_values[d[1]], all_values[d[2]], all_values[d[3]]};
}

double q1_normal_jump(const FESpace& q1, std::span<const double> all_values, const Edge& edge, double s) {
    if (edge.boundary()) return 0.0;
    const double h = q1.grid().h();
    const auto u0 = q1_corner_values(q1, all_values, static_cast<std::size_t>(edge.elem[0]));
    const auto u1 = q1_corner_values(q1, all_values, static_cast<std::size_t>(edge.elem[1]));
    if (edge.vertical) return q1_gradient(u0, {1.0, s}, h).x - q1_gradient(u1, {0.0, s}, h).x;
    return q1_gradient(u0, {s, 1.0}, h).y - q1_gradient(u1, {s, 0.0}, h).y;
}

Vector edge_jump_integrals(const FESpace& q1, std::span<const double> u_free, const ScalarFn& w) {
    if (q1.kind() != SpaceKind::Q1) throw std::invalid_argument("edge_jump_integrals: Q1 space required");
    const Vector u = q1.expand(u_free);
    const auto rule = edge_quadrature();
    const double h = q1.grid().h();
    const auto& edges = q1.grid().edges();
    Vector out(edges.size(), 0.0);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const Edge& E = edges[k];
        if (E.boundary()) continue;
        double s = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double t = rule.points[q].x;
            const Point x{E.a.x + t * (E.b.x - E.a.x), E.a.y + t * (E.b.y - E.a.y)};
            s += rule.weights[q] * w(x) * q1_normal_jump(q1, u, E, t) * edge_bubble(t);
        }
        out[k] = s * h;
    }
    return out;
}

} // namespace sgfem::fem
