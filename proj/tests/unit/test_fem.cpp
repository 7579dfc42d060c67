#include "oracles.hpp"

#include "sgfem/fem.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace sgfem;
using namespace sgfem::fem;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& K) {
    const auto d = K.to_dense();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        d.data(), static_cast<Eigen::Index>(K.rows()), static_cast<Eigen::Index>(K.cols()));
}

} // namespace

TEST(Grid, Geometry) {
    const UniformGrid g(Rect::symmetric(), 1);
    EXPECT_EQ(g.h(), 1.0);
    EXPECT_EQ(g.num_elements(), 4u);
    EXPECT_EQ(g.num_nodes(), 9u);
    const UniformGrid u(Rect::unit(), 5);
    EXPECT_EQ(u.h(), 1.0 / 32.0);
    EXPECT_EQ(u.num_elements(), 1024u);
    EXPECT_EQ(u.num_nodes(), 1089u);
    EXPECT_EQ(g.refine().refine().h(), g.h() / 4.0);
    EXPECT_EQ(level_for_edge_length(Rect::symmetric(), 0.5), 2);
    EXPECT_EQ(level_for_edge_length(Rect::unit(), 0.25), 2);
    EXPECT_THROW(level_for_edge_length(Rect::unit(), 0.3), std::invalid_argument);
}

TEST(Grid, EdgesAndReproducibleNodes) {
    const UniformGrid g(Rect::unit(), 3);
    const std::size_t n = g.n();
    EXPECT_EQ(g.edges().size(), 2 * n * (n + 1));
    std::size_t bnd = 0;
    for (const auto& e : g.edges()) bnd += e.boundary();
    EXPECT_EQ(bnd, 4 * n);
    const UniformGrid h(Rect::unit(), 3);
    for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = 0; i <= n; ++i) {
            EXPECT_EQ(g.node(i, j).x, h.node(i, j).x);
            EXPECT_EQ(g.node(i, j).y, h.node(i, j).y);
        }
    // Each element lists its four edges and each edge knows its local slot.
    for (std::size_t e = 0; e < g.num_elements(); ++e) {
        const auto ed = g.element_edges(e);
        for (int l = 0; l < 4; ++l) {
            const auto& E = g.edges()[ed[static_cast<std::size_t>(l)]];
            const int side = E.elem[0] == static_cast<int>(e) ? 0 : 1;
            EXPECT_EQ(E.elem[side], static_cast<int>(e));
            EXPECT_EQ(E.local[side], l);
        }
    }
}

TEST(Space, DofCounts) {
    const UniformGrid g(Rect::unit(), 3);
    const std::size_t n = g.n();
    const FESpace q1(g, SpaceKind::Q1), q2(g, SpaceKind::Q2), b(g, SpaceKind::Bubble);
    EXPECT_EQ(q1.num_dofs(), (n + 1) * (n + 1));
    EXPECT_EQ(q1.num_free(), (n - 1) * (n - 1));
    EXPECT_EQ(q2.num_dofs(), (2 * n + 1) * (2 * n + 1));
    EXPECT_EQ(q2.num_free(), (2 * n - 1) * (2 * n - 1));
    EXPECT_EQ(b.num_dofs(), 2 * n * (n + 1) + n * n);
    EXPECT_EQ(b.num_free(), 2 * n * (n + 1) - 4 * n + n * n);
    EXPECT_EQ(q1.dofs_per_element(), 4u);
    EXPECT_EQ(q2.dofs_per_element(), 9u);
    EXPECT_EQ(b.dofs_per_element(), 5u);
}

TEST(Space, PartitionOfUnity) {
    const UniformGrid g(Rect::unit(), 1);
    for (auto kind : {SpaceKind::Q1, SpaceKind::Q2}) {
        const FESpace s(g, kind);
        std::vector<double> v(s.dofs_per_element());
        std::vector<Vec2> d(s.dofs_per_element());
        for (double x : {0.0, 0.13, 0.5, 0.91})
            for (double y : {0.0, 0.37, 0.77, 1.0}) {
                s.shape({x, y}, v);
                s.shape_gradients({x, y}, d);
                double sum = 0.0;
                Vec2 gs;
                for (std::size_t k = 0; k < v.size(); ++k) {
                    sum += v[k];
                    gs += d[k];
                }
                EXPECT_NEAR(sum, 1.0, 1e-14);
                EXPECT_NEAR(gs.x, 0.0, 1e-13);
                EXPECT_NEAR(gs.y, 0.0, 1e-13);
            }
    }
}

TEST(Space, BubbleLocality) {
    const FESpace b(UniformGrid(Rect::unit(), 0), SpaceKind::Bubble);
    std::vector<double> v(5);
    // local order: bottom, right, top, left midpoints, centroid
    const Point mids[4] = {{0.5, 0.0}, {1.0, 0.5}, {0.5, 1.0}, {0.0, 0.5}};
    for (int l = 0; l < 4; ++l) {
        b.shape(mids[l], v);
        for (int k = 0; k < 5; ++k) EXPECT_NEAR(v[static_cast<std::size_t>(k)], k == l ? 1.0 : 0.0, 1e-15);
    }
    for (double s = 0.0; s <= 1.0; s += 0.125) {
        for (Point p : {Point{s, 0.0}, Point{1.0, s}, Point{s, 1.0}, Point{0.0, s}}) {
            b.shape(p, v);
            EXPECT_EQ(v[4], 0.0);
        }
        b.shape({s, 0.0}, v);   // bottom edge: only the bottom bubble survives
        EXPECT_EQ(v[1] + v[2] + v[3], 0.0);
        b.shape({1.0, s}, v);
        EXPECT_EQ(v[0] + v[2] + v[3], 0.0);
    }
    b.shape({0.5, 0.5}, v);
    EXPECT_EQ(v[4], 1.0);
}

TEST(Space, Q2ReproducesQ1) {
    const UniformGrid g(Rect::symmetric(), 2);
    const FESpace q1(g, SpaceKind::Q1), q2(g, SpaceKind::Q2);
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector a(q1.num_dofs());
    for (auto& v : a) v = u(rng);
    const Vector b = q2.interpolate([&](Point x) { return q1.evaluate(a, x); });
    for (int t = 0; t < 50; ++t) {
        const Point x{u(rng), u(rng)};
        EXPECT_NEAR(q2.evaluate(b, x), q1.evaluate(a, x), 1e-14);
    }
}

TEST(Stiffness, UnitWeightClosedForm) {
    // level 2 on the unit square: interior stencil 8/3, -1/3 to all eight neighbours
    const FESpace q1(UniformGrid(Rect::unit(), 2), SpaceKind::Q1);
    const auto K = dense(assemble_stiffness(q1, [](Point) { return 1.0; }));
    ASSERT_EQ(K.rows(), 9);
    EXPECT_NEAR(K(4, 4), 8.0 / 3.0, 1e-14);
    EXPECT_NEAR(K(4, 1), -1.0 / 3.0, 1e-14);
    EXPECT_NEAR(K(4, 0), -1.0 / 3.0, 1e-14);
    EXPECT_NEAR(K(0, 8), 0.0, 1e-15);
    // the element matrix itself
    std::vector<Vec2> d(4);
    const auto rule = tensor_gauss(3);
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        q1.shape_gradients(rule.points[q], d);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) A(i, j) += rule.weights[q] * dot(d[i], d[j]);
    }
    // corners (0,0),(1,0),(0,1),(1,1): 0-3 diagonal neighbours, 0-1 edge neighbours
    EXPECT_NEAR(A(0, 0), 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(A(0, 1), -1.0 / 6.0, 1e-14);
    EXPECT_NEAR(A(0, 3), -1.0 / 3.0, 1e-14);
}

TEST(Stiffness, LinearInWeightSymmetricDefinite) {
    const FESpace q1(UniformGrid(Rect::unit(), 3), SpaceKind::Q1);
    const auto K1 = dense(assemble_stiffness(q1, [](Point) { return 1.0; }));
    const auto K3 = dense(assemble_stiffness(q1, [](Point) { return 3.5; }));
    EXPECT_LT((K3 - 3.5 * K1).cwiseAbs().maxCoeff(), 1e-14);
    const auto Kw = assemble_stiffness(q1, [](Point x) { return 1.0 + x.x * x.x + 0.5 * std::sin(7 * x.y); });
    std::mt19937 rng(2);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 20; ++t) {
        Vector u(Kw.rows()), v(Kw.rows());
        for (auto& x : u) x = nd(rng);
        for (auto& x : v) x = nd(rng);
        const auto Au = Kw.multiply(u), Av = Kw.multiply(v);
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            a += Au[i] * v[i];
            b += u[i] * Av[i];
        }
        EXPECT_NEAR(a, b, 1e-12 * std::fabs(a));
    }
    EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(dense(Kw)).info(), Eigen::Success);
}

TEST(Stiffness, MatchesOracleAssembly) {
    const randfield::AffineField f0(Rect::symmetric(),
                                    {[](Point x) { return 0.3 * x.x * x.y; },
                                     [](Point x) { return Vec2{0.3 * x.y, 0.3 * x.x}; }},
                                    {});
    const oracle::ParamQuad pq(1.0, 0);
    const polychaos::IndexSet zero(0, {polychaos::MultiIndex::zero(0)});
    const oracle::Q1Grid og(Rect::symmetric(), 2);
    const auto ref = oracle::bilinear_form(f0, oracle::Kind::Exp, pq, og, zero, zero);
    const FESpace q1(UniformGrid(Rect::symmetric(), 2), SpaceKind::Q1);
    const auto K = dense(assemble_stiffness(q1, [](Point x) { return std::exp(0.3 * x.x * x.y); }));
    EXPECT_LT((K - ref).cwiseAbs().maxCoeff(), 1e-13 * ref.cwiseAbs().maxCoeff());
}

TEST(Stiffness, DeterministicAssembly) {
    const FESpace q1(UniformGrid(Rect::unit(), 4), SpaceKind::Q1);
    auto w = [](Point x) { return 1.0 + std::exp(x.x - x.y); };
    EXPECT_EQ(assemble_stiffness(q1, w).values(), assemble_stiffness(q1, w).values());
}

TEST(Stiffness, FamilyMatchesSingleAssemblies) {
    const FESpace q1(UniformGrid(Rect::unit(), 3), SpaceKind::Q1);
    const auto fam = assemble_stiffness_family(q1, 2, [](Point x, std::span<double> w) {
        w[0] = 1.0;
        w[1] = x.x;
    });
    EXPECT_LT((dense(fam.term(0)) - dense(assemble_stiffness(q1, [](Point) { return 1.0; }))).cwiseAbs().maxCoeff(),
              1e-15);
    EXPECT_LT((dense(fam.term(1)) - dense(assemble_stiffness(q1, [](Point x) { return x.x; }))).cwiseAbs().maxCoeff(),
              1e-15);
    EXPECT_THROW(fam.pattern->find(0, fam.pattern->cols - 1), std::exception);
}

TEST(Load, Values) {
    const FESpace q1(UniformGrid(Rect::symmetric(), 3), SpaceKind::Q1);
    const double h = q1.grid().h();
    const auto b = assemble_load(q1, [](Point) { return 1.0; });
    for (double v : b) EXPECT_NEAR(v, h * h, 1e-15);
    for (double v : assemble_load(q1, [](Point) { return 0.0; })) EXPECT_EQ(v, 0.0);
    double s = 0.0;
    for (double v : assemble_load(q1, [](Point) { return 1.0; }, false)) s += v;
    EXPECT_NEAR(s, 4.0, 1e-13);
    const oracle::Q1Grid og(Rect::symmetric(), 3);
    const auto ref = oracle::load(og, [](Point x) { return std::cos(x.x) + x.y; });
    const auto got = assemble_load(q1, [](Point x) { return std::cos(x.x) + x.y; });
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], ref(static_cast<Eigen::Index>(i)), 1e-15);
}

TEST(Solve, Q2PatchTestIsExact) {
    // u = x(1-x)y(1-y) is biquadratic; 3x3 Gauss integrates every term exactly.
    const FESpace q2(UniformGrid(Rect::unit(), 2), SpaceKind::Q2);
    const auto K = dense(assemble_stiffness(q2, [](Point) { return 1.0; }));
    const auto b = assemble_load(q2, [](Point x) { return 2.0 * (x.y * (1 - x.y) + x.x * (1 - x.x)); });
    const Eigen::VectorXd u = K.llt().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
    const auto all = q2.expand(std::vector<double>(u.data(), u.data() + u.size()));
    for (std::size_t d = 0; d < q2.num_dofs(); ++d) {
        const Point p = q2.dof_point(d);
        EXPECT_NEAR(all[d], p.x * (1 - p.x) * p.y * (1 - p.y), 1e-13);
    }
}

TEST(EdgeJumps, LinearHasNoJumpKinkHasTwo) {
    const FESpace q1(UniformGrid(Rect::unit(), 2), SpaceKind::Q1);
    const auto lin = q1.interpolate([](Point x) { return 2.0 * x.x - 0.5 * x.y; });
    const auto kink = q1.interpolate([](Point x) { return std::fabs(x.x - 0.5); });
    for (const auto& E : q1.grid().edges()) {
        if (E.boundary()) continue;
        for (double s : {0.1, 0.5, 0.9}) {
            EXPECT_NEAR(q1_normal_jump(q1, lin, E, s), 0.0, 1e-13);
            const bool on_kink = E.vertical && std::fabs(E.a.x - 0.5) < 1e-15;
            EXPECT_NEAR(std::fabs(q1_normal_jump(q1, kink, E, s)), on_kink ? 2.0 : 0.0, 1e-13);
        }
    }
}

TEST(EdgeJumps, IntegralsScaleWithWeight) {
    const FESpace q1(UniformGrid(Rect::unit(), 3), SpaceKind::Q1);
    std::vector<double> u(q1.num_free());
    std::mt19937 rng(4);
    std::normal_distribution<double> nd;
    for (auto& v : u) v = nd(rng);
    auto w = [](Point x) { return 1.0 + x.x; };
    const auto a = edge_jump_integrals(q1, u, w);
    const auto b = edge_jump_integrals(q1, u, [&](Point x) { return 2.0 * w(x); });
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_NEAR(b[k], 2.0 * a[k], 1e-14 * (1.0 + std::fabs(a[k])));
        if (q1.grid().edges()[k].boundary()) EXPECT_EQ(a[k], 0.0);
    }
}

TEST(Quadrature, RulesSumToOne) {
    for (const auto& r : {tensor_gauss(3), composite_gauss(3), edge_quadrature()}) {
        double s = 0.0;
        for (double w : r.weights) s += w;
        EXPECT_NEAR(s, 1.0, 1e-15);
    }
}
