#include "oracles.hpp"

#include "sgfem/randfield.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace sgfem;
using namespace sgfem::randfield;
using polychaos::IndexSet;
using polychaos::MultiIndex;

namespace {

std::shared_ptr<const polychaos::UnivariateBasis> basis1() {
    static auto b = std::make_shared<const polychaos::UnivariateBasis>(polychaos::build_basis(1.0, 40));
    return b;
}

CoefficientModel model(Nonlinearity k, AffineField f) {
    return CoefficientModel(k, std::make_shared<const AffineField>(std::move(f)), basis1(), 10);
}

// |a - b| within rel of |b|, with an absolute floor.
::testing::AssertionResult close_rel(double a, double b, double rel, double floor = 1e-14) {
    if (std::fabs(a - b) <= rel * std::fabs(b) + floor) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << a << " vs " << b << " (diff " << a - b << ")";
}

} // namespace

TEST(KL1D, EigenvaluesMatchNystrom) {
    for (double ell : {0.5, 1.0, 2.0}) {
        const auto e = kl_eigenpairs_1d(ell, 0.0, 1.0, 4);
        const auto ny = oracle::nystrom_eigenvalues(ell, 1.0, 512, 4);
        for (std::size_t k = 0; k < 4; ++k) EXPECT_TRUE(close_rel(e[k].lambda, ny[k], 1e-6)) << ell << " " << k;
        // sigma = 0.2 scales both by sigma^2
        EXPECT_TRUE(close_rel(0.04 * e[0].lambda, 0.04 * ny[0], 1e-6));
    }
}

TEST(KL1D, EigenfunctionsAreOrthonormal) {
    const auto e = kl_eigenpairs_1d(1.0, 0.5, 1.5, 6);
    const auto r = oracle::gauss_legendre(200, -1.0, 2.0);
    for (std::size_t i = 0; i < e.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < r.size(); ++q) s += r.w[q] * e[i].value(r.x[q]) * e[j].value(r.x[q]);
            EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-10);
        }
}

TEST(KL1D, SatisfiesIntegralEquation) {
    const double ell = 0.7;
    const auto e = kl_eigenpairs_1d(ell, 0.0, 1.0, 5);
    for (double t : {-0.83, -0.1, 0.4, 0.97}) {
        // split at the kink so each panel integrand is smooth
        const auto left = oracle::gauss_legendre(60, -1.0, t), right = oracle::gauss_legendre(60, t, 1.0);
        for (const auto& p : e) {
            double s = 0.0;
            for (std::size_t q = 0; q < 60; ++q) {
                s += left.w[q] * std::exp(-std::fabs(t - left.x[q]) / ell) * p.value(left.x[q]);
                s += right.w[q] * std::exp(-std::fabs(t - right.x[q]) / ell) * p.value(right.x[q]);
            }
            EXPECT_NEAR(s, p.lambda * p.value(t), 1e-12);
        }
    }
}

TEST(KL1D, OrderingTraceAndDerivative) {
    const auto e = kl_eigenpairs_1d(1.0, 0.0, 1.0, 12);
    double sum = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        EXPECT_GT(e[k].lambda, 0.0);
        if (k) EXPECT_LE(e[k].lambda, e[k - 1].lambda);
        sum += e[k].lambda;
        const double t = 0.37, d = 1e-6;
        EXPECT_NEAR(e[k].derivative(t), (e[k].value(t + d) - e[k].value(t - d)) / (2 * d), 1e-6);
    }
    EXPECT_LE(sum, 2.0);
}

TEST(KL2D, SortedAndOrthonormal) {
    const Rect D = Rect::symmetric();
    const auto modes = kl_modes_2d(0.5, 1.0, 1.0, 8, D);
    for (std::size_t k = 1; k < modes.size(); ++k) EXPECT_LE(modes[k].lambda, modes[k - 1].lambda);
    double sum = 0.0;
    for (const auto& m : modes) sum += m.lambda;
    EXPECT_LE(sum, 0.25 * D.area());

    const auto f = kl_field(0.5, 1.0, 1.0, 8, D);
    const auto r = oracle::gauss_legendre(64, -1.0, 1.0);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < 64; ++a)
                for (std::size_t b = 0; b < 64; ++b) {
                    const Point x{r.x[a], r.x[b]};
                    s += r.w[a] * r.w[b] * f.mode(i).value(x) * f.mode(j).value(x);
                }
            const double li = modes[i].lambda, lj = modes[j].lambda;
            EXPECT_NEAR(s / std::sqrt(li * lj), i == j ? 1.0 : 0.0, 1e-8) << i << "," << j;
        }
}

TEST(KL2D, TieBreakIsLexicographic) {
    const auto modes = kl_modes_2d(1.0, 1.0, 1.0, 3, Rect::symmetric());
    EXPECT_EQ(modes[0].first.index, 0);
    EXPECT_EQ(modes[0].second.index, 0);
    EXPECT_EQ(modes[1].first.index, 0);
    EXPECT_EQ(modes[1].second.index, 1);
    EXPECT_EQ(modes[2].first.index, 1);
    EXPECT_EQ(modes[2].second.index, 0);
}

TEST(Fields, GradientsMatchCentralDifferences) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u01(0.05, 0.95);
    const auto kl = kl_field(0.4, 0.8, 1.3, 6, Rect::symmetric());
    const auto cf = cosine_field(0.6, 2.0, 10);
    for (const AffineField* f : {&kl, &cf}) {
        const Rect& D = f->domain();
        for (int t = 0; t < 10; ++t) {
            const Point x{D.x0 + D.side * u01(rng), D.y0 + D.side * u01(rng)};
            for (std::size_t m = 0; m < f->num_params(); ++m) {
                const double d = 1e-6;
                const auto& term = f->mode(m);
                const Vec2 g = term.gradient(x);
                const double gx = (term.value({x.x + d, x.y}) - term.value({x.x - d, x.y})) / (2 * d);
                const double gy = (term.value({x.x, x.y + d}) - term.value({x.x, x.y - d})) / (2 * d);
                EXPECT_TRUE(close_rel(g.x, gx, 1e-6, 1e-8));
                EXPECT_TRUE(close_rel(g.y, gy, 1e-6, 1e-8));
            }
        }
    }
}

TEST(Cosine, FrequenciesAndAmplitudes) {
    EXPECT_EQ(cosine_frequencies(1), std::make_pair(0, 1));
    EXPECT_EQ(cosine_frequencies(2), std::make_pair(1, 0));
    EXPECT_EQ(cosine_frequencies(3), std::make_pair(0, 2));
    EXPECT_EQ(cosine_frequencies(4), std::make_pair(1, 1));
    EXPECT_EQ(cosine_frequencies(5), std::make_pair(2, 0));
    const double ab = 0.8, st = 2.5;
    const auto f = cosine_field(ab, st, 3);
    const Point x{0.3, 0.1};
    EXPECT_NEAR(f.mode(0).value(x), ab * std::cos(2 * std::numbers::pi * 0.1), 1e-15);
    EXPECT_NEAR(f.mode(1).value(x), ab * std::pow(2.0, -st) * std::cos(2 * std::numbers::pi * 0.3), 1e-15);
    EXPECT_NEAR(f.mode(2).value(x), ab * std::pow(3.0, -st) * std::cos(4 * std::numbers::pi * 0.1), 1e-15);
    EXPECT_EQ(f.mean().value(x), 1.0);
}

TEST(TGamma, ParameterFreeExp) {
    const auto m = model(Nonlinearity::Exp,
                         AffineField(Rect::unit(),
                                     {[](Point x) { return 0.3 * x.x; }, [](Point) { return Vec2{0.3, 0.0}; }},
                                     {FieldTerm::constant(0.0), FieldTerm::constant(0.0)}));
    const Point x{0.6, 0.2};
    EXPECT_NEAR(m.t_gamma(MultiIndex{0, 0}, x), std::exp(0.18), 1e-14);
    for (const auto& g : polychaos::complete_set(2, 3))
        if (!g.is_zero()) EXPECT_NEAR(m.t_gamma(g, x), 0.0, 1e-15);
    const Vec2 g = m.grad_t_gamma(MultiIndex{1, 0}, x);
    EXPECT_NEAR(g.x, 0.0, 1e-15);
    EXPECT_NEAR(g.y, 0.0, 1e-15);
}

TEST(TGamma, SquareSingleParameterMean) {
    const double a0 = 1.3, a1 = 0.4;
    const auto m = model(Nonlinearity::Square,
                         AffineField(Rect::unit(), FieldTerm::constant(a0), {FieldTerm::constant(a1)}));
    const auto r = oracle::measure_rule(1.0, 50);
    double y2 = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) y2 += r.w[q] * r.x[q] * r.x[q];
    EXPECT_NEAR(m.t_gamma(MultiIndex{0}, {0.5, 0.5}), a0 * a0 + a1 * a1 * y2, 1e-14);
    EXPECT_NEAR(m.moment(2, 0), y2, 1e-14);
    EXPECT_NEAR(m.moment(1, 0), 0.0, 1e-15);
}

TEST(TGamma, SquareSupportIsComplete2) {
    const auto m = model(Nonlinearity::Square, cosine_field(0.7, 2.0, 5));
    const Point x{0.31, 0.77};
    for (const auto& g : polychaos::complete_set(5, 3))
        if (g.total_degree() > 2 || g.support_size() > 2) {
            EXPECT_EQ(m.t_gamma(g, x), 0.0) << g.to_string();
            const Vec2 d = m.grad_t_gamma(g, x);
            EXPECT_EQ(d.x, 0.0);
            EXPECT_EQ(d.y, 0.0);
        }
    EXPECT_EQ(m.support(), polychaos::complete_set(5, 2));
    EXPECT_EQ(m.restrict_to_support(polychaos::complete_set(5, 3)), polychaos::complete_set(5, 2));
}

TEST(TGamma, MatchesTensorQuadratureProjection) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const oracle::ParamQuad pq(1.0, 2, 50, 8);
    for (auto kind : {Nonlinearity::Exp, Nonlinearity::Square})
        for (int field = 0; field < 2; ++field) {
            auto f = field == 0 ? kl_field(0.6, 1.0, 1.0, 2, Rect::symmetric()) : cosine_field(0.9, 2.0, 2);
            const auto m = model(kind, f);
            const Rect D = f.domain();
            for (int t = 0; t < 10; ++t) {
                const Point x{D.x0 + D.side * u01(rng), D.y0 + D.side * u01(rng)};
                for (const auto& g : polychaos::complete_set(2, 4)) {
                    const double ref = oracle::t_gamma(f, kind, pq, g, x);
                    EXPECT_TRUE(close_rel(m.t_gamma(g, x), ref, 1e-8)) << g.to_string();
                }
            }
        }
}

TEST(TGamma, GradientsMatchFiniteDifferences) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u01(0.1, 0.9);
    for (auto kind : {Nonlinearity::Exp, Nonlinearity::Square}) {
        const auto m = model(kind, cosine_field(0.8, 2.0, 3));
        for (int t = 0; t < 6; ++t) {
            const Point x{u01(rng), u01(rng)};
            for (const auto& g : polychaos::complete_set(3, 3)) {
                const double d = 1e-5;
                const Vec2 an = m.grad_t_gamma(g, x);
                const double gx = (m.t_gamma(g, {x.x + d, x.y}) - m.t_gamma(g, {x.x - d, x.y})) / (2 * d);
                const double gy = (m.t_gamma(g, {x.x, x.y + d}) - m.t_gamma(g, {x.x, x.y - d})) / (2 * d);
                EXPECT_TRUE(close_rel(an.x, gx, 1e-6, 1e-9)) << g.to_string();
                EXPECT_TRUE(close_rel(an.y, gy, 1e-6, 1e-9)) << g.to_string();
            }
        }
    }
}

TEST(TGamma, BatchMatchesSingle) {
    const auto m = model(Nonlinearity::Exp, kl_field(0.5, 1.0, 1.0, 3, Rect::symmetric()));
    const auto gs = polychaos::complete_set(3, 3);
    std::vector<double> v(gs.size());
    std::vector<Vec2> d(gs.size());
    const Point x{0.2, -0.4};
    m.evaluate(x, gs.members(), v, d);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        // the batch shares one parameter rule, so agreement is to rounding
        EXPECT_TRUE(close_rel(v[i], m.t_gamma(gs[i], x), 1e-12, 1e-15));
        EXPECT_TRUE(close_rel(d[i].x, m.grad_t_gamma(gs[i], x).x, 1e-12, 1e-15));
    }
}

TEST(Coefficient, PositiveOnConfiguredExperiments) {
    const auto e1 = model(Nonlinearity::Exp, kl_field(1.0, 1.0, 1.0, 3, Rect::symmetric()));
    EXPECT_GT(sample_coefficient_range(e1).min, 0.0);
    for (double ab : {0.4, 0.6}) {
        const auto e2 = model(Nonlinearity::Square, cosine_field(ab, 2.0, 5));
        const auto r = sample_coefficient_range(e2);
        EXPECT_GT(r.min, 0.0);
        EXPECT_GE(r.max, r.min);
    }
    // alpha_bar = 1: a = 1 - y_1 vanishes at x = (0, 0), y = -e_1, a sample point
    const auto e3 = model(Nonlinearity::Square, cosine_field(1.0, 2.0, 5));
    EXPECT_EQ(sample_coefficient_range(e3).min, 0.0);
}
