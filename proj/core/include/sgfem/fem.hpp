#pragma once

// Uniform square grids, Q1/Q2/bubble spaces and weighted assembly.

#include "sgfem/geometry.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace sgfem::fem {

using Vector = std::vector<double>;
using ScalarFn = std::function<double(Point)>;

/// Edge of a uniform grid. On interior edges elem[0] lies left of / below the
/// edge. Boundary edges keep their single element in elem[0], elem[1] = -1.
struct Edge {
    bool vertical = false;
    Point a;                 // start (lower / left end)
    Point b;                 // end
    int elem[2] = {-1, -1};
    int local[2] = {-1, -1}; // local edge number inside elem[k]: 0 bottom, 1 right, 2 top, 3 left
    bool boundary() const noexcept { return elem[1] < 0; }
};

/// n x n square elements with n = 2^level. Nodes (i, j) are numbered
/// j * (n + 1) + i; elements (ex, ey) as ey * n + ex.
class UniformGrid {
public:
    UniformGrid(Rect domain, int level);

    const Rect& domain() const noexcept { return domain_; }
    int level() const noexcept { return level_; }
    std::size_t n() const noexcept { return n_; }
    double h() const noexcept { return h_; }
    std::size_t num_elements() const noexcept { return n_ * n_; }
    std::size_t num_nodes() const noexcept { return (n_ + 1) * (n_ + 1); }

    Point node(std::size_t i, std::size_t j) const;
    /// Lower-left corner of element e.
    Point element_origin(std::size_t e) const;
    Point to_physical(std::size_t e, Point ref) const;

    /// Horizontal edges first (j * n + i), then vertical (n (n+1) + j (n+1) + i).
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    /// Edge indices of element e in local order bottom, right, top, left.
    std::array<std::size_t, 4> element_edges(std::size_t e) const;

    UniformGrid refine() const { return UniformGrid(domain_, level_ + 1); }

private:
    Rect domain_;
    int level_;
    std::size_t n_;
    double h_;
    std::vector<Edge> edges_;
};

/// Grid level that gives edge length h on the domain (h = side 2^-level).
int level_for_edge_length(const Rect& domain, double h);

enum class SpaceKind { Q1, Q2, Bubble };

/// Points of an element quadrature in reference coordinates [0,1]^2;
/// weights sum to 1 (multiply by h^2 for the physical measure).
struct ElementQuadrature {
    std::vector<Point> points;
    std::vector<double> weights;
};

/// Tensor n x n Gauss rule on the reference square.
ElementQuadrature tensor_gauss(std::size_t n);
/// Tensor n x n Gauss rule on each of the four half-size sub-squares.
ElementQuadrature composite_gauss(std::size_t n);

/// Continuous Lagrange-type space on a grid with homogeneous Dirichlet data.
/// Q1 dofs are the grid nodes; Q2 and Bubble dofs live on the once-refined
/// lattice (stride 2n+1): Q2 takes all of it, Bubble only the edge
/// midpoints and element centroids. Bubble functions are piecewise bilinear
/// hats on the four sub-squares of each element.
class FESpace {
public:
    FESpace(const UniformGrid& grid, SpaceKind kind);

    const UniformGrid& grid() const noexcept { return grid_; }
    SpaceKind kind() const noexcept { return kind_; }
    std::size_t num_dofs() const noexcept { return points_.size(); }
    std::size_t num_free() const noexcept { return num_free_; }
    std::size_t dofs_per_element() const noexcept { return local_; }

    bool is_boundary(std::size_t dof) const { return free_index_[dof] < 0; }
    /// Position among free dofs, or -1 for Dirichlet dofs.
    std::int64_t free_index(std::size_t dof) const { return free_index_[dof]; }
    Point dof_point(std::size_t dof) const { return points_[dof]; }
    std::span<const std::uint32_t> element_dofs(std::size_t e) const {
        return {element_dofs_.data() + e * local_, local_};
    }

    /// Local shape functions at a reference point (size dofs_per_element()).
    void shape(Point ref, std::span<double> values) const;
    /// Reference gradients (divide by h for physical ones).
    void shape_gradients(Point ref, std::span<Vec2> grads) const;

    /// Nodal interpolant over all dofs (boundary values included).
    Vector interpolate(const ScalarFn& f) const;
    /// Extends a free-dof vector by zeros on the boundary.
    Vector expand(std::span<const double> free_values) const;
    Vector restrict_to_free(std::span<const double> all_values) const;
    /// Value of a finite element function (all-dof coefficients) at a point.
    double evaluate(std::span<const double> all_values, Point x) const;

private:
    UniformGrid grid_;
    SpaceKind kind_;
    std::size_t local_ = 0;
    std::size_t num_free_ = 0;
    std::vector<Point> points_;
    std::vector<std::int64_t> free_index_;
    std::vector<std::uint32_t> element_dofs_;
};

/// Compressed sparse row structure. Column indices are sorted per row.
struct CsrPattern {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col_idx;

    std::size_t nnz() const noexcept { return col_idx.size(); }
    /// Storage position of (i, j); throws if absent.
    std::size_t find(std::size_t i, std::size_t j) const;
};

/// Pattern of the free-dof stiffness matrix of a space.
std::shared_ptr<const CsrPattern> stiffness_pattern(const FESpace& space);

class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::shared_ptr<const CsrPattern> pattern, Vector values);

    std::size_t rows() const noexcept { return pattern_ ? pattern_->rows : 0; }
    std::size_t cols() const noexcept { return pattern_ ? pattern_->cols : 0; }
    std::size_t nnz() const noexcept { return values_.size(); }
    const CsrPattern& pattern() const { return *pattern_; }
    std::shared_ptr<const CsrPattern> pattern_ptr() const noexcept { return pattern_; }
    const Vector& values() const noexcept { return values_; }

    void multiply(std::span<const double> x, std::span<double> y) const;
    Vector multiply(std::span<const double> x) const;
    double at(std::size_t i, std::size_t j) const;
    /// Row-major dense copy (small problems and tests only).
    std::vector<double> to_dense() const;

private:
    std::shared_ptr<const CsrPattern> pattern_;
    Vector values_;
};

/// Several matrices on one pattern with values interleaved per nonzero:
/// values[k * terms + t] is entry k of matrix t.
struct MatrixFamily {
    std::shared_ptr<const CsrPattern> pattern;
    std::size_t terms = 0;
    Vector values;

    SparseMatrix term(std::size_t t) const;
};

/// Writes the weights of every family member at a physical point.
using FamilyWeights = std::function<void(Point, std::span<double>)>;

/// [K]_ij = int w grad phi_i . grad phi_j over free dofs, 3x3 Gauss per
/// element (composite on the sub-squares for the bubble space).
SparseMatrix assemble_stiffness(const FESpace& space, const ScalarFn& w);

MatrixFamily assemble_stiffness_family(const FESpace& space, std::size_t terms, const FamilyWeights& weights);

/// [f]_j = int f phi_j. With free_only = false every dof is kept.
Vector assemble_load(const FESpace& space, const ScalarFn& f, bool free_only = true);

/// Reference-coordinate gradient of the Q1 function with corner values
/// u[0..3] (ordered (0,0), (1,0), (0,1), (1,1)) divided by h.
Vec2 q1_gradient(const std::array<double, 4>& u, Point ref, double h);

/// Corner values of a Q1 all-dof vector on element e in q1_gradient order.
std::array<double, 4> q1_corner_values(const FESpace& q1, std::span<const double> all_values, std::size_t e);

/// Jump of the normal derivative (sum of outward derivatives from both
/// sides) of a Q1 function across interior edge `edge` at parameter s in
/// [0, 1] along the edge. Zero on boundary edges.
double q1_normal_jump(const FESpace& q1, std::span<const double> all_values, const Edge& edge, double s);

/// 1D rule used on edges: 3-point Gauss on each half of [0, 1].
ElementQuadrature edge_quadrature();

/// Edge bubble trace: the hat with value 1 at the midpoint, 0 at the ends.
inline double edge_bubble(double s) { return s < 0.5 ? 2.0 * s : 2.0 * (1.0 - s); }

/// int_E w [[du/dn]] psi_E ds for every edge (zero on boundary edges);
/// u given as Q1 free-dof coefficients.
Vector edge_jump_integrals(const FESpace& q1, std::span<const double> u_free, const ScalarFn& w);

} // namespace sgfem::fem
